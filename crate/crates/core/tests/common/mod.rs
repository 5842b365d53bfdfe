//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qsub_core::fermion::{FermionOperator, FermionTerm, LadderKind, LadderOp, Pauli, PauliString};
use rand::Rng;

pub const FIXTURE: &str = include_str!("../../../../fixtures/h2_sto3g_0.75.ham");

/// `|a - b| <= tol` with slack for decimal literals in binary.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + 1e-9)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn two(m: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &m)
}

/// Ladder operator on `n` orbitals as a tensor product, qubit `n-1` leftmost
/// so that the matrix index equals the occupation bitmask.
pub fn ladder_dense(n: usize, orbital: usize, create: bool) -> DMatrix<f64> {
    let id = two([1.0, 0.0, 0.0, 1.0]);
    let z = two([1.0, 0.0, 0.0, -1.0]);
    // |1><0| creates, |0><1| annihilates
    let local = if create {
        two([0.0, 0.0, 1.0, 0.0])
    } else {
        two([0.0, 1.0, 0.0, 0.0])
    };
    let mut m = DMatrix::from_element(1, 1, 1.0);
    for q in (0..n).rev() {
        let f = if q == orbital {
            &local
        } else if q < orbital {
            &z
        } else {
            &id
        };
        m = kron(&m, f);
    }
    m
}

pub fn term_dense(n: usize, term: &FermionTerm) -> DMatrix<f64> {
    let mut m = DMatrix::identity(1 << n, 1 << n) * term.coefficient;
    for op in &term.ops {
        m *= ladder_dense(n, op.orbital, op.kind == LadderKind::Create);
    }
    m
}

pub fn operator_dense(op: &FermionOperator) -> DMatrix<f64> {
    let n = op.n_orbitals();
    let mut m = DMatrix::zeros(1 << n, 1 << n);
    for t in op.terms() {
        m += term_dense(n, t);
    }
    m
}

pub fn pauli_dense(n: usize, strings: &[PauliString]) -> DMatrix<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let id = DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
    let x = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
    let y = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
    let z = DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
    let mut total = DMatrix::from_element(1 << n, 1 << n, c(0., 0.));
    for s in strings {
        let mut m = DMatrix::from_element(1, 1, c(s.coefficient, 0.0));
        for q in (0..n).rev() {
            let f = match s.factors.get(&q) {
                Some(Pauli::X) => &x,
                Some(Pauli::Y) => &y,
                Some(Pauli::Z) => &z,
                None => &id,
            };
            m = m.kronecker(f);
        }
        total += m;
    }
    total
}

/// Random Hermitian operator `sum c (T + T^dagger)` on `n` orbitals.
pub fn random_hermitian(rng: &mut impl Rng, n: usize, n_terms: usize) -> FermionOperator {
    let mut terms = Vec::new();
    for _ in 0..n_terms {
        let len = rng.random_range(0..=4);
        let ops: Vec<LadderOp> = (0..len)
            .map(|_| {
                let i = rng.random_range(0..n);
                if rng.random_bool(0.5) {
                    LadderOp::create(i)
                } else {
                    LadderOp::annihilate(i)
                }
            })
            .collect();
        let t = FermionTerm::new(rng.random_range(-1.0..1.0), ops);
        terms.push(t.dagger());
        terms.push(t);
    }
    FermionOperator::with_orbitals(terms, n).unwrap()
}

/// Cyclic Jacobi eigenvalue iteration, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Characteristic polynomial by Faddeev-LeVerrier, highest degree first.
pub fn charpoly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        mk = m * (&mk + &id * c);
        c = -mk.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Real roots of a polynomial with simple real roots, by sign changes on a
/// fine grid over `[lo, hi]` and bisection.
pub fn real_roots(poly: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let eval = |x: f64| poly.iter().fold(0.0, |acc, c| acc * x + c);
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = eval(x0);
    for k in 1..=steps {
        let x1 = lo + k as f64 * h;
        let f1 = eval(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let fm = eval(mid);
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Gershgorin bounds of a symmetric matrix.
pub fn gershgorin(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        lo = lo.min(m[(i, i)] - r);
        hi = hi.max(m[(i, i)] + r);
    }
    (lo - 1.0, hi + 1.0)
}

pub fn random_unit(rng: &mut impl Rng, len: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// `<psi|H|psi>` from a dense real matrix.
pub fn dense_expectation(h: &DMatrix<f64>, psi: &[Complex64]) -> f64 {
    let n = h.nrows();
    let mut e = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            e += psi[i].conj() * h[(i, j)] * psi[j];
        }
    }
    e.re
}
