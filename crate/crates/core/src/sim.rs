//! Dense statevector simulation and exact diagonalization.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::fermion::bitstring;
use crate::linalg::{canonical_basis, ordering_key, symmetric_eigen, SparseVector};
use crate::mapping::{MappedState, ReducedHamiltonian};
use crate::numfmt::sig12;

/// Largest register for which dense unitaries are built.
pub const UNITARY_QUBIT_LIMIT: usize = 12;
/// Largest register simulated as a statevector.
pub const STATE_QUBIT_LIMIT: usize = 26;
/// Tolerance of the phase-aligned unitary comparison.
pub const EQUIVALENCE_TOL: f64 = 1e-9;
/// Eigenvalues this close to the minimum count as degenerate ground states.
pub const DEGENERACY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    n_qubits: usize,
}

impl StateVector {
    /// The computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_width(n_qubits)?;
        if index >> n_qubits != 0 {
            return Err(Error::invalid(format!(
                "basis state {index} does not fit on {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[index] = ONE;
        Ok(StateVector {
            amplitudes,
            n_qubits,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "state length {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_width(n_qubits)?;
        let s = StateVector {
            amplitudes,
            n_qubits,
        };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("state has norm {}", s.norm())));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&mut self, gate: &Gate) {
        let amps = &mut self.amplitudes;
        match *gate {
            Gate::Cnot { control, target } => {
                let (c, t) = (1usize << control, 1usize << target);
                for i in 0..amps.len() {
                    if i & c != 0 && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            Gate::H(q) => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                single(amps, q, [[r.into(), r.into()], [r.into(), (-r).into()]]);
            }
            Gate::X(q) => single(amps, q, [[ZERO, ONE], [ONE, ZERO]]),
            Gate::Rx(q, t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                let m = Complex64::new(0.0, -s);
                single(amps, q, [[c.into(), m], [m, c.into()]]);
            }
            Gate::Ry(q, t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                single(amps, q, [[c.into(), (-s).into()], [s.into(), c.into()]]);
            }
            Gate::Rz(q, t) => {
                let lo = Complex64::from_polar(1.0, -t / 2.0);
                let hi = Complex64::from_polar(1.0, t / 2.0);
                single(amps, q, [[lo, ZERO], [ZERO, hi]]);
            }
        }
    }
}

fn single(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a0, a1) = (amps[i], amps[i | bit]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits > STATE_QUBIT_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: 1usize << n_qubits.min(62),
            limit: 1 << STATE_QUBIT_LIMIT,
        });
    }
    Ok(())
}

/// Runs `circuit` on the computational basis state `|initial>`.
pub fn run(circuit: &Circuit, initial: usize) -> Result<StateVector> {
    run_from(circuit, StateVector::basis(circuit.n_qubits(), initial)?)
}

pub fn run_from(circuit: &Circuit, mut state: StateVector) -> Result<StateVector> {
    if state.n_qubits != circuit.n_qubits() {
        return Err(Error::invalid(format!(
            "{}-qubit circuit applied to a {}-qubit state",
            circuit.n_qubits(),
            state.n_qubits
        )));
    }
    for g in circuit.gates() {
        state.apply(g);
    }
    Ok(state)
}

/// Outcome distribution over computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub probs: Vec<f64>,
    /// Per-state counts in sampled mode.
    pub counts: Option<Vec<u64>>,
    pub shots: Option<u64>,
}

impl ProbabilityTable {
    pub fn n_qubits(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    /// CSV `bitstring,probability[,counts]`, one row per basis state.
    pub fn to_csv(&self) -> String {
        let n = self.n_qubits();
        let mut out = String::from("bitstring,probability");
        if self.counts.is_some() {
            out.push_str(",counts");
        }
        out.push('\n');
        for (i, p) in self.probs.iter().enumerate() {
            let _ = write!(out, "{},{}", bitstring(i as u64, n), sig12(*p));
            if let Some(c) = &self.counts {
                let _ = write!(out, ",{}", c[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Born-rule probabilities, exact or estimated from `shots` samples.
///
/// Sampling draws a multinomial as a sequence of binomials from a ChaCha8
/// generator seeded with `seed`.
pub fn probabilities(
    state: &StateVector,
    shots: Option<u64>,
    seed: u64,
) -> Result<ProbabilityTable> {
    let exact: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let Some(n) = shots else {
        return Ok(ProbabilityTable {
            probs: exact,
            counts: None,
            shots: None,
        });
    };
    if n == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; exact.len()];
    let mut left = n;
    let mut mass: f64 = exact.iter().sum();
    for (i, &p) in exact.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == exact.len() || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q)
            .map_err(|e| Error::invalid(format!("binomial draw: {e}")))?
            .sample(&mut rng);
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(ProbabilityTable {
        probs,
        counts: Some(counts),
        shots: Some(n),
    })
}

/// Dense unitary of a circuit; column `j` is the image of `|j>`.
pub fn unitary_of(circuit: &Circuit) -> Result<DMatrix<Complex64>> {
    let n = circuit.n_qubits();
    if n > UNITARY_QUBIT_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: 1 << n,
            limit: 1 << UNITARY_QUBIT_LIMIT,
        });
    }
    let dim = 1usize << n;
    let mut u = DMatrix::from_element(dim, dim, ZERO);
    for j in 0..dim {
        let s = run(circuit, j)?;
        for (i, a) in s.amplitudes.iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// Compares unitaries up to a global phase, aligned on the largest entry
/// of `a`. Returns whether they match and the max-norm residual.
pub fn equivalent(a: &Circuit, b: &Circuit) -> Result<(bool, f64)> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::invalid(
            "circuits act on different numbers of qubits",
        ));
    }
    let ua = unitary_of(a)?;
    let ub = unitary_of(b)?;
    let residual = phase_aligned_residual(&ua, &ub);
    Ok((residual < EQUIVALENCE_TOL, residual))
}

/// `max |A - e^{i phi} B|` with `phi` chosen on the largest entry of `A`.
pub fn phase_aligned_residual(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let mut best = (0, 0.0);
    for (k, z) in a.iter().enumerate() {
        if z.norm() > best.1 + 1e-12 {
            best = (k, z.norm());
        }
    }
    let (za, zb) = (a.as_slice()[best.0], b.as_slice()[best.0]);
    let phase = if zb.norm() > 1e-12 {
        let r = za / zb;
        r / r.norm()
    } else {
        ONE
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

/// Exact spectrum and ground state of a reduced Hamiltonian.
#[derive(Debug, Clone)]
pub struct Eigensolution {
    /// All eigenvalues, ascending.
    pub energies: Vec<f64>,
    pub ground_energy: f64,
    pub ground_state: MappedState,
    /// Dimension of the ground eigenspace.
    pub degeneracy: usize,
}

impl Eigensolution {
    /// CSV `index,eigenvalue`.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, e) in self.energies.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", sig12(*e));
        }
        out
    }
}

/// Dense symmetric diagonalization. A degenerate ground space is reduced to
/// a single vector with the deterministic basis rule used for subspaces.
pub fn eigensolve(h: &ReducedHamiltonian) -> Result<Eigensolution> {
    let dense = h.dense()?;
    let (energies, vectors) = symmetric_eigen(dense);
    let ground_energy = energies[0];
    let ground_cols: Vec<usize> = (0..energies.len())
        .filter(|&k| energies[k] - ground_energy <= DEGENERACY_TOL)
        .collect();
    let span = DMatrix::from_fn(h.dim(), ground_cols.len(), |r, c| {
        vectors[(r, ground_cols[c])]
    });
    let canon = canonical_basis(&span);
    let mut candidates: Vec<SparseVector> = (0..canon.ncols())
        .map(|c| {
            (0..h.dim())
                .filter(|&r| canon[(r, c)] != 0.0)
                .map(|r| (r as u64, canon[(r, c)]))
                .collect()
        })
        .collect();
    candidates.sort_by_key(ordering_key);
    let mut amplitudes = vec![ZERO; 1 << h.n_qubits()];
    for &(r, a) in &candidates[0] {
        amplitudes[r as usize] = a.into();
    }
    Ok(Eigensolution {
        energies,
        ground_energy,
        ground_state: MappedState {
            amplitudes,
            n_qubits: h.n_qubits(),
        },
        degeneracy: ground_cols.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_qasm;

    #[test]
    fn hadamard_splits_evenly() {
        let mut c = Circuit::new(1);
        c.push(Gate::H(0)).unwrap();
        let p = probabilities(&run(&c, 0).unwrap(), None, 0).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-15 && (p.probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = run(&Circuit::new(2), 0).unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
    }

    #[test]
    fn cnot_unitary_is_permutation() {
        let c = Circuit::from_gates(
            2,
            vec![Gate::Cnot {
                control: 0,
                target: 1,
            }],
        )
        .unwrap();
        let u = unitary_of(&c).unwrap();
        // |01> -> |11>, |11> -> |01>
        assert_eq!(u[(3, 1)], ONE);
        assert_eq!(u[(1, 3)], ONE);
        assert_eq!(u[(0, 0)], ONE);
        assert_eq!(u[(2, 2)], ONE);
    }

    #[test]
    fn rz_convention() {
        let c = Circuit::from_gates(1, vec![Gate::Rz(0, 0.5)]).unwrap();
        let u = unitary_of(&c).unwrap();
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, -0.25)).norm() < 1e-15);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn equivalence_ignores_global_phase() {
        let a = Circuit::from_gates(1, vec![Gate::Rz(0, 0.7)]).unwrap();
        let b = Circuit::from_gates(1, vec![Gate::Rz(0, 0.7), Gate::X(0), Gate::X(0)]).unwrap();
        assert!(equivalent(&a, &b).unwrap().0);
        let h = Circuit::from_gates(1, vec![Gate::H(0)]).unwrap();
        let x = Circuit::from_gates(1, vec![Gate::X(0)]).unwrap();
        assert!(!equivalent(&h, &x).unwrap().0);
        assert_eq!(equivalent(&h, &h).unwrap().1, 0.0);
    }

    #[test]
    fn prep_fixture_probabilities() {
        let c = parse_qasm(include_str!("../../../fixtures/h2_prep.qasm")).unwrap();
        let p = probabilities(&run(&c, 0).unwrap(), None, 0).unwrap();
        assert!((p.probs[0b0011] - 0.98683).abs() < 1e-5);
        assert!((p.probs[0b1100] - 0.01316).abs() < 1e-5);
        let rest: f64 = (0..16)
            .filter(|&i| i != 0b0011 && i != 0b1100)
            .map(|i| p.probs[i])
            .sum();
        assert!(rest < 1e-10);
    }

    #[test]
    fn sampling_is_seeded() {
        let c = Circuit::from_gates(
            2,
            vec![
                Gate::H(0),
                Gate::Cnot {
                    control: 0,
                    target: 1,
                },
            ],
        )
        .unwrap();
        let s = run(&c, 0).unwrap();
        let a = probabilities(&s, Some(1000), 7).unwrap();
        let b = probabilities(&s, Some(1000), 7).unwrap();
        assert_eq!(a, b);
        let counts = a.counts.unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts[1] + counts[2], 0);
    }

    #[test]
    fn diagonal_ground_state() {
        let h =
            ReducedHamiltonian::new(2, 3, vec![(0, 0, 1.0), (1, 1, -2.0), (2, 2, 0.5)]).unwrap();
        let e = eigensolve(&h).unwrap();
        assert_eq!(e.ground_energy, -2.0);
        assert_eq!(e.ground_state.amplitudes[1], ONE);
        assert_eq!(e.degeneracy, 1);
    }

    #[test]
    fn degenerate_ground_state_is_canonical() {
        let h =
            ReducedHamiltonian::new(2, 3, vec![(0, 0, -1.0), (1, 1, -1.0), (2, 2, 0.0)]).unwrap();
        let e = eigensolve(&h).unwrap();
        assert_eq!(e.degeneracy, 2);
        assert!((e.ground_state.amplitudes[0] - ONE).norm() < 1e-12);
    }
}
