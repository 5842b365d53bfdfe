//! Small dense linear-algebra helpers shared by the subspace and eigen code.

use nalgebra::{DMatrix, SymmetricEigen};

/// Amplitudes below this magnitude are treated as structural zeros.
pub const AMPLITUDE_EPS: f64 = 1e-12;

/// A real vector over the Fock basis, sorted by basis index.
pub type SparseVector = Vec<(u64, f64)>;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Replaces the orthonormal columns of `span` with a basis that depends only
/// on the subspace they span.
///
/// Rows are visited in order; each row's unit vector is projected onto the
/// subspace and orthogonalized against the vectors already accepted. The
/// first nonzero entry of every output column is positive.
pub fn canonical_basis(span: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, rank) = span.shape();
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for row in 0..rows {
        if coeffs.len() == rank {
            break;
        }
        let mut c: Vec<f64> = (0..rank).map(|k| span[(row, k)]).collect();
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for prev in &coeffs {
                let dot: f64 = prev.iter().zip(&c).map(|(a, b)| a * b).sum();
                for (ci, pi) in c.iter_mut().zip(prev) {
                    *ci -= dot * pi;
                }
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            c.iter_mut().for_each(|x| *x /= norm);
            coeffs.push(c);
        }
    }
    let mut out = DMatrix::zeros(rows, coeffs.len());
    for (col, c) in coeffs.iter().enumerate() {
        for row in 0..rows {
            out[(row, col)] = (0..rank).map(|k| span[(row, k)] * c[k]).sum();
        }
        fix_sign(&mut out, col);
    }
    out
}

fn fix_sign(m: &mut DMatrix<f64>, col: usize) {
    let first = (0..m.nrows()).find(|&r| m[(r, col)].abs() > AMPLITUDE_EPS);
    if let Some(r) = first {
        if m[(r, col)] < 0.0 {
            for row in 0..m.nrows() {
                m[(row, col)] = -m[(row, col)];
            }
        }
    }
}

/// Makes the first nonzero amplitude of a sparse vector positive.
pub fn normalize_sign(v: &mut SparseVector) {
    if let Some(&(_, a)) = v.iter().find(|(_, a)| a.abs() > AMPLITUDE_EPS) {
        if a < 0.0 {
            v.iter_mut().for_each(|(_, x)| *x = -*x);
        }
    }
}

/// Sort key for basis vectors: index of the largest-magnitude amplitude,
/// then of the second largest. Magnitude ties go to the lower index.
pub fn ordering_key(v: &SparseVector) -> (u64, u64) {
    let mut ranked: Vec<(u64, f64)> = v.iter().map(|&(i, a)| (i, a.abs())).collect();
    ranked.sort_by(|a, b| {
        if (a.1 - b.1).abs() <= 1e-9 {
            a.0.cmp(&b.0)
        } else {
            b.1.total_cmp(&a.1)
        }
    });
    let first = ranked.first().map_or(0, |x| x.0);
    let second = ranked.get(1).map_or(0, |x| x.0);
    (first, second)
}
