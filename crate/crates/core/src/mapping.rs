//! The map D from the valid subspace onto computational basis states, and
//! the Hamiltonian it induces on the qubit register.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constraint::{SubspaceBasis, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::fermion::FermionOperator;
use crate::linalg::SparseVector;
use crate::numfmt::sig12;

/// Reduced matrix elements below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-10;
/// Largest tolerated `|h_mm' - h_m'm|`.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Largest tolerated distance of a mapped state from the valid subspace.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// A state over the Fock basis, keyed by occupation bitmask.
pub type FockVector = BTreeMap<u64, Complex64>;

/// `max(1, ceil(log2 m))`.
pub fn qubits_for_dim(m: u128) -> usize {
    if m <= 2 {
        return 1;
    }
    (128 - (m - 1).leading_zeros()) as usize
}

/// Basis of the valid subspace with its assignment to computational states.
///
/// The assignment is the identity: the `m`-th basis vector maps to the
/// computational state whose integer value is `m`.
#[derive(Debug, Clone)]
pub struct SubspaceMap {
    basis: SubspaceBasis,
    n_qubits: usize,
}

pub fn build_map(basis: SubspaceBasis) -> SubspaceMap {
    let n_qubits = qubits_for_dim(basis.dim() as u128);
    SubspaceMap { basis, n_qubits }
}

impl SubspaceMap {
    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_orbitals(&self) -> usize {
        self.basis.n_orbitals()
    }

    pub fn assignment(&self, m: usize) -> usize {
        m
    }

    /// Inverse of the assignment; `None` for unused computational states.
    pub fn preimage(&self, computational: usize) -> Option<&SparseVector> {
        self.basis.vectors().get(computational)
    }

    /// Subspace file text: `<m*> : <amp> <fock> [; <amp> <fock> ...]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (m, v) in self.basis.vectors().iter().enumerate() {
            let parts: Vec<String> = v
                .iter()
                .map(|&(s, a)| format!("{} {}", sig12(a), s))
                .collect();
            let _ = writeln!(out, "{} : {}", self.assignment(m), parts.join(" ; "));
        }
        out
    }

    pub fn from_text(text: &str, n_orbitals: usize) -> Result<SubspaceMap> {
        let mut rows: Vec<(usize, SparseVector)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, body) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, "expected '<m*> : <amp> <fock> ...'"))?;
            let m: usize = head
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index '{}'", head.trim())))?;
            let mut v = SparseVector::new();
            for part in body.split(';') {
                let mut it = part.split_whitespace();
                let (Some(a), Some(s), None) = (it.next(), it.next(), it.next()) else {
                    return Err(Error::parse(
                        line_no,
                        format!("bad entry '{}'", part.trim()),
                    ));
                };
                let a: f64 = a
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad amplitude '{a}'")))?;
                let s: u64 = s
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad Fock index '{s}'")))?;
                v.push((s, a));
            }
            rows.push((m, v));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::invalid("subspace indices must be 0..M without gaps"));
        }
        let vectors: Vec<SparseVector> = rows.into_iter().map(|r| r.1).collect();
        let basis = SubspaceBasis::new(vectors.clone(), n_orbitals)?;
        if basis.vectors() != vectors.as_slice() {
            return Err(Error::invalid(
                "subspace vectors are not in canonical order",
            ));
        }
        Ok(build_map(basis))
    }
}

/// The Hamiltonian on the qubit register, `h_mm' |m*><m'*|`.
///
/// Only the upper triangle `m <= m'` is stored; the lower triangle is
/// implied by symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedHamiltonian {
    n_qubits: usize,
    dim: usize,
    upper: BTreeMap<(usize, usize), f64>,
}

impl ReducedHamiltonian {
    /// Builds from entries in any orientation. Both orientations of a pair
    /// may be given but must agree.
    pub fn new(
        n_qubits: usize,
        dim: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 62 {
            return Err(Error::invalid(format!("bad qubit count {n_qubits}")));
        }
        if dim == 0 || (dim as u128) > 1u128 << n_qubits {
            return Err(Error::invalid(format!(
                "dimension {dim} does not fit on {n_qubits} qubits"
            )));
        }
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        for (m, mp, v) in entries {
            if m >= dim || mp >= dim {
                return Err(Error::invalid(format!(
                    "entry ({m}, {mp}) outside dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({m}, {mp})")));
            }
            *seen.entry((m, mp)).or_insert(0.0) += v;
        }
        let mut upper = BTreeMap::new();
        let mut worst: f64 = 0.0;
        for (&(m, mp), &v) in &seen {
            if m > mp {
                if !seen.contains_key(&(mp, m)) {
                    upper.insert((mp, m), v);
                }
                continue;
            }
            let value = if m == mp {
                v
            } else if let Some(&w) = seen.get(&(mp, m)) {
                worst = worst.max((v - w).abs());
                0.5 * (v + w)
            } else {
                v
            };
            upper.insert((m, mp), value);
        }
        if worst > SYMMETRY_TOL {
            return Err(Error::Asymmetric { residual: worst });
        }
        upper.retain(|_, v| v.abs() >= PRUNE_TOL);
        Ok(ReducedHamiltonian {
            n_qubits,
            dim,
            upper,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, m: usize, mp: usize) -> f64 {
        let key = if m <= mp { (m, mp) } else { (mp, m) };
        self.upper.get(&key).copied().unwrap_or(0.0)
    }

    /// Stored entries `(m, m', h)` with `m <= m'`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper.iter().map(|(&(m, mp), &v)| (m, mp, v))
    }

    /// Every nonzero entry in both orientations, row-major.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut all: Vec<(usize, usize, f64)> = self
            .upper_entries()
            .flat_map(|(m, mp, v)| {
                if m == mp {
                    vec![(m, mp, v)]
                } else {
                    vec![(m, mp, v), (mp, m, v)]
                }
            })
            .collect();
        all.sort_by_key(|&(m, mp, _)| (m, mp));
        all
    }

    pub fn diagonal(&self) -> Vec<(usize, f64)> {
        self.upper_entries()
            .filter(|(m, mp, _)| m == mp)
            .map(|(m, _, v)| (m, v))
            .collect()
    }

    /// Off-diagonal pairs with `m < m'`.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, f64)> {
        self.upper_entries().filter(|(m, mp, _)| m != mp).collect()
    }

    /// Number of distinct terms `|m*><m'*|` counting each unordered pair once.
    pub fn term_count(&self) -> usize {
        self.upper.len()
    }

    /// Dense `dim x dim` matrix.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.dim > DENSE_LIMIT {
            return Err(Error::DimensionTooLarge {
                dim: self.dim,
                limit: DENSE_LIMIT,
            });
        }
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for (m, mp, v) in self.upper_entries() {
            h[(m, mp)] = v;
            h[(mp, m)] = v;
        }
        Ok(h)
    }

    /// `<psi|H|psi>` for a register state of length `2^Q`.
    pub fn expectation(&self, amplitudes: &[Complex64]) -> f64 {
        let mut e = 0.0;
        for (m, mp, v) in self.upper_entries() {
            let (a, b) = (amplitudes[m], amplitudes[mp]);
            if m == mp {
                e += v * a.norm_sqr();
            } else {
                e += 2.0 * v * (a.conj() * b).re;
            }
        }
        e
    }

    /// Reduced-Hamiltonian file: `qubits <Q> dim <M>` then `<m> <m'> <value>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {} dim {}\n", self.n_qubits, self.dim);
        for (m, mp, v) in self.upper_entries() {
            let _ = writeln!(out, "{m} {mp} {}", sig12(v));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if header.is_none() {
                match tokens.as_slice() {
                    ["qubits", q, "dim", m] => {
                        let q = q
                            .parse()
                            .map_err(|_| Error::parse(line_no, format!("bad qubit count '{q}'")))?;
                        let m = m
                            .parse()
                            .map_err(|_| Error::parse(line_no, format!("bad dimension '{m}'")))?;
                        header = Some((q, m));
                        continue;
                    }
                    _ => {
                        return Err(Error::parse(
                            line_no,
                            "expected header 'qubits <Q> dim <M>'",
                        ))
                    }
                }
            }
            let [m, mp, v] = tokens.as_slice() else {
                return Err(Error::parse(line_no, "expected '<m> <m'> <value>'"));
            };
            let m: usize = m
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index '{m}'")))?;
            let mp: usize = mp
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index '{mp}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad value '{v}'")))?;
            if m > mp {
                return Err(Error::parse(line_no, "entries must have m <= m'"));
            }
            entries.push((m, mp, v));
        }
        let (q, m) = header.ok_or_else(|| Error::parse(0, "missing header"))?;
        Self::new(q, m, entries)
    }
}

/// `h_mm' = <m|H|m'>` over the mapped basis.
pub fn reduce_hamiltonian(op: &FermionOperator, map: &SubspaceMap) -> Result<ReducedHamiltonian> {
    if op.n_orbitals() > map.n_orbitals() {
        return Err(Error::invalid(format!(
            "operator acts on {} orbitals, subspace on {}",
            op.n_orbitals(),
            map.n_orbitals()
        )));
    }
    let vectors = map.basis().vectors();
    let mut owners: HashMap<u64, Vec<(usize, f64)>> = HashMap::new();
    for (m, v) in vectors.iter().enumerate() {
        for &(s, a) in v {
            owners.entry(s).or_default().push((m, a));
        }
    }
    let mut full: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (mp, v) in vectors.iter().enumerate() {
        let mut hv: BTreeMap<u64, f64> = BTreeMap::new();
        for &(ket, amp) in v {
            for (bra, val) in op.apply(ket) {
                *hv.entry(bra).or_insert(0.0) += amp * val;
            }
        }
        for (bra, val) in hv {
            if let Some(list) = owners.get(&bra) {
                for &(m, a) in list {
                    *full.entry((m, mp)).or_insert(0.0) += a * val;
                }
            }
        }
    }
    ReducedHamiltonian::new(
        map.n_qubits(),
        map.dim(),
        full.into_iter().map(|((m, mp), v)| (m, mp, v)),
    )
}

/// A state on the qubit register, `|psi_H> = D|psi_N>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedState {
    pub amplitudes: Vec<Complex64>,
    pub n_qubits: usize,
}

impl MappedState {
    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Applies D. Fails if the input is not inside the valid subspace.
pub fn map_state(state: &FockVector, map: &SubspaceMap) -> Result<MappedState> {
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << map.n_qubits()];
    let mut projected: FockVector = BTreeMap::new();
    for (m, v) in map.basis().vectors().iter().enumerate() {
        let alpha: Complex64 = v
            .iter()
            .map(|&(s, a)| a * state.get(&s).copied().unwrap_or_default())
            .sum();
        amplitudes[map.assignment(m)] = alpha;
        for &(s, a) in v {
            *projected.entry(s).or_default() += alpha * a;
        }
    }
    let mut residual_sq = 0.0;
    for (s, &c) in state {
        residual_sq += (c - projected.get(s).copied().unwrap_or_default()).norm_sqr();
    }
    for (s, &p) in &projected {
        if !state.contains_key(s) {
            residual_sq += p.norm_sqr();
        }
    }
    let residual = residual_sq.sqrt();
    if residual > SUBSPACE_TOL {
        return Err(Error::OutsideSubspace { residual });
    }
    Ok(MappedState {
        amplitudes,
        n_qubits: map.n_qubits(),
    })
}

/// Applies D^dagger: `sum_m alpha_m |m>`. Amplitude on unused computational
/// states is discarded.
pub fn unmap_state(mapped: &MappedState, map: &SubspaceMap) -> FockVector {
    let mut out: FockVector = BTreeMap::new();
    for (m, v) in map.basis().vectors().iter().enumerate() {
        let alpha = mapped.amplitudes[map.assignment(m)];
        if alpha == Complex64::default() {
            continue;
        }
        for &(s, a) in v {
            *out.entry(s).or_default() += alpha * a;
        }
    }
    out
}

/// Max-norm residuals of the two projector identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorResidual {
    /// `|D D^dagger - I_H|`, with `I_H` the identity on the used states.
    pub d_d_dagger: f64,
    /// `|D^dagger D - P_N|`.
    pub d_dagger_d: f64,
}

impl ProjectorResidual {
    pub fn max(&self) -> f64 {
        self.d_d_dagger.max(self.d_dagger_d)
    }
}

/// Dense check of `D D^dagger = I_H` and `D^dagger D = P_N`.
pub fn projector_check(map: &SubspaceMap) -> Result<ProjectorResidual> {
    let fock = 1usize
        .checked_shl(map.n_orbitals() as u32)
        .filter(|&d| d <= DENSE_LIMIT)
        .ok_or(Error::DimensionTooLarge {
            dim: 1usize << map.n_orbitals().min(62),
            limit: DENSE_LIMIT,
        })?;
    let reg = 1usize << map.n_qubits();
    let mut d = DMatrix::zeros(reg, fock);
    for (m, v) in map.basis().vectors().iter().enumerate() {
        for &(s, a) in v {
            d[(map.assignment(m), s as usize)] = a;
        }
    }
    let ddt = &d * d.transpose();
    let identity_h = DMatrix::from_fn(
        reg,
        reg,
        |r, c| {
            if r == c && r < map.dim() {
                1.0
            } else {
                0.0
            }
        },
    );
    let dtd = d.transpose() * &d;
    let mut p = DMatrix::zeros(fock, fock);
    for v in map.basis().vectors() {
        for &(s, a) in v {
            for &(t, b) in v {
                p[(s as usize, t as usize)] += a * b;
            }
        }
    }
    Ok(ProjectorResidual {
        d_d_dagger: (ddt - identity_h).abs().max(),
        d_dagger_d: (dtd - p).abs().max(),
    })
}
