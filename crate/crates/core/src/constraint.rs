//! Constraint observables and the valid subspace they carve out of Fock space.
//!
//! A constraint pairs an observable with the eigenvalues a valid state may
//! have. The valid subspace is the intersection over constraints of the
//! span of allowed eigenvectors. Number and S_z constraints are diagonal in
//! the occupation basis and act as bitstring filters; S^2 is diagonalized
//! only inside the sector that survives the filters.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fermion::{FermionOperator, FermionTerm, LadderOp};
use crate::linalg::{canonical_basis, ordering_key, symmetric_eigen, SparseVector, AMPLITUDE_EPS};

/// Absolute tolerance for matching an eigenvalue against an allowed value.
pub const EIGENVALUE_TOL: f64 = 1e-8;
/// Residual bound `|(C - lambda) v|` every returned vector must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-7;
/// Largest subspace dimension diagonalized densely.
pub const DENSE_LIMIT: usize = 4096;
/// Largest Fock space enumerated for bitstring filtering.
const MAX_FILTER_ORBITALS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    TotalNumber,
    NumberUp,
    NumberDown,
    Sz,
    SSquared,
}

impl ConstraintKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::TotalNumber => "total_number",
            ConstraintKind::NumberUp => "number_up",
            ConstraintKind::NumberDown => "number_down",
            ConstraintKind::Sz => "sz",
            ConstraintKind::SSquared => "s_squared",
        }
    }

    /// Diagonal in the occupation-number basis.
    pub fn is_diagonal(self) -> bool {
        !matches!(self, ConstraintKind::SSquared)
    }

    pub fn is_spin_resolved(self) -> bool {
        !matches!(self, ConstraintKind::TotalNumber)
    }

    fn is_number(self) -> bool {
        matches!(
            self,
            ConstraintKind::TotalNumber | ConstraintKind::NumberUp | ConstraintKind::NumberDown
        )
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "total_number" => ConstraintKind::TotalNumber,
            "number_up" => ConstraintKind::NumberUp,
            "number_down" => ConstraintKind::NumberDown,
            "sz" => ConstraintKind::Sz,
            "s_squared" => ConstraintKind::SSquared,
            other => return Err(Error::invalid(format!("unknown constraint kind '{other}'"))),
        })
    }
}

/// An observable together with its list of allowed eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub allowed: Vec<f64>,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind, allowed: Vec<f64>) -> Result<Self> {
        if allowed.is_empty() {
            return Err(Error::invalid(format!("{kind}: no allowed values")));
        }
        for &v in &allowed {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{kind}: non-finite allowed value")));
            }
            if kind.is_number() && (v < 0.0 || v.fract() != 0.0) {
                return Err(Error::invalid(format!(
                    "{kind}: allowed value {v} is not a non-negative integer"
                )));
            }
        }
        Ok(ConstraintSpec { kind, allowed })
    }

    pub fn single(kind: ConstraintKind, value: f64) -> Result<Self> {
        Self::new(kind, vec![value])
    }

    fn accepts(&self, eigenvalue: f64) -> bool {
        self.allowed
            .iter()
            .any(|&a| (a - eigenvalue).abs() <= EIGENVALUE_TOL)
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.allowed.iter().map(|v| v.to_string()).collect();
        write!(f, "{} allowed={}", self.kind, values.join(","))
    }
}

/// A constraint observable as a fermionic operator on `n_orbitals`.
#[derive(Debug, Clone)]
pub struct ConstraintOperator {
    kind: ConstraintKind,
    operator: FermionOperator,
}

impl ConstraintOperator {
    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn operator(&self) -> &FermionOperator {
        &self.operator
    }

    pub fn n_orbitals(&self) -> usize {
        self.operator.n_orbitals()
    }

    pub fn apply(&self, ket: u64) -> BTreeMap<u64, f64> {
        self.operator.apply(ket)
    }

    /// Eigenvalue on a basis state, for the diagonal kinds.
    pub fn diagonal_value(&self, occupation: u64) -> Option<f64> {
        diagonal_value(self.kind, occupation)
    }
}

const EVEN_BITS: u64 = 0x5555_5555_5555_5555;
const ODD_BITS: u64 = 0xAAAA_AAAA_AAAA_AAAA;

fn diagonal_value(kind: ConstraintKind, occupation: u64) -> Option<f64> {
    let up = (occupation & EVEN_BITS).count_ones() as f64;
    let down = (occupation & ODD_BITS).count_ones() as f64;
    match kind {
        ConstraintKind::TotalNumber => Some(up + down),
        ConstraintKind::NumberUp => Some(up),
        ConstraintKind::NumberDown => Some(down),
        ConstraintKind::Sz => Some(0.5 * (up - down)),
        ConstraintKind::SSquared => None,
    }
}

fn number(i: usize, weight: f64) -> FermionTerm {
    FermionTerm::new(weight, vec![LadderOp::create(i), LadderOp::annihilate(i)])
}

/// Builds the observable for a constraint kind.
///
/// Even orbitals are spin up and odd orbitals spin down; spatial orbital `p`
/// pairs orbitals `2p` and `2p + 1`. S^2 is assembled as
/// `S- S+ + Sz (Sz + 1)` with `S+ = sum_p a+_{2p} a_{2p+1}`.
pub fn build_constraint_operator(
    spec: &ConstraintSpec,
    n_orbitals: usize,
) -> Result<ConstraintOperator> {
    let kind = spec.kind;
    if kind.is_spin_resolved() && !n_orbitals.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "{kind} needs an even number of spin orbitals, got {n_orbitals}"
        )));
    }
    let spin = |i: usize| if i.is_multiple_of(2) { 0.5 } else { -0.5 };
    let mut terms = Vec::new();
    match kind {
        ConstraintKind::TotalNumber => terms.extend((0..n_orbitals).map(|i| number(i, 1.0))),
        ConstraintKind::NumberUp => {
            terms.extend((0..n_orbitals).step_by(2).map(|i| number(i, 1.0)))
        }
        ConstraintKind::NumberDown => {
            terms.extend((1..n_orbitals).step_by(2).map(|i| number(i, 1.0)))
        }
        ConstraintKind::Sz => terms.extend((0..n_orbitals).map(|i| number(i, spin(i)))),
        ConstraintKind::SSquared => {
            let n_spatial = n_orbitals / 2;
            // S- S+
            for p in 0..n_spatial {
                for q in 0..n_spatial {
                    terms.push(FermionTerm::new(
                        1.0,
                        vec![
                            LadderOp::create(2 * p + 1),
                            LadderOp::annihilate(2 * p),
                            LadderOp::create(2 * q),
                            LadderOp::annihilate(2 * q + 1),
                        ],
                    ));
                }
            }
            // Sz^2
            for i in 0..n_orbitals {
                for j in 0..n_orbitals {
                    terms.push(FermionTerm::new(
                        spin(i) * spin(j),
                        vec![
                            LadderOp::create(i),
                            LadderOp::annihilate(i),
                            LadderOp::create(j),
                            LadderOp::annihilate(j),
                        ],
                    ));
                }
            }
            // Sz
            terms.extend((0..n_orbitals).map(|i| number(i, spin(i))));
        }
    }
    Ok(ConstraintOperator {
        kind,
        operator: FermionOperator::with_orbitals(terms, n_orbitals)?,
    })
}

/// An orthonormal basis of a subspace of Fock space.
///
/// Vectors are sparse over occupation-number states and kept in a
/// deterministic order: by the index of the largest-magnitude amplitude,
/// then the second largest. The first nonzero amplitude of every vector is
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    vectors: Vec<SparseVector>,
    n_orbitals: usize,
}

impl SubspaceBasis {
    /// Wraps already-orthonormal vectors, sorting entries and vectors.
    pub fn new(mut vectors: Vec<SparseVector>, n_orbitals: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptySubspace("no basis vectors".into()));
        }
        for v in &mut vectors {
            v.retain(|&(_, a)| a.abs() > AMPLITUDE_EPS);
            v.sort_by_key(|&(i, _)| i);
            if v.iter()
                .any(|&(i, _)| n_orbitals < 64 && i >> n_orbitals != 0)
            {
                return Err(Error::invalid("basis vector outside the Fock space"));
            }
        }
        vectors.sort_by_key(ordering_key);
        Ok(SubspaceBasis {
            vectors,
            n_orbitals,
        })
    }

    /// Basis of unit vectors on the given occupation states.
    pub fn from_states(mut states: Vec<u64>, n_orbitals: usize) -> Result<Self> {
        states.sort_unstable();
        states.dedup();
        Self::new(
            states.into_iter().map(|s| vec![(s, 1.0)]).collect(),
            n_orbitals,
        )
    }

    pub fn full(n_orbitals: usize) -> Result<Self> {
        if n_orbitals > MAX_FILTER_ORBITALS {
            return Err(Error::DimensionTooLarge {
                dim: 1 << n_orbitals.min(62),
                limit: 1 << MAX_FILTER_ORBITALS,
            });
        }
        Self::from_states((0..1u64 << n_orbitals).collect(), n_orbitals)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    /// True when every vector is a single occupation state.
    pub fn is_bitstring_basis(&self) -> bool {
        self.vectors.iter().all(|v| v.len() == 1)
    }

    /// Union of the supports, ascending.
    pub fn support(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.vectors.iter().flatten().map(|&(i, _)| i).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// `max |G - I|` for the Gram matrix of the basis.
    pub fn gram_residual(&self) -> f64 {
        let dense: Vec<HashMap<u64, f64>> = self
            .vectors
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect();
        let mut worst: f64 = 0.0;
        for (i, vi) in self.vectors.iter().enumerate() {
            for (j, dj) in dense.iter().enumerate().skip(i) {
                let dot: f64 = vi
                    .iter()
                    .map(|(k, a)| a * dj.get(k).copied().unwrap_or(0.0))
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Dense projector onto the subspace (Fock dimension capped at 4096).
    pub fn projector(&self) -> Result<DMatrix<f64>> {
        let dim = 1usize << self.n_orbitals;
        if dim > DENSE_LIMIT {
            return Err(Error::DimensionTooLarge {
                dim,
                limit: DENSE_LIMIT,
            });
        }
        let mut p = DMatrix::zeros(dim, dim);
        for v in &self.vectors {
            for &(i, a) in v {
                for &(j, b) in v {
                    p[(i as usize, j as usize)] += a * b;
                }
            }
        }
        Ok(p)
    }
}

/// Largest residual `|(C - lambda) v|` over the basis, with `lambda` the
/// nearest allowed value to `<v|C|v>`.
pub fn constraint_residual(op: &ConstraintOperator, allowed: &[f64], basis: &SubspaceBasis) -> f64 {
    let mut worst: f64 = 0.0;
    for v in basis.vectors() {
        let cv = apply_sparse(op, v);
        let input: HashMap<u64, f64> = v.iter().copied().collect();
        let expectation: f64 = v
            .iter()
            .map(|(k, a)| a * cv.get(k).copied().unwrap_or(0.0))
            .sum();
        let lambda = allowed
            .iter()
            .copied()
            .min_by(|a, b| (a - expectation).abs().total_cmp(&(b - expectation).abs()))
            .unwrap_or(expectation);
        let mut sq = 0.0;
        for (k, c) in &cv {
            let r = c - lambda * input.get(k).copied().unwrap_or(0.0);
            sq += r * r;
        }
        for (k, a) in &input {
            if !cv.contains_key(k) {
                sq += (lambda * a) * (lambda * a);
            }
        }
        worst = worst.max(sq.sqrt());
    }
    worst
}

fn apply_sparse(op: &ConstraintOperator, v: &SparseVector) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    for &(ket, amp) in v {
        for (bra, val) in op.apply(ket) {
            *out.entry(bra).or_insert(0.0) += amp * val;
        }
    }
    out
}

/// Orthonormal basis of the allowed-eigenvalue eigenspaces of `op`,
/// restricted to `within` (or to the whole Fock space).
///
/// This is the generic eigensolver route; it works for any constraint kind.
/// The restricted space must be invariant under `op` (true for commuting
/// constraints); otherwise an `IncompatibleConstraint` error is returned.
pub fn null_space(
    op: &ConstraintOperator,
    allowed: &[f64],
    within: Option<&SubspaceBasis>,
) -> Result<SubspaceBasis> {
    if allowed.is_empty() {
        return Err(Error::invalid("no allowed eigenvalues"));
    }
    let n_orbitals = op.n_orbitals();
    let full;
    let within = match within {
        Some(b) => {
            if b.n_orbitals() != n_orbitals {
                return Err(Error::invalid(
                    "subspace and operator act on different Fock spaces",
                ));
            }
            b
        }
        None => {
            full = SubspaceBasis::full(n_orbitals)?;
            &full
        }
    };
    let k = within.dim();
    if k > DENSE_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: k,
            limit: DENSE_LIMIT,
        });
    }

    let support = within.support();
    let row_of: HashMap<u64, usize> = support.iter().enumerate().map(|(r, &s)| (s, r)).collect();
    let mut coords = DMatrix::zeros(support.len(), k);
    for (col, v) in within.vectors().iter().enumerate() {
        for &(s, a) in v {
            coords[(row_of[&s], col)] = a;
        }
    }

    // Restricted operator <v_i|C|v_j>.
    let mut restricted = DMatrix::zeros(k, k);
    for (j, vj) in within.vectors().iter().enumerate() {
        let cv = apply_sparse(op, vj);
        for (i, vi) in within.vectors().iter().enumerate() {
            restricted[(i, j)] = vi
                .iter()
                .map(|(s, a)| a * cv.get(s).copied().unwrap_or(0.0))
                .sum();
        }
    }
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let (values, vectors) = symmetric_eigen(restricted);

    // Group accepted eigenvectors by the allowed value they match so every
    // returned vector is an eigenvector.
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (col, &val) in values.iter().enumerate() {
        if let Some(which) = allowed
            .iter()
            .position(|&a| (a - val).abs() <= EIGENVALUE_TOL)
        {
            blocks.entry(which).or_default().push(col);
        }
    }
    if blocks.is_empty() {
        return Err(Error::EmptySubspace(format!(
            "{} has no eigenvalue in {:?}",
            op.kind(),
            allowed
        )));
    }

    let mut out = Vec::new();
    for cols in blocks.values() {
        let selected = DMatrix::from_fn(k, cols.len(), |r, c| vectors[(r, cols[c])]);
        let fock_coords = &coords * selected;
        let canon = canonical_basis(&fock_coords);
        for c in 0..canon.ncols() {
            let v: SparseVector = (0..support.len())
                .filter(|&r| canon[(r, c)].abs() > AMPLITUDE_EPS)
                .map(|r| (support[r], canon[(r, c)]))
                .collect();
            out.push(v);
        }
    }
    let basis = SubspaceBasis::new(out, n_orbitals)?;
    let residual = constraint_residual(op, allowed, &basis);
    if residual > RESIDUAL_TOL {
        return Err(Error::IncompatibleConstraint {
            kind: op.kind().to_string(),
            residual,
        });
    }
    Ok(basis)
}

/// Intersection of all constraint subspaces.
///
/// Diagonal constraints are applied first as bitstring filters; S^2 is then
/// diagonalized inside the filtered sector. An empty list yields the whole
/// Fock space.
pub fn intersect_constraints(specs: &[ConstraintSpec], n_orbitals: usize) -> Result<SubspaceBasis> {
    if n_orbitals > 64 {
        return Err(Error::invalid(format!(
            "{n_orbitals} orbitals exceed the 64-bit occupation mask"
        )));
    }
    for spec in specs {
        if spec.kind.is_spin_resolved() && !n_orbitals.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "{} needs an even number of spin orbitals, got {n_orbitals}",
                spec.kind
            )));
        }
    }
    let (diagonal, general): (Vec<&ConstraintSpec>, Vec<&ConstraintSpec>) =
        specs.iter().partition(|s| s.kind.is_diagonal());

    let states: Vec<u64> = candidate_states(&diagonal, n_orbitals)?
        .into_iter()
        .filter(|&s| {
            diagonal
                .iter()
                .all(|spec| spec.accepts(diagonal_value(spec.kind, s).unwrap_or(f64::NAN)))
        })
        .collect();
    if states.is_empty() {
        return Err(Error::EmptySubspace(format!(
            "no occupation state satisfies {}",
            describe(&diagonal)
        )));
    }
    let mut basis = SubspaceBasis::from_states(states, n_orbitals)?;
    for spec in general {
        let op = build_constraint_operator(spec, n_orbitals)?;
        basis = null_space(&op, &spec.allowed, Some(&basis)).map_err(|e| match e {
            Error::EmptySubspace(_) => {
                Error::EmptySubspace(format!("{} leaves no state in the running subspace", spec))
            }
            other => other,
        })?;
    }
    Ok(basis)
}

/// Occupation states to filter: fixed-count combinations when electron
/// counts are pinned, otherwise the whole Fock space.
fn candidate_states(diagonal: &[&ConstraintSpec], n_orbitals: usize) -> Result<Vec<u64>> {
    let counts = |kind: ConstraintKind, max: usize| -> Option<Vec<usize>> {
        let spec = diagonal.iter().find(|s| s.kind == kind)?;
        let mut v: Vec<usize> = spec
            .allowed
            .iter()
            .filter(|a| a.fract() == 0.0 && **a >= 0.0 && **a <= max as f64)
            .map(|&a| a as usize)
            .collect();
        v.sort_unstable();
        v.dedup();
        Some(v)
    };
    let too_large = |dim: u128| Error::DimensionTooLarge {
        dim: dim.min(usize::MAX as u128) as usize,
        limit: 1 << MAX_FILTER_ORBITALS,
    };
    let spatial = n_orbitals / 2;
    if n_orbitals.is_multiple_of(2) {
        if let (Some(ups), Some(downs)) = (
            counts(ConstraintKind::NumberUp, spatial),
            counts(ConstraintKind::NumberDown, spatial),
        ) {
            let dim: u128 = ups
                .iter()
                .flat_map(|&u| {
                    downs
                        .iter()
                        .map(move |&d| sector_dimension(spatial as u64, u as u64, d as u64))
                })
                .sum();
            if dim > 1 << MAX_FILTER_ORBITALS {
                return Err(too_large(dim));
            }
            let mut states = Vec::with_capacity(dim as usize);
            for &u in &ups {
                let up_states: Vec<u64> = combinations(spatial, u).map(|c| spread(c, 0)).collect();
                for &d in &downs {
                    for down in combinations(spatial, d).map(|c| spread(c, 1)) {
                        states.extend(up_states.iter().map(|&up| up | down));
                    }
                }
            }
            return Ok(states);
        }
    }
    if let Some(totals) = counts(ConstraintKind::TotalNumber, n_orbitals) {
        let dim: u128 = totals
            .iter()
            .map(|&k| binomial(n_orbitals as u64, k as u64))
            .sum();
        if dim > 1 << MAX_FILTER_ORBITALS {
            return Err(too_large(dim));
        }
        return Ok(totals
            .iter()
            .flat_map(|&k| combinations(n_orbitals, k))
            .collect());
    }
    if n_orbitals > MAX_FILTER_ORBITALS {
        return Err(too_large(1u128 << n_orbitals));
    }
    Ok((0..1u64 << n_orbitals).collect())
}

/// `k`-subsets of `0..n` as bitmasks, ascending.
fn combinations(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let end = 1u128 << n;
    let mut next = if k <= n { Some((1u128 << k) - 1) } else { None };
    std::iter::from_fn(move || {
        let c = next?;
        next = if c == 0 {
            None
        } else {
            let low = c & c.wrapping_neg();
            let ripple = c + low;
            let n = ripple | (((c ^ ripple) >> 2) / low);
            (n < end).then_some(n)
        };
        Some(c as u64)
    })
}

/// Places spatial-orbital bit `j` on spin orbital `2j + parity`.
fn spread(spatial: u64, parity: u32) -> u64 {
    let mut out = 0;
    let mut rest = spatial;
    while rest != 0 {
        let j = rest.trailing_zeros();
        out |= 1 << (2 * j + parity);
        rest &= rest - 1;
    }
    out
}

fn describe(specs: &[&ConstraintSpec]) -> String {
    specs
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Dimension of the sector with fixed up/down electron counts.
pub fn sector_dimension(n_spatial: u64, n_up: u64, n_down: u64) -> u128 {
    binomial(n_spatial, n_up) * binomial(n_spatial, n_down)
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Parses a constraint file.
///
/// ```text
/// number_up allowed=1
/// sz allowed=0,0.5
/// neutral_electrons=2
/// multiplicity=1 sz=0
/// ```
///
/// `neutral_electrons=<n>` becomes a `total_number` constraint.
/// `multiplicity=<2S+1> [sz=<m>]` fixes the up/down electron counts using the
/// total electron count given elsewhere in the file; `sz` defaults to `S`.
pub fn parse_constraints(text: &str) -> Result<Vec<ConstraintSpec>> {
    let mut specs = Vec::new();
    let mut multiplicity: Option<(usize, f64, Option<f64>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        if let Some(value) = head.strip_prefix("neutral_electrons=") {
            let n = parse_number(value, line_no)?;
            specs.push(
                ConstraintSpec::single(ConstraintKind::TotalNumber, n)
                    .map_err(|e| Error::parse(line_no, e.to_string()))?,
            );
            continue;
        }
        if let Some(value) = head.strip_prefix("multiplicity=") {
            let mult = parse_number(value, line_no)?;
            if mult < 1.0 || mult.fract() != 0.0 {
                return Err(Error::parse(line_no, format!("bad multiplicity {mult}")));
            }
            let mut sz = None;
            for t in tokens {
                match t.strip_prefix("sz=") {
                    Some(v) => sz = Some(parse_number(v, line_no)?),
                    None => return Err(Error::parse(line_no, format!("unexpected '{t}'"))),
                }
            }
            multiplicity = Some((line_no, mult, sz));
            continue;
        }
        let kind: ConstraintKind = head
            .parse()
            .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
        let allowed_text = tokens
            .next()
            .and_then(|t| t.strip_prefix("allowed="))
            .ok_or_else(|| Error::parse(line_no, "expected allowed=<v1,v2,...>"))?;
        if let Some(extra) = tokens.next() {
            return Err(Error::parse(line_no, format!("unexpected '{extra}'")));
        }
        let allowed = allowed_text
            .split(',')
            .map(|v| parse_number(v, line_no))
            .collect::<Result<Vec<_>>>()?;
        specs.push(
            ConstraintSpec::new(kind, allowed).map_err(|e| Error::parse(line_no, e.to_string()))?,
        );
    }

    if let Some((line_no, mult, sz)) = multiplicity {
        let electrons = specs
            .iter()
            .find(|s| s.kind == ConstraintKind::TotalNumber && s.allowed.len() == 1)
            .map(|s| s.allowed[0])
            .ok_or_else(|| {
                Error::parse(
                    line_no,
                    "multiplicity needs a single-valued electron count (neutral_electrons=)",
                )
            })?;
        let spin = (mult - 1.0) / 2.0;
        let sz = sz.unwrap_or(spin);
        if sz.abs() > spin + 1e-12 || (2.0 * sz).fract() != 0.0 {
            return Err(Error::parse(
                line_no,
                format!("sz={sz} incompatible with S={spin}"),
            ));
        }
        let up = (electrons + 2.0 * sz) / 2.0;
        let down = (electrons - 2.0 * sz) / 2.0;
        if up < 0.0 || down < 0.0 || up.fract() != 0.0 || down.fract() != 0.0 {
            return Err(Error::parse(
                line_no,
                format!("{electrons} electrons cannot have sz={sz}"),
            ));
        }
        specs.push(ConstraintSpec::single(ConstraintKind::NumberUp, up)?);
        specs.push(ConstraintSpec::single(ConstraintKind::NumberDown, down)?);
    }
    Ok(specs)
}

fn parse_number(text: &str, line: usize) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("bad number '{text}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ConstraintKind, allowed: &[f64]) -> ConstraintSpec {
        ConstraintSpec::new(kind, allowed.to_vec()).unwrap()
    }

    #[test]
    fn total_number_popcount() {
        let op = build_constraint_operator(&spec(ConstraintKind::TotalNumber, &[2.0]), 4).unwrap();
        let col = op.apply(0b0011);
        assert_eq!(col.len(), 1);
        assert!((col[&0b0011] - 2.0).abs() < 1e-15);
        assert_eq!(op.diagonal_value(0b0011), Some(2.0));
    }

    #[test]
    fn sz_of_paired_state_is_zero() {
        let op = build_constraint_operator(&spec(ConstraintKind::Sz, &[0.0]), 4).unwrap();
        let col = op.apply(0b0011);
        assert!(col.values().all(|v| v.abs() < 1e-15));
        assert_eq!(op.diagonal_value(0b0011), Some(0.0));
        assert_eq!(op.diagonal_value(0b0101), Some(1.0));
    }

    #[test]
    fn s_squared_couples_open_shell_states() {
        let op = build_constraint_operator(&spec(ConstraintKind::SSquared, &[0.0]), 4).unwrap();
        let col = op.apply(0b0110);
        assert!(col.get(&0b1001).copied().unwrap_or(0.0).abs() > 0.5);
        assert!((col[&0b0110] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_kinds_need_even_orbitals() {
        assert!(build_constraint_operator(&spec(ConstraintKind::NumberUp, &[1.0]), 3).is_err());
        assert!(build_constraint_operator(&spec(ConstraintKind::TotalNumber, &[1.0]), 3).is_ok());
    }

    #[test]
    fn two_electron_sector_has_six_states() {
        let op = build_constraint_operator(&spec(ConstraintKind::TotalNumber, &[2.0]), 4).unwrap();
        let basis = null_space(&op, &[2.0], None).unwrap();
        assert_eq!(basis.dim(), 6);
        assert!(basis.is_bitstring_basis());
        let states: Vec<u64> = basis.vectors().iter().map(|v| v[0].0).collect();
        assert_eq!(states, vec![3, 5, 6, 9, 10, 12]);
    }

    #[test]
    fn too_many_electrons_is_empty() {
        let op = build_constraint_operator(&spec(ConstraintKind::TotalNumber, &[5.0]), 4).unwrap();
        assert!(matches!(
            null_space(&op, &[5.0], None),
            Err(Error::EmptySubspace(_))
        ));
        assert!(matches!(
            intersect_constraints(&[spec(ConstraintKind::TotalNumber, &[5.0])], 4),
            Err(Error::EmptySubspace(_))
        ));
    }

    #[test]
    fn per_sector_filter() {
        let basis = intersect_constraints(
            &[
                spec(ConstraintKind::NumberUp, &[1.0]),
                spec(ConstraintKind::NumberDown, &[1.0]),
            ],
            4,
        )
        .unwrap();
        let states: Vec<u64> = basis.vectors().iter().map(|v| v[0].0).collect();
        assert_eq!(states, vec![0b0011, 0b0110, 0b1001, 0b1100]);
    }

    #[test]
    fn no_constraints_is_full_space() {
        assert_eq!(intersect_constraints(&[], 4).unwrap().dim(), 16);
    }

    #[test]
    fn singlet_sector_has_three_states() {
        let basis = intersect_constraints(
            &[
                spec(ConstraintKind::TotalNumber, &[2.0]),
                spec(ConstraintKind::SSquared, &[0.0]),
            ],
            4,
        )
        .unwrap();
        assert_eq!(basis.dim(), 3);
        assert!(basis.gram_residual() < 1e-10);
        let v = &basis.vectors()[1];
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].0, v[1].0), (0b0110, 0b1001));
        assert!(v[0].1 > 0.0);
        assert_eq!(basis.vectors()[0], vec![(0b0011, 1.0)]);
        assert_eq!(basis.vectors()[2], vec![(0b1100, 1.0)]);
    }

    #[test]
    fn parses_constraint_file() {
        let specs = parse_constraints("# sector\nnumber_up allowed=1\nsz allowed=0,0.5\n").unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].allowed, vec![0.0, 0.5]);

        let specs = parse_constraints("multiplicity=3\nneutral_electrons=4\n").unwrap();
        let up = specs
            .iter()
            .find(|s| s.kind == ConstraintKind::NumberUp)
            .unwrap();
        let down = specs
            .iter()
            .find(|s| s.kind == ConstraintKind::NumberDown)
            .unwrap();
        assert_eq!((up.allowed[0], down.allowed[0]), (3.0, 1.0));

        assert!(parse_constraints("multiplicity=1 sz=0\n").is_err());
        assert!(parse_constraints("bogus allowed=1\n").is_err());
        assert!(parse_constraints("number_up allowed=-1\n").is_err());
        assert!(parse_constraints("neutral_electrons=2\nmultiplicity=1 sz=1\n").is_err());
    }

    #[test]
    fn published_sector_sizes() {
        // LiH, H2O, BeH2, CH4 in a minimal basis, neutral singlets.
        assert_eq!(sector_dimension(6, 2, 2), 225);
        assert_eq!(sector_dimension(7, 5, 5), 441);
        assert_eq!(sector_dimension(7, 3, 3), 1225);
        assert_eq!(sector_dimension(9, 5, 5), 15876);
    }

    #[test]
    fn combinations_enumerate_subsets() {
        let c: Vec<u64> = combinations(4, 2).collect();
        assert_eq!(c, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        assert_eq!(combinations(5, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(combinations(3, 4).count(), 0);
        assert_eq!(combinations(64, 1).count(), 64);
        assert_eq!(spread(0b101, 1), 0b100010);
    }
}
