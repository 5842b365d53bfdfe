//! Fermionic operators over a finite Fock space.
//!
//! Occupation-number states are stored as integers: bit `i` is the
//! occupation of spin-orbital `i`. Printed kets put orbital 0 in the
//! rightmost position, so `|0011>` has orbitals 0 and 1 occupied.
//! Ladder operators carry the Jordan-Wigner parity: acting on orbital `i`
//! picks up `(-1)^k` where `k` counts occupied orbitals with index below `i`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hermiticity tolerance applied when an operator is loaded.
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Above this many orbitals the Hermiticity check samples columns.
const FULL_HERMITICITY_CHECK_MAX_ORBITALS: usize = 16;
const SAMPLED_HERMITICITY_COLUMNS: usize = 4096;

const PAULI_DROP_TOL: f64 = 1e-12;
const PAULI_IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LadderKind {
    Create,
    Annihilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LadderOp {
    pub orbital: usize,
    pub kind: LadderKind,
}

impl LadderOp {
    pub fn create(orbital: usize) -> Self {
        LadderOp {
            orbital,
            kind: LadderKind::Create,
        }
    }

    pub fn annihilate(orbital: usize) -> Self {
        LadderOp {
            orbital,
            kind: LadderKind::Annihilate,
        }
    }

    pub fn dagger(self) -> Self {
        let kind = match self.kind {
            LadderKind::Create => LadderKind::Annihilate,
            LadderKind::Annihilate => LadderKind::Create,
        };
        LadderOp { kind, ..self }
    }

    /// Acts on an occupation bitmask, returning the new mask and the parity sign.
    #[inline]
    pub fn apply(self, occupation: u64) -> Option<(u64, f64)> {
        let bit = 1u64 << self.orbital;
        let occupied = occupation & bit != 0;
        match (self.kind, occupied) {
            (LadderKind::Create, true) | (LadderKind::Annihilate, false) => None,
            _ => {
                let below = (occupation & (bit - 1)).count_ones();
                let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
                Some((occupation ^ bit, sign))
            }
        }
    }
}

impl fmt::Display for LadderOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LadderKind::Create => write!(f, "{}^", self.orbital),
            LadderKind::Annihilate => write!(f, "{}", self.orbital),
        }
    }
}

/// A coefficient times an ordered product of ladder operators.
///
/// Operators are written left to right and applied to kets right to left;
/// an empty product is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coefficient: f64,
    pub ops: Vec<LadderOp>,
}

impl FermionTerm {
    pub fn new(coefficient: f64, ops: Vec<LadderOp>) -> Self {
        FermionTerm { coefficient, ops }
    }

    pub fn identity(coefficient: f64) -> Self {
        FermionTerm {
            coefficient,
            ops: Vec::new(),
        }
    }

    /// Applies the operator string (without the coefficient) to a basis state.
    pub fn apply(&self, occupation: u64) -> Option<(u64, f64)> {
        let mut state = occupation;
        let mut sign = 1.0;
        for op in self.ops.iter().rev() {
            let (next, s) = op.apply(state)?;
            state = next;
            sign *= s;
        }
        Some((state, sign))
    }

    pub fn dagger(&self) -> FermionTerm {
        FermionTerm {
            coefficient: self.coefficient,
            ops: self.ops.iter().rev().map(|op| op.dagger()).collect(),
        }
    }

    fn max_orbital(&self) -> Option<usize> {
        self.ops.iter().map(|op| op.orbital).max()
    }
}

impl fmt::Display for FermionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [", self.coefficient)?;
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{op}")?;
        }
        write!(f, "]")
    }
}

/// An occupation-number basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    pub occupation: u64,
    pub n_orbitals: usize,
}

impl FockState {
    pub fn new(occupation: u64, n_orbitals: usize) -> Self {
        debug_assert!(n_orbitals >= 64 || occupation < (1u64 << n_orbitals));
        FockState {
            occupation,
            n_orbitals,
        }
    }

    pub fn is_occupied(&self, orbital: usize) -> bool {
        self.occupation >> orbital & 1 == 1
    }

    pub fn electron_count(&self) -> u32 {
        self.occupation.count_ones()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", bitstring(self.occupation, self.n_orbitals))
    }
}

/// Renders `value` as `width` binary digits with bit 0 rightmost.
pub fn bitstring(value: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if value >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a bitstring written with bit 0 rightmost.
pub fn parse_bitstring(text: &str) -> Result<u64> {
    let text = text.trim();
    if text.is_empty() || text.len() > 64 {
        return Err(Error::invalid(format!("bad bitstring '{text}'")));
    }
    let mut value = 0u64;
    for ch in text.chars() {
        value <<= 1;
        match ch {
            '0' => {}
            '1' => value |= 1,
            _ => return Err(Error::invalid(format!("bad bitstring '{text}'"))),
        }
    }
    Ok(value)
}

/// Applies a single term to a basis state. Returns `None` when the term
/// annihilates the state (Pauli exclusion or an empty orbital).
pub fn apply_term(term: &FermionTerm, state: FockState) -> Option<(FockState, i32)> {
    term.apply(state.occupation).map(|(occ, sign)| {
        (
            FockState::new(occ, state.n_orbitals),
            if sign > 0.0 { 1 } else { -1 },
        )
    })
}

/// A real-coefficient sum of ladder-operator strings.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionOperator {
    terms: Vec<FermionTerm>,
    n_orbitals: usize,
}

impl FermionOperator {
    /// Builds an operator, inferring the orbital count from the largest index.
    pub fn from_terms(terms: Vec<FermionTerm>) -> Result<Self> {
        let n_orbitals = terms
            .iter()
            .filter_map(FermionTerm::max_orbital)
            .max()
            .map_or(0, |m| m + 1);
        Self::with_orbitals(terms, n_orbitals)
    }

    pub fn with_orbitals(terms: Vec<FermionTerm>, n_orbitals: usize) -> Result<Self> {
        if n_orbitals > 63 {
            return Err(Error::invalid(format!(
                "{n_orbitals} orbitals exceed the 63-orbital bitmask limit"
            )));
        }
        for term in &terms {
            if !term.coefficient.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient in {term}")));
            }
            if let Some(max) = term.max_orbital() {
                if max >= n_orbitals {
                    return Err(Error::invalid(format!(
                        "orbital {max} out of range for {n_orbitals} orbitals"
                    )));
                }
            }
        }
        Ok(FermionOperator { terms, n_orbitals })
    }

    pub fn terms(&self) -> &[FermionTerm] {
        &self.terms
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn fock_dim(&self) -> u64 {
        1u64 << self.n_orbitals
    }

    /// Column `H|ket>` as a sparse vector ordered by basis index.
    pub fn apply(&self, ket: u64) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for term in &self.terms {
            if let Some((bra, sign)) = term.apply(ket) {
                *out.entry(bra).or_insert(0.0) += term.coefficient * sign;
            }
        }
        out
    }

    pub fn dagger(&self) -> FermionOperator {
        FermionOperator {
            terms: self.terms.iter().map(FermionTerm::dagger).collect(),
            n_orbitals: self.n_orbitals,
        }
    }

    /// Largest entry of `H - H^dagger`, checked column by column.
    ///
    /// Every column is checked up to 16 orbitals; beyond that a fixed-seed
    /// sample of columns is used.
    pub fn hermiticity_residual(&self) -> f64 {
        let adjoint = self.dagger();
        let column_residual = |ket: u64| -> f64 {
            let a = self.apply(ket);
            let b = adjoint.apply(ket);
            let mut worst: f64 = 0.0;
            for (k, v) in &a {
                worst = worst.max((v - b.get(k).copied().unwrap_or(0.0)).abs());
            }
            for (k, v) in &b {
                if !a.contains_key(k) {
                    worst = worst.max(v.abs());
                }
            }
            worst
        };
        if self.n_orbitals <= FULL_HERMITICITY_CHECK_MAX_ORBITALS {
            (0..self.fock_dim())
                .map(column_residual)
                .fold(0.0, f64::max)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let dim = self.fock_dim();
            (0..SAMPLED_HERMITICITY_COLUMNS)
                .map(|_| column_residual(rng.random_range(0..dim)))
                .fold(0.0, f64::max)
        }
    }

    pub fn validate_hermitian(&self) -> Result<()> {
        let residual = self.hermiticity_residual();
        if residual > HERMITICITY_TOL {
            return Err(Error::NonHermitian { residual });
        }
        Ok(())
    }
}

/// Parses the line-based Hamiltonian format:
///
/// ```text
/// # comment
/// 0.70557 []
/// -1.24728 [0^ 0]
/// ```
pub fn parse_fermion_operator(text: &str) -> Result<FermionOperator> {
    let mut terms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let open = line
            .find('[')
            .ok_or_else(|| Error::parse(line_no, "expected '[' after coefficient"))?;
        let close = line
            .rfind(']')
            .ok_or_else(|| Error::parse(line_no, "missing closing ']'"))?;
        if close < open {
            return Err(Error::parse(line_no, "mismatched brackets"));
        }
        let trailing = line[close + 1..].trim();
        if !trailing.is_empty() && !trailing.starts_with('#') {
            return Err(Error::parse(
                line_no,
                format!("unexpected text '{trailing}'"),
            ));
        }
        let coeff_text = line[..open].trim();
        let coefficient = parse_coefficient(coeff_text).map_err(|m| Error::parse(line_no, m))?;
        let mut ops = Vec::new();
        for token in line[open + 1..close].split_whitespace() {
            let (index_text, kind) = match token.strip_suffix('^') {
                Some(rest) => (rest, LadderKind::Create),
                None => (token, LadderKind::Annihilate),
            };
            let index: i64 = index_text
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad operator '{token}'")))?;
            if index < 0 {
                return Err(Error::parse(
                    line_no,
                    format!("negative orbital index {index}"),
                ));
            }
            ops.push(LadderOp {
                orbital: index as usize,
                kind,
            });
        }
        terms.push(FermionTerm::new(coefficient, ops));
    }
    if terms.is_empty() {
        return Err(Error::parse(0, "no terms"));
    }
    let op = FermionOperator::from_terms(terms)?;
    op.validate_hermitian()?;
    Ok(op)
}

fn parse_coefficient(text: &str) -> std::result::Result<f64, String> {
    if text.is_empty() {
        return Err("missing coefficient".into());
    }
    if text.contains(['j', 'J', 'i', 'I']) && !text.eq_ignore_ascii_case("inf") {
        return Err(format!("complex coefficient '{text}' is not supported"));
    }
    let value: f64 = text
        .parse()
        .map_err(|_| format!("bad coefficient '{text}'"))?;
    if !value.is_finite() {
        return Err(format!("non-finite coefficient '{text}'"));
    }
    Ok(value)
}

/// `<bra|H|ket>` in the occupation-number basis.
pub fn matrix_element(op: &FermionOperator, bra: FockState, ket: FockState) -> f64 {
    op.terms
        .iter()
        .filter_map(|t| match t.apply(ket.occupation) {
            Some((state, sign)) if state == bra.occupation => Some(t.coefficient * sign),
            _ => None,
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// A real-weighted tensor product of single-qubit Paulis. The identity
/// string has no factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub factors: BTreeMap<usize, Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn label(&self) -> String {
        if self.factors.is_empty() {
            return "I".into();
        }
        self.factors
            .iter()
            .map(|(q, p)| format!("{p}{q}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.coefficient, self.label())
    }
}

/// Pauli string as bitmasks: `(x, z)` bit `q` alone means X or Z on qubit
/// `q`, both bits mean Y (the Hermitian Y, no implicit phase).
type Symplectic = (u64, u64);

/// Multiplies two Pauli strings, returning the resulting string and phase.
fn pauli_mul(a: Symplectic, b: Symplectic) -> (Symplectic, Complex64) {
    // Per-qubit phase table for sigma_a * sigma_b.
    let mut phase_power = 0u32; // power of i
    let mut bits = a.0 | a.1 | b.0 | b.1;
    while bits != 0 {
        let q = bits.trailing_zeros();
        bits &= bits - 1;
        let pa = (a.0 >> q & 1, a.1 >> q & 1);
        let pb = (b.0 >> q & 1, b.1 >> q & 1);
        // 1 = X, 2 = Y, 3 = Z
        let code = |p: (u64, u64)| match p {
            (1, 0) => 1,
            (1, 1) => 2,
            (0, 1) => 3,
            _ => 0,
        };
        let (ca, cb) = (code(pa), code(pb));
        if ca != 0 && cb != 0 && ca != cb {
            // XY = iZ, YZ = iX, ZX = iY; reversed order gives -i.
            if (ca % 3) + 1 == cb {
                phase_power += 1;
            } else {
                phase_power += 3;
            }
        }
    }
    let phase = match phase_power % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    ((a.0 ^ b.0, a.1 ^ b.1), phase)
}

/// Jordan-Wigner expansion of a single ladder operator as two Pauli strings.
fn ladder_to_paulis(op: LadderOp) -> [(Symplectic, Complex64); 2] {
    let bit = 1u64 << op.orbital;
    let parity = bit - 1;
    let x = ((bit, parity), Complex64::new(0.5, 0.0));
    let y_sign = match op.kind {
        LadderKind::Create => -0.5,
        LadderKind::Annihilate => 0.5,
    };
    let y = ((bit, parity | bit), Complex64::new(0.0, y_sign));
    [x, y]
}

/// Expands the operator into Pauli strings, combining like terms.
///
/// Strings with |coefficient| below 1e-12 are dropped. A surviving imaginary
/// part above 1e-10 indicates a non-Hermitian input and is an error.
pub fn jordan_wigner(op: &FermionOperator) -> Result<Vec<PauliString>> {
    let mut acc: BTreeMap<Symplectic, Complex64> = BTreeMap::new();
    for term in &op.terms {
        let mut partial: BTreeMap<Symplectic, Complex64> = BTreeMap::new();
        partial.insert((0, 0), Complex64::new(term.coefficient, 0.0));
        for &ladder in &term.ops {
            let mut next: BTreeMap<Symplectic, Complex64> = BTreeMap::new();
            for (&lhs, &c) in &partial {
                for (rhs, w) in ladder_to_paulis(ladder) {
                    let (prod, phase) = pauli_mul(lhs, rhs);
                    *next.entry(prod).or_default() += c * w * phase;
                }
            }
            partial = next;
        }
        for (k, v) in partial {
            *acc.entry(k).or_default() += v;
        }
    }

    let mut out = Vec::new();
    for ((x, z), c) in acc {
        if c.norm() < PAULI_DROP_TOL {
            continue;
        }
        let mut factors = BTreeMap::new();
        let mut bits = x | z;
        while bits != 0 {
            let q = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let p = match (x >> q & 1, z >> q & 1) {
                (1, 0) => Pauli::X,
                (1, 1) => Pauli::Y,
                _ => Pauli::Z,
            };
            factors.insert(q, p);
        }
        let value = c;
        let string = PauliString {
            factors,
            coefficient: value.re,
        };
        if value.im.abs() > PAULI_IMAG_TOL {
            return Err(Error::ImaginaryResidue {
                string: string.label(),
                imag: value.im,
            });
        }
        if value.re.abs() < PAULI_DROP_TOL {
            continue;
        }
        out.push(string);
    }
    out.sort_by(|a, b| {
        a.factors
            .len()
            .cmp(&b.factors.len())
            .then_with(|| a.factors.iter().cmp(b.factors.iter()))
    });
    Ok(out)
}
