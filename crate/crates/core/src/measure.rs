//! Grouping of reduced-Hamiltonian terms into measurement circuits, and
//! energy reconstruction from the measured distributions.
//!
//! An off-diagonal term `h_mm' (|m><m'| + |m'><m|)` is measured by a
//! circuit `R` with `R|m> = (|m> + |m'>)/sqrt2` and
//! `R|m'> = (|m> - |m'>)/sqrt2`. Then
//! `<psi_R|m><m|psi_R> - <psi_R|m'><m'|psi_R> = 2 Re <psi|m><m'|psi>` for
//! `psi_R = R^dagger psi`. Terms whose states differ on the same qubits
//! (the active set) share one circuit.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::mapping::ReducedHamiltonian;
use crate::sim::{self, ProbabilityTable, StateVector, UNITARY_QUBIT_LIMIT};

/// Name of the circuit measuring the diagonal terms.
pub const DIAGONAL_NAME: &str = "diag";
/// Probability tables must sum to one within this tolerance.
pub const TABLE_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    /// The control targets every other active qubit.
    #[default]
    Star,
    /// CNOTs along a tree rooted at the control; a path outward from the
    /// control when no coupling graph is given.
    Chain,
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "star" => Ok(Topology::Star),
            "chain" => Ok(Topology::Chain),
            other => Err(Error::invalid(format!("unknown topology '{other}'"))),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Star => "star",
            Topology::Chain => "chain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlRule {
    #[default]
    Lowest,
    Highest,
    /// Active qubit with the most active neighbours in the coupling graph.
    MaxNeighbors,
}

impl FromStr for ControlRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" => Ok(ControlRule::Lowest),
            "highest" => Ok(ControlRule::Highest),
            "max-neighbors" => Ok(ControlRule::MaxNeighbors),
            other => Err(Error::invalid(format!("unknown control rule '{other}'"))),
        }
    }
}

/// Undirected qubit connectivity.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CouplingGraph {
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

impl CouplingGraph {
    pub fn new(edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop on qubit {a}")));
            }
            adjacency.entry(a).or_default().insert(b);
            adjacency.entry(b).or_default().insert(a);
        }
        Ok(CouplingGraph { adjacency })
    }

    /// All-to-all connectivity on `n` qubits.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::new(edges).unwrap_or_default()
    }

    /// Edge list, one `q1 q2` pair per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [a, b] = parts.as_slice() else {
                return Err(Error::parse(idx + 1, "expected 'q1 q2'"));
            };
            let a = a
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad qubit '{a}'")))?;
            let b = b
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad qubit '{b}'")))?;
            edges.push((a, b));
        }
        Self::new(edges)
    }

    pub fn neighbors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&q).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(&a).is_some_and(|s| s.contains(&b))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlanOptions {
    pub topology: Topology,
    pub control: ControlRule,
    pub coupling: Option<CouplingGraph>,
}

/// An off-diagonal term stored once; `primed` has the control bit set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermPair {
    pub plain: usize,
    pub primed: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    /// Bitmask of the active set, `m XOR m'` for every pair.
    pub key: u64,
    pub control: usize,
    pub pairs: Vec<TermPair>,
    pub circuit: Circuit,
}

impl MeasurementGroup {
    pub fn active(&self) -> Vec<usize> {
        bits(self.key)
    }

    /// `g<hex key>`, also the stem of the exported circuit file.
    pub fn name(&self) -> String {
        format!("g{:x}", self.key)
    }
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|&q| mask >> q & 1 == 1).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub n_qubits: usize,
    pub dim: usize,
    pub topology: Topology,
    pub diagonal: Vec<(usize, f64)>,
    /// Ascending by key.
    pub groups: Vec<MeasurementGroup>,
}

impl MeasurementPlan {
    pub fn diagonal_circuit(&self) -> Circuit {
        Circuit::new(self.n_qubits)
    }

    /// `(name, circuit)` for every circuit, diagonal first.
    pub fn circuits(&self) -> Vec<(String, Circuit)> {
        let mut out = vec![(DIAGONAL_NAME.to_string(), self.diagonal_circuit())];
        out.extend(self.groups.iter().map(|g| (g.name(), g.circuit.clone())));
        out
    }

    pub fn n_circuits(&self) -> usize {
        1 + self.groups.len()
    }

    /// Manifest text: a header, then one line per group,
    /// `group <hex> control=<q> pairs=<m:m',...>` with `m` the plain state.
    pub fn manifest(&self) -> String {
        let mut out = format!(
            "plan qubits={} dim={} topology={} circuits={}\n",
            self.n_qubits,
            self.dim,
            self.topology,
            self.n_circuits()
        );
        let _ = writeln!(out, "diag terms={}", self.diagonal.len());
        for g in &self.groups {
            let pairs: Vec<String> = g
                .pairs
                .iter()
                .map(|p| format!("{}:{}", p.plain, p.primed))
                .collect();
            let _ = writeln!(
                out,
                "group {:x} control={} pairs={}",
                g.key,
                g.control,
                pairs.join(",")
            );
        }
        out
    }

    /// Rebuilds a plan from its manifest, the Hamiltonian it was built from
    /// and the group circuits (looked up by group name).
    pub fn from_manifest(
        manifest: &str,
        h: &ReducedHamiltonian,
        mut circuit_for: impl FnMut(&str) -> Result<Circuit>,
    ) -> Result<Self> {
        let mut header: Option<(usize, usize, Topology)> = None;
        let mut groups = Vec::new();
        let mut listed: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (idx, raw) in manifest.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("plan") => {
                    let kv = key_values(tokens, line_no)?;
                    let get = |k: &str| {
                        kv.get(k)
                            .ok_or_else(|| Error::parse(line_no, format!("missing {k}=")))
                    };
                    let q = get("qubits")?
                        .parse()
                        .map_err(|_| Error::parse(line_no, "bad qubits"))?;
                    let m = get("dim")?
                        .parse()
                        .map_err(|_| Error::parse(line_no, "bad dim"))?;
                    let t = get("topology")?
                        .parse()
                        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
                    header = Some((q, m, t));
                }
                Some("diag") => {}
                Some("group") => {
                    let hex = tokens
                        .next()
                        .ok_or_else(|| Error::parse(line_no, "missing group key"))?;
                    let key = u64::from_str_radix(hex, 16)
                        .map_err(|_| Error::parse(line_no, format!("bad key '{hex}'")))?;
                    let kv = key_values(tokens, line_no)?;
                    let control: usize = kv
                        .get("control")
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| Error::parse(line_no, "bad or missing control="))?;
                    if key >> control & 1 != 1 {
                        return Err(Error::parse(line_no, "control is not an active qubit"));
                    }
                    let mut pairs = Vec::new();
                    for item in kv.get("pairs").map(|s| s.split(',')).into_iter().flatten() {
                        let (a, b) = item
                            .split_once(':')
                            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                            .ok_or_else(|| Error::parse(line_no, format!("bad pair '{item}'")))?;
                        let (a, b): (usize, usize) = (a, b);
                        if (a ^ b) as u64 != key || a >> control & 1 != 0 {
                            return Err(Error::parse(
                                line_no,
                                format!("pair {a}:{b} does not match group {hex}"),
                            ));
                        }
                        let coefficient = h.get(a, b);
                        if coefficient == 0.0 {
                            return Err(Error::parse(
                                line_no,
                                format!("pair {a}:{b} has no Hamiltonian entry"),
                            ));
                        }
                        listed.insert((a.min(b), a.max(b)));
                        pairs.push(TermPair {
                            plain: a,
                            primed: b,
                            coefficient,
                        });
                    }
                    let name = format!("g{key:x}");
                    groups.push(MeasurementGroup {
                        key,
                        control,
                        pairs,
                        circuit: circuit_for(&name)?,
                    });
                }
                Some(other) => {
                    return Err(Error::parse(line_no, format!("unknown record '{other}'")))
                }
                None => {}
            }
        }
        let (n_qubits, dim, topology) =
            header.ok_or_else(|| Error::parse(0, "manifest has no plan header"))?;
        if n_qubits != h.n_qubits() || dim != h.dim() {
            return Err(Error::invalid("manifest and Hamiltonian sizes differ"));
        }
        let expected: BTreeSet<(usize, usize)> =
            h.off_diagonal().iter().map(|&(m, mp, _)| (m, mp)).collect();
        if expected != listed {
            return Err(Error::invalid(
                "manifest pairs do not cover the Hamiltonian's off-diagonal terms",
            ));
        }
        groups.sort_by_key(|g| g.key);
        for g in &groups {
            if g.circuit.n_qubits() != n_qubits {
                return Err(Error::invalid(format!(
                    "circuit {} has the wrong width",
                    g.name()
                )));
            }
        }
        Ok(MeasurementPlan {
            n_qubits,
            dim,
            topology,
            diagonal: h.diagonal(),
            groups,
        })
    }
}

fn key_values<'a>(
    tokens: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<BTreeMap<&'a str, &'a str>> {
    tokens
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected key=value, got '{t}'")))
        })
        .collect()
}

/// Groups the off-diagonal terms by active set and builds one `R` circuit
/// per group.
pub fn build_plan(h: &ReducedHamiltonian, options: &PlanOptions) -> Result<MeasurementPlan> {
    let q = h.n_qubits();
    let mut by_key: BTreeMap<u64, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for (m, mp, v) in h.off_diagonal() {
        by_key.entry((m ^ mp) as u64).or_default().push((m, mp, v));
    }
    let mut groups = Vec::with_capacity(by_key.len());
    for (key, terms) in by_key {
        let active = bits(key);
        let control = choose_control(&active, options);
        let mut pairs: Vec<TermPair> = terms
            .into_iter()
            .map(|(m, mp, v)| {
                let (plain, primed) = if m >> control & 1 == 0 {
                    (m, mp)
                } else {
                    (mp, m)
                };
                TermPair {
                    plain,
                    primed,
                    coefficient: v,
                }
            })
            .collect();
        pairs.sort_by_key(|p| (p.plain, p.primed));
        let circuit = r_circuit(q, &active, control, options)?;
        groups.push(MeasurementGroup {
            key,
            control,
            pairs,
            circuit,
        });
    }
    Ok(MeasurementPlan {
        n_qubits: q,
        dim: h.dim(),
        topology: options.topology,
        diagonal: h.diagonal(),
        groups,
    })
}

fn choose_control(active: &[usize], options: &PlanOptions) -> usize {
    match (options.control, &options.coupling) {
        (ControlRule::Highest, _) => *active.last().unwrap_or(&0),
        (ControlRule::MaxNeighbors, Some(g)) => {
            let degree = |q: usize| g.neighbors(q).filter(|n| active.contains(n)).count();
            // first maximum, so ties go to the lowest index
            active
                .iter()
                .copied()
                .fold(None, |best: Option<(usize, usize)>, q| match best {
                    Some((_, d)) if d >= degree(q) => best,
                    _ => Some((q, degree(q))),
                })
                .map_or(active[0], |b| b.0)
        }
        _ => active[0],
    }
}

/// CNOT edges `(parent, child)` of the fan-out tree, parents first.
fn fanout_edges(
    active: &[usize],
    control: usize,
    options: &PlanOptions,
) -> Result<Vec<(usize, usize)>> {
    match options.topology {
        Topology::Star => Ok(active
            .iter()
            .filter(|&&t| t != control)
            .map(|&t| (control, t))
            .collect()),
        Topology::Chain => match &options.coupling {
            None => {
                let mut edges = Vec::new();
                let mut prev = control;
                for &t in active.iter().filter(|&&t| t > control) {
                    edges.push((prev, t));
                    prev = t;
                }
                prev = control;
                for &t in active.iter().rev().filter(|&&t| t < control) {
                    edges.push((prev, t));
                    prev = t;
                }
                Ok(edges)
            }
            Some(graph) => {
                let mut seen = BTreeSet::from([control]);
                let mut queue = VecDeque::from([control]);
                let mut edges = Vec::new();
                while let Some(u) = queue.pop_front() {
                    for v in graph.neighbors(u) {
                        if active.contains(&v) && seen.insert(v) {
                            edges.push((u, v));
                            queue.push_back(v);
                        }
                    }
                }
                if seen.len() != active.len() {
                    return Err(Error::Disconnected {
                        control,
                        active: active.to_vec(),
                    });
                }
                Ok(edges)
            }
        },
    }
}

/// `R = T H_c T^-1`, with `T` the fan-out tree: inverse tree, Hadamard on
/// the control, then the tree.
pub fn r_circuit(
    n_qubits: usize,
    active: &[usize],
    control: usize,
    options: &PlanOptions,
) -> Result<Circuit> {
    if !active.contains(&control) {
        return Err(Error::invalid(format!("control {control} is not active")));
    }
    let edges = fanout_edges(active, control, options)?;
    let mut c = Circuit::new(n_qubits);
    for &(a, b) in edges.iter().rev() {
        c.push(Gate::Cnot {
            control: a,
            target: b,
        })?;
    }
    c.push(Gate::H(control))?;
    for &(a, b) in &edges {
        c.push(Gate::Cnot {
            control: a,
            target: b,
        })?;
    }
    Ok(c)
}

/// Largest deviation of the group's circuit from
/// `R|m> = (|m> + |m'>)/sqrt2`, `R|m'> = (|m> - |m'>)/sqrt2` over its pairs.
pub fn verify_r_properties(group: &MeasurementGroup) -> Result<f64> {
    let n = group.circuit.n_qubits();
    if n > UNITARY_QUBIT_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: 1 << n.min(62),
            limit: 1 << UNITARY_QUBIT_LIMIT,
        });
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut worst: f64 = 0.0;
    for p in &group.pairs {
        for (input, sign) in [(p.plain, 1.0), (p.primed, -1.0)] {
            let out = sim::run(&group.circuit, input)?;
            for (i, a) in out.amplitudes().iter().enumerate() {
                let expect = if i == p.plain {
                    r
                } else if i == p.primed {
                    sign * r
                } else {
                    0.0
                };
                worst = worst.max((a - Complex64::new(expect, 0.0)).norm());
            }
        }
    }
    Ok(worst)
}

/// Probability tables keyed by circuit name.
pub type PlanTables = BTreeMap<String, ProbabilityTable>;

fn table<'a>(tables: &'a PlanTables, name: &str, len: usize) -> Result<&'a [f64]> {
    let t = tables
        .get(name)
        .ok_or_else(|| Error::MissingTable(name.to_string()))?;
    if t.probs.len() != len {
        return Err(Error::TableLength {
            name: name.to_string(),
            got: t.probs.len(),
            expected: len,
        });
    }
    let sum: f64 = t.probs.iter().sum();
    if (sum - 1.0).abs() > TABLE_SUM_TOL {
        return Err(Error::invalid(format!("table {name} sums to {sum}")));
    }
    Ok(&t.probs)
}

/// `sum_m h_mm p_m + sum_groups sum_pairs h_mm' (p_m - p_m')`, each from
/// its own circuit's table.
pub fn reconstruct_expectation(plan: &MeasurementPlan, tables: &PlanTables) -> Result<f64> {
    let len = 1usize << plan.n_qubits;
    let diag = table(tables, DIAGONAL_NAME, len)?;
    let mut energy: f64 = plan.diagonal.iter().map(|&(m, h)| h * diag[m]).sum();
    for g in &plan.groups {
        let p = table(tables, &g.name(), len)?;
        energy += g
            .pairs
            .iter()
            .map(|t| t.coefficient * (p[t.plain] - p[t.primed]))
            .sum::<f64>();
    }
    Ok(energy)
}

/// Probability the diagonal circuit assigns to computational states that
/// encode no valid state.
pub fn leaked_probability(plan: &MeasurementPlan, tables: &PlanTables) -> Result<f64> {
    let diag = table(tables, DIAGONAL_NAME, 1 << plan.n_qubits)?;
    Ok(diag[plan.dim..].iter().sum())
}

/// Runs every circuit of the plan on `state` and tabulates the outcomes.
/// Sampled tables use seed `seed + k` for the `k`-th circuit.
pub fn measure_state(
    plan: &MeasurementPlan,
    state: &StateVector,
    shots: Option<u64>,
    seed: u64,
) -> Result<PlanTables> {
    let mut out = BTreeMap::new();
    for (k, (name, circuit)) in plan.circuits().into_iter().enumerate() {
        let rotated = sim::run_from(&circuit, state.clone())?;
        let t = sim::probabilities(&rotated, shots, seed.wrapping_add(k as u64))?;
        out.insert(name, t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountBounds {
    /// Circuits in the plan, the diagonal one included.
    pub n_circuits: usize,
    /// `2^Q`.
    pub max_circuits: u128,
    /// `4^Q - 1`, the Pauli-string count of a dense Q-qubit operator.
    pub max_pauli: u128,
}

pub fn count_bounds(plan: &MeasurementPlan) -> CountBounds {
    let q = plan.n_qubits as u32;
    let b = CountBounds {
        n_circuits: plan.n_circuits(),
        max_circuits: 1u128 << q,
        max_pauli: (1u128 << (2 * q)) - 1,
    };
    assert!(b.n_circuits as u128 <= b.max_circuits);
    b
}
