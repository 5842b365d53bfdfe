//! Commands behind the `qsub` binary. Each command reads its inputs from
//! files, writes its outputs into a directory and returns a [`RunReport`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use qsub_core::circuit::{parse_qasm, Circuit};
use qsub_core::constraint::{intersect_constraints, parse_constraints, ConstraintSpec};
use qsub_core::fermion::{jordan_wigner, parse_fermion_operator, FermionOperator};
use qsub_core::mapping::{
    build_map, map_state, reduce_hamiltonian, FockVector, ReducedHamiltonian, SubspaceMap,
};
use qsub_core::measure::{
    build_plan, count_bounds, leaked_probability, measure_state, r_circuit,
    reconstruct_expectation, verify_r_properties, ControlRule, CouplingGraph, MeasurementPlan,
    PlanOptions, Topology,
};
use qsub_core::numfmt::sig12;
use qsub_core::sim::{self, StateVector};
use qsub_core::vqe::{self, AnsatzSpec, Entangler, Evaluator};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Residual above which circuit verification fails.
pub const VERIFY_TOL: f64 = 1e-9;

pub const SUBSPACE_FILE: &str = "subspace.txt";
pub const REDUCED_FILE: &str = "reduced.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const PLAN_HAMILTONIAN_FILE: &str = "hamiltonian.txt";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qsub_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        source: qsub_core::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qsub_core::Error as E;
        let core = match self {
            CliError::Core(e) | CliError::InFile { source: e, .. } => e,
            CliError::Tolerance(_) => return EXIT_NUMERICAL,
            _ => return EXIT_INPUT,
        };
        match core {
            E::EmptySubspace(_) => EXIT_INFEASIBLE,
            E::IncompatibleConstraint { .. } | E::Asymmetric { .. } | E::OutsideSubspace { .. } => {
                EXIT_NUMERICAL
            }
            _ => EXIT_INPUT,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file<T>(path: &Path, r: qsub_core::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::InFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_hamiltonian(path: &Path) -> CliResult<FermionOperator> {
    in_file(path, parse_fermion_operator(&read(path)?))
}

pub fn load_constraints(path: Option<&Path>) -> CliResult<Vec<ConstraintSpec>> {
    match path {
        Some(p) => in_file(p, parse_constraints(&read(p)?)),
        None => Ok(Vec::new()),
    }
}

pub fn load_reduced(path: &Path) -> CliResult<ReducedHamiltonian> {
    in_file(path, ReducedHamiltonian::from_text(&read(path)?))
}

pub fn load_circuit(path: &Path) -> CliResult<Circuit> {
    in_file(path, parse_qasm(&read(path)?))
}

/// Counts, timings and energies of one command run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<String>,
    pub m: Option<usize>,
    pub q_before: Option<usize>,
    pub q_after: Option<usize>,
    /// Non-identity Jordan-Wigner strings of the fermionic Hamiltonian.
    pub terms_before: Option<usize>,
    /// Distinct `|m*><m'*|` terms of the reduced Hamiltonian, pairs once.
    pub terms_after: Option<usize>,
    /// Circuits of the measurement plan, the diagonal one included.
    pub n_circuits: Option<usize>,
    pub max_circuits: Option<u128>,
    pub max_pauli: Option<u128>,
    pub energies: Vec<(String, f64)>,
    pub values: Vec<(String, String)>,
    pub timings_ms: Vec<(String, f64)>,
}

impl RunReport {
    fn new(command: &str, inputs: &[&Path]) -> Self {
        RunReport {
            command: command.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            ..Default::default()
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f();
        self.timings_ms
            .push((stage.into(), start.elapsed().as_secs_f64() * 1e3));
        out
    }

    pub fn energy(&self, name: &str) -> Option<f64> {
        self.energies.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn value(&self, name: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|e| e.0 == name)
            .map(|e| e.1.as_str())
    }

    /// One-line summary of the qubit and circuit counts.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        };
        push("Q_before", self.q_before.map(|v| v.to_string()));
        push("Q_after", self.q_after.map(|v| v.to_string()));
        push("terms", self.terms_before.map(|v| v.to_string()));
        push("circuits", self.n_circuits.map(|v| v.to_string()));
        parts.join(" ")
    }

    /// `key=value` lines; timings last.
    pub fn to_text(&self) -> String {
        let mut out = format!("command={}\n", self.command);
        for (i, p) in self.inputs.iter().enumerate() {
            out.push_str(&format!("input{i}={p}\n"));
        }
        let counts: [(&str, Option<String>); 8] = [
            ("M", self.m.map(|v| v.to_string())),
            ("Q_before", self.q_before.map(|v| v.to_string())),
            ("Q_after", self.q_after.map(|v| v.to_string())),
            ("terms_before", self.terms_before.map(|v| v.to_string())),
            ("terms_after", self.terms_after.map(|v| v.to_string())),
            ("n_circuits", self.n_circuits.map(|v| v.to_string())),
            ("max_circuits", self.max_circuits.map(|v| v.to_string())),
            ("max_pauli", self.max_pauli.map(|v| v.to_string())),
        ];
        for (k, v) in counts {
            if let Some(v) = v {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        if self.n_circuits.is_some() {
            out.push_str("note=n_circuits includes the diagonal circuit\n");
        }
        for (k, v) in &self.energies {
            out.push_str(&format!("energy_{k}={}\n", sig12(*v)));
        }
        for (k, v) in &self.values {
            out.push_str(&format!("{k}={v}\n"));
        }
        for (k, v) in &self.timings_ms {
            out.push_str(&format!("time_ms_{k}={}\n", sig(*v)));
        }
        out
    }
}

fn sig(x: f64) -> String {
    qsub_core::numfmt::sig(x, 4)
}

/// Non-identity Jordan-Wigner strings of a fermionic operator.
pub fn pauli_term_count(op: &FermionOperator) -> CliResult<usize> {
    Ok(jordan_wigner(op)?
        .iter()
        .filter(|s| !s.is_identity())
        .count())
}

/// Maps a fermionic Hamiltonian onto the constrained subspace.
pub fn cmd_map(hamiltonian: &Path, constraints: Option<&Path>, out: &Path) -> CliResult<RunReport> {
    let mut inputs = vec![hamiltonian];
    inputs.extend(constraints);
    let mut report = RunReport::new("map", &inputs);
    let op = report.time("parse", || load_hamiltonian(hamiltonian))?;
    let specs = load_constraints(constraints)?;
    let n = op.n_orbitals();
    let map = report.time("subspace", || Ok(intersect_constraints(&specs, n)?))?;
    let map = build_map(map);
    let h = report.time("reduce", || Ok(reduce_hamiltonian(&op, &map)?))?;
    let plan = report.time("plan", || Ok(build_plan(&h, &PlanOptions::default())?))?;
    report.terms_before = Some(report.time("jordan_wigner", || pauli_term_count(&op))?);

    let bounds = count_bounds(&plan);
    report.m = Some(map.dim());
    report.q_before = Some(n);
    report.q_after = Some(map.n_qubits());
    report.terms_after = Some(h.term_count());
    report.n_circuits = Some(bounds.n_circuits);
    report.max_circuits = Some(bounds.max_circuits);
    report.max_pauli = Some(bounds.max_pauli);

    ensure_dir(out)?;
    write(&out.join(SUBSPACE_FILE), &map.to_text())?;
    write(&out.join(REDUCED_FILE), &h.to_text())?;
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct GroupOptions {
    pub topology: Topology,
    pub control: Option<ControlRule>,
    pub coupling: Option<PathBuf>,
}

/// Builds the measurement plan of a reduced Hamiltonian and writes one
/// QASM file per circuit plus the manifest.
pub fn cmd_group(reduced: &Path, options: &GroupOptions, out: &Path) -> CliResult<RunReport> {
    let mut inputs = vec![reduced];
    inputs.extend(options.coupling.as_deref());
    let mut report = RunReport::new("group", &inputs);
    let h = load_reduced(reduced)?;
    let coupling = match &options.coupling {
        Some(p) => Some(in_file(p, CouplingGraph::parse(&read(p)?))?),
        None => None,
    };
    let control = options.control.unwrap_or(if coupling.is_some() {
        ControlRule::MaxNeighbors
    } else {
        ControlRule::Lowest
    });
    let plan_options = PlanOptions {
        topology: options.topology,
        control,
        coupling,
    };
    let plan = report.time("plan", || Ok(build_plan(&h, &plan_options)?))?;
    write_plan(&plan, &h, out)?;
    fill_counts(&mut report, &h, &plan);
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

fn fill_counts(report: &mut RunReport, h: &ReducedHamiltonian, plan: &MeasurementPlan) {
    let b = count_bounds(plan);
    report.m = Some(h.dim());
    report.q_after = Some(h.n_qubits());
    report.terms_after = Some(h.term_count());
    report.n_circuits = Some(b.n_circuits);
    report.max_circuits = Some(b.max_circuits);
    report.max_pauli = Some(b.max_pauli);
}

pub fn circuit_file(name: &str) -> String {
    format!("circ_{name}.qasm")
}

fn write_plan(plan: &MeasurementPlan, h: &ReducedHamiltonian, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    for (name, circuit) in plan.circuits() {
        write(&out.join(circuit_file(&name)), &circuit.to_qasm(true))?;
    }
    write(&out.join(MANIFEST_FILE), &plan.manifest())?;
    write(&out.join(PLAN_HAMILTONIAN_FILE), &h.to_text())
}

/// Reads a plan directory written by [`cmd_group`].
pub fn load_plan(dir: &Path) -> CliResult<(MeasurementPlan, ReducedHamiltonian)> {
    let h = load_reduced(&dir.join(PLAN_HAMILTONIAN_FILE))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = read(&manifest_path)?;
    let mut failure: Option<CliError> = None;
    let plan = MeasurementPlan::from_manifest(&manifest, &h, |name| {
        let path = dir.join(circuit_file(name));
        match load_circuit(&path) {
            Ok(c) => Ok(c),
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(qsub_core::Error::Invalid(msg))
            }
        }
    });
    match (plan, failure) {
        (Ok(p), _) => Ok((p, h)),
        (Err(_), Some(e)) => Err(e),
        (Err(e), None) => Err(CliError::InFile {
            path: manifest_path,
            source: e,
        }),
    }
}

#[derive(Debug, Clone, Default)]
pub struct MeasureOptions {
    pub shots: Option<u64>,
    pub seed: u64,
    /// Subspace file, needed when the preparation circuit acts on the
    /// fermionic register. Defaults to `subspace.txt` in the plan directory.
    pub subspace: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Prepares a state, runs every plan circuit on it and reconstructs the
/// energy. Writes `probs_<circuit>.csv` for each circuit.
pub fn cmd_measure(plan_dir: &Path, prep: &Path, options: &MeasureOptions) -> CliResult<RunReport> {
    let mut report = RunReport::new("measure", &[plan_dir, prep]);
    let (plan, h) = load_plan(plan_dir)?;
    let circuit = load_circuit(prep)?;
    let state = report.time("prepare", || {
        prepare_state(&circuit, &plan, plan_dir, options)
    })?;
    let tables = report.time("measure", || {
        Ok(measure_state(&plan, &state, options.shots, options.seed)?)
    })?;
    let energy = reconstruct_expectation(&plan, &tables)?;
    let leaked = leaked_probability(&plan, &tables)?;
    let exact = h.expectation(state.amplitudes());

    let out = options
        .out
        .clone()
        .unwrap_or_else(|| plan_dir.to_path_buf());
    ensure_dir(&out)?;
    for (name, table) in &tables {
        write(&out.join(format!("probs_{name}.csv")), &table.to_csv())?;
    }
    fill_counts(&mut report, &h, &plan);
    report.energies.push(("measured".into(), energy));
    report.energies.push(("statevector".into(), exact));
    report
        .values
        .push(("leaked_probability".into(), sig12(leaked)));
    report.values.push((
        "mode".into(),
        options.shots.map_or("exact".into(), |s| {
            format!("shots={s} seed={}", options.seed)
        }),
    ));
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

fn prepare_state(
    circuit: &Circuit,
    plan: &MeasurementPlan,
    plan_dir: &Path,
    options: &MeasureOptions,
) -> CliResult<StateVector> {
    if circuit.n_qubits() == plan.n_qubits {
        return Ok(sim::run(circuit, 0)?);
    }
    let path = options
        .subspace
        .clone()
        .unwrap_or_else(|| plan_dir.join(SUBSPACE_FILE));
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "preparation circuit has {} qubits but the plan has {}; pass --subspace to map a \
             fermionic-register state",
            circuit.n_qubits(),
            plan.n_qubits
        )));
    }
    let map = in_file(
        &path,
        SubspaceMap::from_text(&read(&path)?, circuit.n_qubits()),
    )?;
    if map.n_qubits() != plan.n_qubits || map.dim() != plan.dim {
        return Err(CliError::Usage(format!(
            "{} does not match the plan dimensions",
            path.display()
        )));
    }
    let fock = sim::run(circuit, 0)?;
    let v: FockVector = fock
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(i, a)| (i as u64, *a))
        .collect();
    let mapped = map_state(&v, &map)?;
    Ok(StateVector::from_amplitudes(mapped.amplitudes)?)
}

/// Input of the eigen and VQE commands: a reduced Hamiltonian file, or a
/// fermionic one mapped on the fly.
pub fn reduced_from(input: &Path, constraints: Option<&Path>) -> CliResult<ReducedHamiltonian> {
    let text = read(input)?;
    if text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("qubits"))
    {
        if constraints.is_some() {
            return Err(CliError::Usage(
                "constraints apply to fermionic Hamiltonians only".into(),
            ));
        }
        return in_file(input, ReducedHamiltonian::from_text(&text));
    }
    let op = in_file(input, parse_fermion_operator(&text))?;
    let specs = load_constraints(constraints)?;
    let map = build_map(intersect_constraints(&specs, op.n_orbitals())?);
    Ok(reduce_hamiltonian(&op, &map)?)
}

/// Ground energy and spectrum; writes `spectrum.csv`.
pub fn cmd_eig(input: &Path, constraints: Option<&Path>, out: &Path) -> CliResult<RunReport> {
    let mut inputs = vec![input];
    inputs.extend(constraints);
    let mut report = RunReport::new("eig", &inputs);
    let h = report.time("load", || reduced_from(input, constraints))?;
    let e = report.time("eigensolve", || Ok(sim::eigensolve(&h)?))?;
    report.m = Some(h.dim());
    report.q_after = Some(h.n_qubits());
    report.energies.push(("ground".into(), e.ground_energy));
    report
        .values
        .push(("degeneracy".into(), e.degeneracy.to_string()));
    ensure_dir(out)?;
    write(&out.join("spectrum.csv"), &e.spectrum_csv())?;
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

/// Last number in a file stem, e.g. `h2_sto3g_0.75` gives 0.75.
pub fn distance_from_name(path: &Path) -> Option<f64> {
    let stem = path.file_stem()?.to_str()?;
    stem.split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter_map(|t| t.trim_matches('.').parse::<f64>().ok())
        .next_back()
}

/// Ground energies of every `.ham` file in a directory; writes
/// `curve.csv` with `distance,energy` rows ordered by file name.
pub fn cmd_eig_batch(dir: &Path, constraints: Option<&Path>, out: &Path) -> CliResult<RunReport> {
    let mut inputs = vec![dir];
    inputs.extend(constraints);
    let mut report = RunReport::new("eig-batch", &inputs);
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ham"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no .ham files in {}",
            dir.display()
        )));
    }
    let rows: Vec<CliResult<(PathBuf, f64, f64)>> = report.time("eigensolve", || {
        Ok(files
            .par_iter()
            .map(|f| {
                let d = distance_from_name(f).ok_or_else(|| {
                    CliError::Usage(format!("no distance in file name {}", f.display()))
                })?;
                let h = reduced_from(f, constraints)?;
                Ok((f.clone(), d, sim::eigensolve(&h)?.ground_energy))
            })
            .collect())
    })?;
    let mut csv = String::from("distance,energy\n");
    for row in rows {
        let (f, d, e) = row?;
        csv.push_str(&format!("{},{}\n", sig12(d), sig12(e)));
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned());
        report.energies.push((name.unwrap_or_default(), e));
    }
    ensure_dir(out)?;
    write(&out.join("curve.csv"), &csv)?;
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct VqeOptions {
    pub layers: usize,
    pub entangler: Entangler,
    pub budget: usize,
    pub shots: Option<u64>,
    pub seed: u64,
    /// Initial computational state; defaults to the lowest diagonal entry.
    pub initial: Option<usize>,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions {
            layers: 1,
            entangler: Entangler::Chain,
            budget: 500,
            shots: None,
            seed: 0,
            initial: None,
        }
    }
}

/// Runs the variational loop; writes `trace.csv` and `theta.txt`.
pub fn cmd_vqe(
    input: &Path,
    constraints: Option<&Path>,
    options: &VqeOptions,
    out: &Path,
) -> CliResult<RunReport> {
    let mut inputs = vec![input];
    inputs.extend(constraints);
    let mut report = RunReport::new("vqe", &inputs);
    let h = reduced_from(input, constraints)?;
    let spec = AnsatzSpec {
        n_qubits: h.n_qubits(),
        layers: options.layers,
        entangler: options.entangler,
        initial: options.initial.unwrap_or_else(|| vqe::default_initial(&h)),
    };
    let evaluator = match options.shots {
        Some(shots) => Evaluator::Shots {
            shots,
            seed: options.seed,
        },
        None => Evaluator::Exact,
    };
    let theta0 = vec![0.0; spec.n_parameters()];
    let r = report.time("optimize", || {
        Ok(vqe::optimize(
            &h,
            &spec,
            &theta0,
            evaluator,
            options.budget,
        )?)
    })?;
    let ground = sim::eigensolve(&h).ok().map(|e| e.ground_energy);

    report.m = Some(h.dim());
    report.q_after = Some(h.n_qubits());
    report.energies.push(("vqe".into(), r.energy));
    if let Some(g) = ground {
        report.energies.push(("exact_ground".into(), g));
    }
    report
        .values
        .push(("evaluations".into(), r.evaluations.to_string()));
    report
        .values
        .push(("budget_exhausted".into(), r.budget_exhausted.to_string()));
    let theta: Vec<String> = r.theta.iter().map(|t| sig12(*t)).collect();
    report.values.push(("theta".into(), theta.join(",")));

    ensure_dir(out)?;
    write(&out.join("trace.csv"), &r.trace_csv())?;
    write(&out.join("theta.txt"), &(theta.join("\n") + "\n"))?;
    write(&out.join(REPORT_FILE), &report.to_text())?;
    Ok(report)
}

/// Pauli-string counts: the Jordan-Wigner count of a fermionic Hamiltonian,
/// or the `4^Q - 1` bound for a reduced one.
pub fn cmd_pauli_count(input: &Path) -> CliResult<RunReport> {
    let mut report = RunReport::new("pauli-count", &[input]);
    let text = read(input)?;
    let is_reduced = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("qubits"));
    if is_reduced {
        let h = in_file(input, ReducedHamiltonian::from_text(&text))?;
        let q = h.n_qubits() as u32;
        report.q_after = Some(h.n_qubits());
        report.terms_after = Some(h.term_count());
        report.max_pauli = Some((1u128 << (2 * q)) - 1);
        report.max_circuits = Some(1u128 << q);
    } else {
        let op = in_file(input, parse_fermion_operator(&text))?;
        report.q_before = Some(op.n_orbitals());
        report.terms_before = Some(pauli_term_count(&op)?);
    }
    Ok(report)
}

/// Per-group verification result.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    /// Deviation from the pair-rotation properties.
    pub r_residual: f64,
    /// Largest phase-aligned distance to the star, chain and file circuits
    /// sharing the group's control.
    pub equivalence_residual: f64,
}

/// Checks every group circuit of a plan directory: the pair-rotation
/// properties and pairwise equivalence with the other topologies.
pub fn cmd_verify_circuits(plan_dir: &Path) -> CliResult<(RunReport, Vec<GroupCheck>)> {
    let mut report = RunReport::new("verify-circuits", &[plan_dir]);
    let (plan, h) = load_plan(plan_dir)?;
    let checks: Vec<GroupCheck> = report.time("verify", || {
        plan.groups
            .par_iter()
            .map(|g| {
                let r_residual = verify_r_properties(g)?;
                let active = g.active();
                let mut variants = vec![g.circuit.clone()];
                for topology in [Topology::Star, Topology::Chain] {
                    let opts = PlanOptions {
                        topology,
                        ..Default::default()
                    };
                    variants.push(r_circuit(plan.n_qubits, &active, g.control, &opts)?);
                }
                let mut worst: f64 = 0.0;
                for i in 0..variants.len() {
                    for j in i + 1..variants.len() {
                        worst = worst.max(sim::equivalent(&variants[i], &variants[j])?.1);
                    }
                }
                Ok(GroupCheck {
                    name: g.name(),
                    r_residual,
                    equivalence_residual: worst,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    fill_counts(&mut report, &h, &plan);
    let r_max = checks.iter().map(|c| c.r_residual).fold(0.0, f64::max);
    let eq_max = checks
        .iter()
        .map(|c| c.equivalence_residual)
        .fold(0.0, f64::max);
    report.values.push(("max_r_residual".into(), sig12(r_max)));
    report
        .values
        .push(("max_equivalence_residual".into(), sig12(eq_max)));
    if r_max > VERIFY_TOL || eq_max > VERIFY_TOL {
        return Err(CliError::Tolerance(format!(
            "circuit verification failed: r residual {r_max:e}, equivalence residual {eq_max:e}"
        )));
    }
    Ok((report, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_from_file_names() {
        assert_eq!(
            distance_from_name(Path::new("h2_sto3g_0.75.ham")),
            Some(0.75)
        );
        assert_eq!(distance_from_name(Path::new("dir/h2_1.2.ham")), Some(1.2));
        assert_eq!(distance_from_name(Path::new("lih_r2.ham")), Some(2.0));
        assert_eq!(distance_from_name(Path::new("none.ham")), None);
    }

    #[test]
    fn exit_codes() {
        let e = CliError::Core(qsub_core::Error::EmptySubspace("x".into()));
        assert_eq!(e.exit_code(), EXIT_INFEASIBLE);
        let e = CliError::Core(qsub_core::Error::Asymmetric { residual: 1.0 });
        assert_eq!(e.exit_code(), EXIT_NUMERICAL);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_INPUT);
        assert_eq!(CliError::Tolerance("x".into()).exit_code(), EXIT_NUMERICAL);
    }
}
