//! A small variational loop: hardware-efficient ansatz, plan-based energy
//! evaluation and a Nelder-Mead optimizer.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::mapping::ReducedHamiltonian;
use crate::measure::{
    build_plan, measure_state, reconstruct_expectation, MeasurementPlan, PlanOptions,
};
use crate::numfmt::sig12;
use crate::sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Entangler {
    /// CNOT `q -> q+1`.
    #[default]
    Chain,
    /// CNOT on every ordered pair.
    Full,
}

impl FromStr for Entangler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Entangler::Chain),
            "full" => Ok(Entangler::Full),
            other => Err(Error::invalid(format!("unknown entangler '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layers: usize,
    pub entangler: Entangler,
    /// Computational basis state prepared before the first layer.
    pub initial: usize,
}

impl AnsatzSpec {
    pub fn n_parameters(&self) -> usize {
        self.n_qubits * self.layers * 2
    }
}

/// X gates for the initial state, then per layer RY and RZ on every qubit
/// followed by the entangling CNOTs. Parameter `2(lQ + q)` is the RY angle
/// of qubit `q` in layer `l`, the next one its RZ angle.
pub fn ansatz_circuit(spec: &AnsatzSpec, theta: &[f64]) -> Result<Circuit> {
    if spec.layers == 0 || spec.n_qubits == 0 {
        return Err(Error::invalid(
            "ansatz needs at least one qubit and one layer",
        ));
    }
    if theta.len() != spec.n_parameters() {
        return Err(Error::ParameterCount {
            expected: spec.n_parameters(),
            got: theta.len(),
        });
    }
    let q = spec.n_qubits;
    if spec.initial >> q != 0 {
        return Err(Error::invalid(format!(
            "initial state {} does not fit on {q} qubits",
            spec.initial
        )));
    }
    let mut c = Circuit::new(q);
    for k in 0..q {
        if spec.initial >> k & 1 == 1 {
            c.push(Gate::X(k))?;
        }
    }
    for layer in 0..spec.layers {
        for k in 0..q {
            let base = 2 * (layer * q + k);
            c.push(Gate::Ry(k, theta[base]))?;
            c.push(Gate::Rz(k, theta[base + 1]))?;
        }
        match spec.entangler {
            Entangler::Chain => {
                for k in 0..q.saturating_sub(1) {
                    c.push(Gate::Cnot {
                        control: k,
                        target: k + 1,
                    })?;
                }
            }
            Entangler::Full => {
                for a in 0..q {
                    for b in (0..q).filter(|&b| b != a) {
                        c.push(Gate::Cnot {
                            control: a,
                            target: b,
                        })?;
                    }
                }
            }
        }
    }
    Ok(c)
}

/// Computational state holding the smallest diagonal entry.
pub fn default_initial(h: &ReducedHamiltonian) -> usize {
    let mut best = (0, f64::INFINITY);
    for m in 0..h.dim() {
        let v = h.get(m, m);
        if v < best.1 {
            best = (m, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Exact,
    /// `shots` samples per circuit; evaluation `k` uses seeds derived from
    /// `seed` and `k`.
    Shots {
        shots: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    pub best: f64,
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub evaluations: usize,
    /// True when the evaluation budget ran out before convergence.
    pub budget_exhausted: bool,
    pub trace: Vec<TraceEntry>,
}

impl VqeResult {
    /// CSV `iter,energy,best`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,energy,best\n");
        for t in &self.trace {
            let _ = writeln!(out, "{},{},{}", t.iter, sig12(t.energy), sig12(t.best));
        }
        out
    }
}

/// Energy of the ansatz state measured through the plan.
pub fn evaluate(
    plan: &MeasurementPlan,
    spec: &AnsatzSpec,
    theta: &[f64],
    evaluator: Evaluator,
    index: u64,
) -> Result<f64> {
    let state = sim::run(&ansatz_circuit(spec, theta)?, 0)?;
    let tables = match evaluator {
        Evaluator::Exact => measure_state(plan, &state, None, 0)?,
        Evaluator::Shots { shots, seed } => {
            let stride = plan.n_circuits() as u64;
            measure_state(
                plan,
                &state,
                Some(shots),
                seed.wrapping_add(index.wrapping_mul(stride)),
            )?
        }
    };
    reconstruct_expectation(plan, &tables)
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 0.1;
const F_TOL: f64 = 1e-10;
const X_TOL: f64 = 1e-8;

/// Minimizes the plan-reconstructed energy over the ansatz parameters with
/// Nelder-Mead, using at most `budget` energy evaluations.
pub fn optimize(
    h: &ReducedHamiltonian,
    spec: &AnsatzSpec,
    theta0: &[f64],
    evaluator: Evaluator,
    budget: usize,
) -> Result<VqeResult> {
    if budget == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    if spec.n_qubits != h.n_qubits() {
        return Err(Error::invalid(format!(
            "ansatz has {} qubits, Hamiltonian {}",
            spec.n_qubits,
            h.n_qubits()
        )));
    }
    if theta0.len() != spec.n_parameters() {
        return Err(Error::ParameterCount {
            expected: spec.n_parameters(),
            got: theta0.len(),
        });
    }
    let plan = build_plan(h, &PlanOptions::default())?;
    let mut nm = Objective {
        plan: &plan,
        spec,
        evaluator,
        budget,
        trace: Vec::new(),
        best: (theta0.to_vec(), f64::INFINITY),
    };

    let n = theta0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let converged = 'search: {
        for i in 0..=n {
            let mut x = theta0.to_vec();
            if i > 0 {
                x[i - 1] += INITIAL_STEP;
            }
            let Some(f) = nm.eval(&x)? else {
                break 'search false;
            };
            simplex.push((x, f));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= F_TOL && size <= X_TOL {
                break 'search true;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let toward = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, x)| c + t * (x - c))
                    .collect()
            };
            let worst = simplex[n].clone();
            let xr = toward(-REFLECT, &worst.0);
            let Some(fr) = nm.eval(&xr)? else {
                break 'search false;
            };
            if fr < simplex[0].1 {
                let xe = toward(-REFLECT * EXPAND, &worst.0);
                let Some(fe) = nm.eval(&xe)? else {
                    break 'search false;
                };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, bound) = if fr < worst.1 {
                (toward(-REFLECT * CONTRACT, &worst.0), fr)
            } else {
                (toward(CONTRACT, &worst.0), worst.1)
            };
            let Some(fc) = nm.eval(&xc)? else {
                break 'search false;
            };
            if fc < bound || (fr < worst.1 && fc <= fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best
                    .iter()
                    .zip(&vertex.0)
                    .map(|(b, v)| b + SHRINK * (v - b))
                    .collect();
                let Some(f) = nm.eval(&x)? else {
                    break 'search false;
                };
                *vertex = (x, f);
            }
        }
    };

    let evaluations = nm.trace.len();
    Ok(VqeResult {
        theta: nm.best.0,
        energy: nm.best.1,
        evaluations,
        budget_exhausted: !converged,
        trace: nm.trace,
    })
}

struct Objective<'a> {
    plan: &'a MeasurementPlan,
    spec: &'a AnsatzSpec,
    evaluator: Evaluator,
    budget: usize,
    trace: Vec<TraceEntry>,
    best: (Vec<f64>, f64),
}

impl Objective<'_> {
    /// `None` once the budget is spent.
    fn eval(&mut self, theta: &[f64]) -> Result<Option<f64>> {
        if self.trace.len() >= self.budget {
            return Ok(None);
        }
        let index = self.trace.len();
        let energy = evaluate(self.plan, self.spec, theta, self.evaluator, index as u64)?;
        if energy < self.best.1 {
            self.best = (theta.to_vec(), energy);
        }
        self.trace.push(TraceEntry {
            iter: index + 1,
            energy,
            best: self.best.1,
        });
        Ok(Some(energy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(q: usize, layers: usize) -> AnsatzSpec {
        AnsatzSpec {
            n_qubits: q,
            layers,
            entangler: Entangler::Chain,
            initial: 0b01,
        }
    }

    #[test]
    fn structure() {
        let s = spec(2, 1);
        let c = ansatz_circuit(&s, &[0.0; 4]).unwrap();
        assert_eq!(c.len(), 1 + 4 + 1);
        assert_eq!(spec(2, 2).n_parameters(), 8);
        assert!(matches!(
            ansatz_circuit(&s, &[0.0; 3]),
            Err(Error::ParameterCount {
                expected: 4,
                got: 3
            })
        ));
        let full = AnsatzSpec {
            entangler: Entangler::Full,
            ..spec(3, 1)
        };
        assert_eq!(ansatz_circuit(&full, &[0.0; 6]).unwrap().cnot_count(), 6);
    }

    #[test]
    fn budget_of_one_returns_initial_energy() {
        let h =
            ReducedHamiltonian::new(1, 2, vec![(0, 0, -1.0), (1, 1, 1.0), (0, 1, 0.5)]).unwrap();
        let s = AnsatzSpec {
            initial: 0,
            ..spec(1, 1)
        };
        let r = optimize(&h, &s, &[0.0, 0.0], Evaluator::Exact, 1).unwrap();
        assert_eq!(r.evaluations, 1);
        assert!(r.budget_exhausted);
        assert!((r.energy + 1.0).abs() < 1e-12);
    }

    #[test]
    fn finds_single_qubit_ground_state() {
        let h =
            ReducedHamiltonian::new(1, 2, vec![(0, 0, -1.0), (1, 1, 1.0), (0, 1, 0.5)]).unwrap();
        let s = AnsatzSpec {
            initial: 0,
            ..spec(1, 1)
        };
        let r = optimize(&h, &s, &[0.0, 0.0], Evaluator::Exact, 400).unwrap();
        let exact = -(1.0f64 + 0.25).sqrt();
        assert!((r.energy - exact).abs() < 1e-6, "{}", r.energy);
        assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best));
    }

    #[test]
    fn default_initial_is_lowest_diagonal() {
        let h =
            ReducedHamiltonian::new(2, 3, vec![(0, 0, 0.5), (1, 1, -0.2), (0, 2, 1.0)]).unwrap();
        assert_eq!(default_initial(&h), 1);
    }
}
