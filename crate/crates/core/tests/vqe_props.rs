mod common;

use common::*;
use proptest::prelude::*;
use qsub_core::constraint::{intersect_constraints, ConstraintKind, ConstraintSpec};
use qsub_core::fermion::parse_fermion_operator;
use qsub_core::mapping::{build_map, reduce_hamiltonian, ReducedHamiltonian};
use qsub_core::sim::eigensolve;
use qsub_core::vqe::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h2() -> ReducedHamiltonian {
    let op = parse_fermion_operator(FIXTURE).unwrap();
    let specs = [
        ConstraintSpec::single(ConstraintKind::NumberUp, 1.0).unwrap(),
        ConstraintSpec::single(ConstraintKind::NumberDown, 1.0).unwrap(),
    ];
    reduce_hamiltonian(&op, &build_map(intersect_constraints(&specs, 4).unwrap())).unwrap()
}

fn h2_spec(h: &ReducedHamiltonian, layers: usize) -> AnsatzSpec {
    AnsatzSpec {
        n_qubits: h.n_qubits(),
        layers,
        entangler: Entangler::Chain,
        initial: default_initial(h),
    }
}

#[test]
fn exact_vqe_reaches_ground_energy() {
    let h = h2();
    let ground = eigensolve(&h).unwrap().ground_energy;
    for layers in [1, 2] {
        let spec = h2_spec(&h, layers);
        let theta0 = vec![0.0; spec.n_parameters()];
        let r = optimize(&h, &spec, &theta0, Evaluator::Exact, 500).unwrap();
        assert!(r.evaluations <= 500);
        assert!(
            (r.energy - ground).abs() < 1e-3,
            "layers={layers}: {} vs {ground}",
            r.energy
        );
        assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best));
        assert!(r.trace.iter().all(|t| t.energy >= ground - 1e-9));
    }
}

#[test]
fn shot_vqe_is_close_to_exact_optimum() {
    let h = h2();
    let ground = eigensolve(&h).unwrap().ground_energy;
    let spec = h2_spec(&h, 1);
    for seed in 0..3 {
        let r = optimize(
            &h,
            &spec,
            &vec![0.0; spec.n_parameters()],
            Evaluator::Shots {
                shots: 10_000,
                seed,
            },
            300,
        )
        .unwrap();
        // re-evaluate the returned parameters exactly
        let plan = qsub_core::measure::build_plan(&h, &Default::default()).unwrap();
        let exact = evaluate(&plan, &spec, &r.theta, Evaluator::Exact, 0).unwrap();
        assert!((exact - ground).abs() < 5e-2, "seed {seed}: {exact}");
    }
}

#[test]
fn deterministic_given_seed() {
    let h = h2();
    let spec = h2_spec(&h, 1);
    let run = || {
        optimize(
            &h,
            &spec,
            &[0.1; 4],
            Evaluator::Shots {
                shots: 500,
                seed: 9,
            },
            60,
        )
        .unwrap()
        .trace_csv()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn best_so_far_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = rng.random_range(1..=3);
        let dim = 1 << q;
        let entries: Vec<(usize, usize, f64)> = (0..dim)
            .flat_map(|m| (m..dim).map(move |mp| (m, mp)))
            .map(|(m, mp)| (m, mp, rng.random_range(-1.0..1.0)))
            .collect();
        let h = ReducedHamiltonian::new(q, dim, entries).unwrap();
        let ground = eigensolve(&h).unwrap().ground_energy;
        let spec = AnsatzSpec { n_qubits: q, layers: 1, entangler: Entangler::Full, initial: 0 };
        let theta0: Vec<f64> = (0..spec.n_parameters()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = optimize(&h, &spec, &theta0, Evaluator::Exact, 80).unwrap();
        prop_assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best));
        prop_assert!(r.trace.iter().all(|t| t.energy >= ground - 1e-9));
        prop_assert_eq!(r.trace.last().unwrap().best, r.energy);
    }
}
