mod common;

use common::*;
use proptest::prelude::*;
use qsub_core::fermion::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn h2_fixture_parses() {
    let op = parse_fermion_operator(FIXTURE).unwrap();
    assert_eq!(op.n_orbitals(), 4);
    assert_eq!(op.terms().len(), 15);
    let t = &op.terms()[4];
    assert_eq!(t.coefficient, -1.24728);
    assert_eq!(t.ops, vec![LadderOp::create(1), LadderOp::annihilate(1)]);
    assert!(op.terms()[0].ops.is_empty());
}

#[test]
fn empty_file_is_rejected() {
    assert!(parse_fermion_operator("").is_err());
    assert!(parse_fermion_operator("# only a comment\n").is_err());
}

#[test]
fn fixture_matrix_matches_tensor_product_build() {
    let op = parse_fermion_operator(FIXTURE).unwrap();
    let dense = operator_dense(&op);
    for bra in 0..16u64 {
        for ket in 0..16u64 {
            let v = matrix_element(&op, FockState::new(bra, 4), FockState::new(ket, 4));
            assert!((v - dense[(bra as usize, ket as usize)]).abs() < 1e-12);
        }
    }
    // paired interaction: a1+ a0+ a1 a0 = -n1 n0
    assert!(close(dense[(0b0011, 0b0011)], -1.11615, 1e-5));
    assert!(close(dense[(0b1100, 0b0011)], 0.18177, 1e-5));
}

#[test]
fn jordan_wigner_coefficients() {
    let op = parse_fermion_operator(FIXTURE).unwrap();
    let strings = jordan_wigner(&op).unwrap();
    assert_eq!(strings.len(), 15);
    assert_eq!(strings.iter().filter(|s| !s.is_identity()).count(), 14);
    let get = |label: &str| {
        strings
            .iter()
            .find(|s| s.label() == label)
            .unwrap_or_else(|| panic!("missing {label}"))
            .coefficient
    };
    // Reference values, qubit-indexed from zero.
    let expect = [
        ("I", -0.10973),
        ("Z0", 0.16988),
        ("Z1", 0.16988),
        ("Z2", -0.21886),
        ("Z3", -0.21886),
        ("Z0 Z1", 0.16821),
        ("Z0 Z2", 0.12005),
        ("Z0 Z3", 0.16549),
        ("Z1 Z2", 0.16549),
        ("Z1 Z3", 0.12005),
        ("Z2 Z3", 0.17395),
        ("X0 X1 Y2 Y3", -0.04544),
        ("X0 Y1 Y2 X3", 0.04544),
        ("Y0 X1 X2 Y3", 0.04544),
        ("Y0 Y1 X2 X3", -0.04544),
    ];
    for (label, value) in expect {
        let got = get(label);
        assert!(close(got, value, 1e-5), "{label}: {got} vs {value}");
    }
}

fn pairs_ordering(n: usize) -> impl Strategy<Value = (usize, usize, u64)> {
    (0..n, 0..n, 0..(1u64 << n)).prop_filter("distinct", |(i, j, _)| i != j)
}

proptest! {
    #[test]
    fn annihilators_anticommute((i, j, s) in pairs_ordering(6)) {
        let ij = FermionTerm::new(1.0, vec![LadderOp::annihilate(i), LadderOp::annihilate(j)]);
        let ji = FermionTerm::new(1.0, vec![LadderOp::annihilate(j), LadderOp::annihilate(i)]);
        match (ij.apply(s), ji.apply(s)) {
            (Some((a, x)), Some((b, y))) => {
                prop_assert_eq!(a, b);
                prop_assert_eq!(x, -y);
            }
            (None, None) => {}
            other => prop_assert!(false, "mismatch {:?}", other),
        }
    }

    #[test]
    fn mixed_ladders_anticommute((i, j, s) in pairs_ordering(6)) {
        let ij = FermionTerm::new(1.0, vec![LadderOp::create(i), LadderOp::annihilate(j)]);
        let ji = FermionTerm::new(1.0, vec![LadderOp::annihilate(j), LadderOp::create(i)]);
        match (ij.apply(s), ji.apply(s)) {
            (Some((a, x)), Some((b, y))) => {
                prop_assert_eq!(a, b);
                prop_assert_eq!(x, -y);
            }
            (None, None) => {}
            other => prop_assert!(false, "mismatch {:?}", other),
        }
    }

    #[test]
    fn jordan_wigner_is_faithful(seed in any::<u64>(), n in 1usize..=4, n_terms in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = random_hermitian(&mut rng, n, n_terms);
        let strings = jordan_wigner(&op).unwrap();
        let from_paulis = pauli_dense(n, &strings);
        let dim = 1u64 << n;
        for bra in 0..dim {
            for ket in 0..dim {
                let m = matrix_element(&op, FockState::new(bra, n), FockState::new(ket, n));
                let p = from_paulis[(bra as usize, ket as usize)];
                prop_assert!((p.re - m).abs() < 1e-10 && p.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn loaded_operators_are_symmetric(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = random_hermitian(&mut rng, n, 5);
        prop_assert!(op.hermiticity_residual() < 1e-10);
        let dim = 1u64 << n;
        for bra in 0..dim {
            for ket in 0..bra {
                let a = matrix_element(&op, FockState::new(bra, n), FockState::new(ket, n));
                let b = matrix_element(&op, FockState::new(ket, n), FockState::new(bra, n));
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sparse_apply_matches_tensor_product(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = random_hermitian(&mut rng, n, 4);
        let dense = operator_dense(&op);
        for ket in 0..(1u64 << n) {
            let col = op.apply(ket);
            for bra in 0..(1u64 << n) {
                let v = col.get(&bra).copied().unwrap_or(0.0);
                prop_assert!((v - dense[(bra as usize, ket as usize)]).abs() < 1e-12);
            }
        }
    }
}
