use leakynorm::data::six_point_dataset;
use leakynorm::oracle::{check_decomposition, solve_dictionary, AtomDictionary, DEFAULT_ANGLE_STEP};
use leakynorm::{
    atomic_lp, brute_force_hull_member, build_program, enumerate_patterns, reconstruct, solve, DataSet,
    EnumerationConfig, Error, FormulationKind, GroupSolution, LeakyRelu, PatternSet, SolverConfig,
};

fn solved(data: &DataSet, kind: FormulationKind, act: LeakyRelu) -> (PatternSet, GroupSolution) {
    let pats = enumerate_patterns(data, &EnumerationConfig::default()).unwrap();
    let p = build_program(kind, data, &pats, act).unwrap();
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert!(sol.is_optimal(), "{kind}: {:?}", sol.status);
    (pats, sol)
}

fn scalar_corpus() -> Vec<DataSet> {
    vec![
        six_point_dataset(),
        DataSet::from_scalars(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap(),
        DataSet::from_scalars(&[-0.5, 0.0, 0.25, 1.0], &[0.3, -0.2, 0.9, 0.1]).unwrap(),
        DataSet::from_scalars(&[0.0, 0.5, 1.0, 1.5, 2.0], &[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap(),
    ]
}

// The grid oracle can only overestimate; its excess is at most the
// coefficient mass times the worst displacement of an atom on the grid.
fn assert_agrees(kind: FormulationKind, data: &DataSet, act: LeakyRelu, step: f64) {
    let (_, sol) = solved(data, kind, act);
    let oracle = atomic_lp(data, kind, act, step).unwrap();
    let diameter = 2.0 * (data.max_point_norm() + 1.0);
    let slack = (1e-3 * oracle.objective).max(oracle.objective * diameter * step);
    assert!(
        sol.objective <= oracle.objective + 1e-6 && oracle.objective - sol.objective <= slack + 1e-6,
        "{kind}: solver {} oracle {}",
        sol.objective,
        oracle.objective
    );
}

#[test]
fn bounded_weights_matches_oracle() {
    for data in scalar_corpus() {
        assert_agrees(FormulationKind::WeightsInterp, &data, LeakyRelu::RELU, 1e-3);
    }
}

#[test]
fn bounded_weights_matches_oracle_leaky() {
    let act = LeakyRelu::new(0.2).unwrap();
    for data in scalar_corpus() {
        assert_agrees(FormulationKind::WeightsInterp, &data, act, 1e-3);
    }
}

#[test]
fn joint_matches_oracle() {
    for data in scalar_corpus() {
        assert_agrees(FormulationKind::JointInterp, &data, LeakyRelu::RELU, DEFAULT_ANGLE_STEP);
    }
}

#[test]
fn margin_matches_oracle() {
    let data = DataSet::from_scalars(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
    assert_agrees(FormulationKind::MarginClassify, &data, LeakyRelu::RELU, 1e-3);
    let data = DataSet::from_scalars(&[-1.0, -0.6, -0.2, 0.2, 0.6, 1.0], &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0]).unwrap();
    assert_agrees(FormulationKind::MarginClassify, &data, LeakyRelu::RELU, 1e-3);
}

#[test]
fn refining_the_grid_never_increases_the_objective() {
    let data = scalar_corpus().remove(2);
    let coarse = atomic_lp(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU, 0.02).unwrap();
    let fine = atomic_lp(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU, 0.01).unwrap();
    assert!(fine.objective <= coarse.objective + 1e-9);
}

#[test]
fn oracle_reconstructs_labels() {
    let data = six_point_dataset();
    let sol = atomic_lp(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU, 1e-3).unwrap();
    for (i, &x) in [-1.0, -0.6, -0.2, 0.2, 0.6, 1.0].iter().enumerate() {
        let f: f64 = sol.active_atoms.iter().map(|a| a.coef * (a.w * x + a.b).max(0.0)).sum();
        assert!((f - data.labels()[i]).abs() < 1e-7);
    }
}

#[test]
fn hull_membership_brackets_the_gauge() {
    let data = six_point_dataset();
    let oracle = atomic_lp(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU, 1e-3).unwrap();
    let y = data.labels();
    assert!(brute_force_hull_member(&data, y, oracle.objective + 1e-3, LeakyRelu::RELU, 1e-3).unwrap());
    assert!(!brute_force_hull_member(&data, y, 0.5 * oracle.objective, LeakyRelu::RELU, 1e-3).unwrap());
}

#[test]
fn dictionary_accepts_arbitrary_targets() {
    let data = six_point_dataset();
    let dict = AtomDictionary::build(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU, 0.01).unwrap();
    let doubled = solve_dictionary(&dict, &(data.labels() * 2.0)).unwrap();
    let single = solve_dictionary(&dict, data.labels()).unwrap();
    assert!((doubled.objective - 2.0 * single.objective).abs() < 1e-8);
}

#[test]
fn decomposition_holds_for_solver_output() {
    for kind in [FormulationKind::WeightsInterp, FormulationKind::JointInterp] {
        for data in scalar_corpus() {
            let (pats, sol) = solved(&data, kind, LeakyRelu::RELU);
            let dec = check_decomposition(&sol, &pats, &data, LeakyRelu::RELU).unwrap();
            assert!((dec.total - sol.objective).abs() <= 1e-8 * (1.0 + sol.objective));
            let net = reconstruct(&sol, &pats, LeakyRelu::RELU, 1e-7).unwrap();
            assert!((net.total_variation() - sol.objective).abs() <= 1e-8 * (1.0 + sol.objective));
        }
    }
}

#[test]
fn corrupted_bias_fails_the_equality_clause() {
    let data = six_point_dataset();
    let (pats, mut sol) = solved(&data, FormulationKind::WeightsInterp, LeakyRelu::RELU);
    let block = sol
        .blocks
        .iter_mut()
        .find(|b| b.w_plus.iter().any(|w| w.abs() > 1e-3))
        .expect("some active block");
    block.b_plus += 0.1;
    match check_decomposition(&sol, &pats, &data, LeakyRelu::RELU) {
        Err(Error::Decomposition(msg)) => assert!(msg.starts_with("equality"), "{msg}"),
        other => panic!("expected a decomposition failure, got {other:?}"),
    }
}

#[test]
fn margin_solutions_are_not_decomposed() {
    let data = DataSet::from_scalars(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
    let (pats, sol) = solved(&data, FormulationKind::MarginClassify, LeakyRelu::RELU);
    assert!(check_decomposition(&sol, &pats, &data, LeakyRelu::RELU).is_err());
}
