use ddmech::datagen::meshgen::{rectangle_q4, PlateParams};
use ddmech::datagen::{gen_regular_db, plate_problem, LinearElasticLaw, StrainGridSpec};
use ddmech::ddcm::{
    ddcm_solve, power_identity_residual, project_to_data, solution_metrics, DdcmOptions, DdcmProblem, DdcmSolution,
    DistanceVariant, InitMode,
};
use ddmech::fe::{fem_reference_solve, BoundaryConditions, DiscreteModel};
use ddmech::phase_space::{mandel, LocalState, MaterialDatabase, Metric};
use ddmech::Error;

fn law() -> LinearElasticLaw {
    LinearElasticLaw::new(217.5e9, 0.3).unwrap()
}

fn metric() -> Metric {
    Metric::isotropic_plane_strain(100e9, 0.35).unwrap()
}

fn coarse_plate() -> DiscreteModel {
    let p = PlateParams {
        size: 2.0 * 0.0025,
        grading: 1.5,
        ..PlateParams::default()
    };
    plate_problem(&p, -0.004).unwrap()
}

fn solve(model: &DiscreteModel, db: &MaterialDatabase, options: DdcmOptions) -> DdcmSolution {
    ddcm_solve(&DdcmProblem {
        model,
        database: db,
        options: &options,
    })
    .unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn fem_solution_is_a_fixed_point() {
    // Warm start with the metric equal to the law puts z_0 on the FE solution;
    // the iteration must recognise it and return it unchanged.
    let model = plate_problem(&PlateParams::default(), -0.004).unwrap();
    let fem = fem_reference_solve(&model, &law()).unwrap();
    let db = MaterialDatabase::build(fem.states(), law().metric().unwrap()).unwrap();
    let sol = solve(&model, &db, DdcmOptions { init: InitMode::MetricWarmStart, ..DdcmOptions::default() });
    assert!(sol.converged);
    assert_eq!(sol.iterations, 1);
    assert_eq!(sol.mapping.indices, (0..model.n_points()).collect::<Vec<_>>());
    assert!(sol.final_distance_sq() < 1e-8 * 2.0 * fem.energy, "{}", sol.final_distance_sq());
    assert!(rel_diff(&sol.u, &fem.u) < 1e-6);
    let s: Vec<f64> = sol.states.iter().flat_map(|z| z.stress.iter().copied().collect::<Vec<_>>()).collect();
    let f: Vec<f64> = fem.stresses.iter().flat_map(|z| z.iter().copied().collect::<Vec<_>>()).collect();
    assert!(rel_diff(&s, &f) < 1e-6);
    assert!(sol.lambda.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn fem_states_from_zero_start_diagnostic() {
    // From z_0 = 0 the iteration settles in a nearby local fixed point; the
    // distance is reported, not asserted against the FE energy.
    let model = plate_problem(&PlateParams::default(), -0.004).unwrap();
    let fem = fem_reference_solve(&model, &law()).unwrap();
    let db = MaterialDatabase::build(fem.states(), metric()).unwrap();
    let sol = solve(&model, &db, DdcmOptions::default());
    let own = sol.mapping.indices.iter().enumerate().filter(|(p, i)| p == *i).count();
    println!(
        "zero start on FE states: d² = {:.4e} J ({:.2e} of 2E), {own}/{} points on their own state",
        sol.final_distance_sq(),
        sol.final_distance_sq() / (2.0 * fem.energy),
        model.n_points()
    );
    assert!(sol.converged);
    assert!(sol.final_distance_sq() < 0.01 * 2.0 * fem.energy);
}

/// Largest `|σ − law(ε)|` of the converged state, in units of the graph's
/// stress sampling step.
fn graph_misfit(n: usize) -> f64 {
    // Uniaxial stress: right edge pulled, left and bottom on rollers.
    let mesh = rectangle_q4(1.0, 1.0, 1, 1).unwrap();
    let mut bcs = BoundaryConditions::new(mesh.n_dofs());
    bcs.fix_set(&mesh, "left", 0, 0.0).unwrap();
    bcs.fix_set(&mesh, "bottom", 1, 0.0).unwrap();
    let d = 1e-3;
    bcs.fix_set(&mesh, "right", 0, d).unwrap();
    let model = DiscreteModel::new(mesh, bcs).unwrap();
    let (l, m) = law().lame();
    let eps_f = mandel(d, -l / (l + 2.0 * m) * d, 0.0);
    // Dense 1-D graph of the law along the loading path, t ∈ [0, 2].
    let h = 2.0 / (n - 1) as f64;
    let graph: Vec<LocalState> = (0..n)
        .map(|k| {
            let e = eps_f * (k as f64 * h);
            LocalState::new(e, law().stress(&e))
        })
        .collect();
    let db = MaterialDatabase::build(graph, metric()).unwrap();
    let sol = solve(&model, &db, DdcmOptions::default());
    assert!(sol.converged);
    let step = law().stress(&eps_f).norm() * h;
    sol.states
        .iter()
        .map(|z| (z.stress - law().stress(&z.strain)).norm() / step)
        .fold(0.0, f64::max)
}

#[test]
fn dense_law_graph_on_one_element() {
    // The iteration stops once a data step no longer pays off, which with
    // this metric leaves the state within two sampling steps of the law.
    let coarse = graph_misfit(201);
    let fine = graph_misfit(2001);
    println!("graph misfit: {coarse:.3} steps (h = 1e-2), {fine:.3} steps (h = 1e-3)");
    assert!(coarse <= 2.0 && fine <= 2.0);
}

#[test]
fn iterates_satisfy_mechanics_invariants() {
    let model = coarse_plate();
    let db = gen_regular_db(&StrainGridSpec::table_box(10), &law(), &metric()).unwrap();
    for variant in [DistanceVariant::Standard, DistanceVariant::Isotropic] {
        let sol = solve(&model, &db, DdcmOptions { variant, ..DdcmOptions::default() });
        let scale = sol.history[0];
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * scale, "{variant:?}: {} -> {}", w[0], w[1]);
        }
        assert!(sol.equilibrium.iter().all(|&r| r < 1e-9), "{variant:?}");
        let p = power_identity_residual(&model, &sol.u, &sol.states).unwrap();
        assert!(p < 1e-9, "{variant:?}: {p:e}");
        assert_eq!(sol.changes.len(), sol.iterations);
    }
}

#[test]
fn converged_mapping_is_a_fixed_point() {
    let model = coarse_plate();
    let db = gen_regular_db(&StrainGridSpec::table_box(10), &law(), &metric()).unwrap();
    let sol = solve(&model, &db, DdcmOptions::default());
    assert!(sol.converged);
    let (again, _) = project_to_data(&sol.states, &db, DistanceVariant::Standard, None).unwrap();
    assert_eq!(again.indices, sol.mapping.indices);
    let (own, d) = project_to_data(db.states(), &db, DistanceVariant::Standard, None).unwrap();
    assert_eq!(own.indices, (0..db.len()).collect::<Vec<_>>());
    assert!(d.iter().all(|&v| v == 0.0));
}

#[test]
fn isotropic_variant_does_not_lose_on_plate() {
    let model = coarse_plate();
    let db = gen_regular_db(&StrainGridSpec::table_box(10), &law(), &metric()).unwrap();
    let std = solve(&model, &db, DdcmOptions::default());
    let iso = solve(&model, &db, DdcmOptions { variant: DistanceVariant::Isotropic, ..DdcmOptions::default() });
    assert!(iso.final_distance_sq() <= std.final_distance_sq());
    assert!(iso.mapping.angles.is_some());
}

#[test]
fn multi_start_diagnostic() {
    // Not an invariant: fixed points from different starts may differ.
    let model = coarse_plate();
    let db = gen_regular_db(&StrainGridSpec::table_box(10), &law(), &metric()).unwrap();
    let a = solve(&model, &db, DdcmOptions::default());
    let b = solve(&model, &db, DdcmOptions { init: InitMode::RandomDatabase { seed: 7 }, ..DdcmOptions::default() });
    let c = solve(&model, &db, DdcmOptions { init: InitMode::MetricWarmStart, ..DdcmOptions::default() });
    let same = |x: &DdcmSolution| x.mapping.changes_from(&a.mapping);
    println!(
        "multi-start: zero d² {:.6e}, random d² {:.6e} ({} points differ), warm d² {:.6e} ({} differ)",
        a.final_distance_sq(),
        b.final_distance_sq(),
        same(&b),
        c.final_distance_sq(),
        same(&c)
    );
    assert!(a.converged && b.converged && c.converged);
}

#[test]
fn metrics_of_exact_solution_vanish() {
    let model = coarse_plate();
    let fem = fem_reference_solve(&model, &law()).unwrap();
    let states = fem.states();
    let db = MaterialDatabase::build(states.clone(), metric()).unwrap();
    let m = solution_metrics(&states, &fem, &db, DistanceVariant::Standard, model.weights()).unwrap();
    assert_eq!((m.fem_db, m.ddcm_db, m.ddcm_fem), (0.0, 0.0, 0.0));
    assert!((m.energy_fem - fem.energy).abs() <= 1e-12 * fem.energy);

    let mut perturbed = states.clone();
    let k = 3;
    let dz = LocalState::new(mandel(1e-4, 0.0, 2e-5), mandel(0.0, 3e6, 0.0));
    perturbed[k] = perturbed[k] + dz;
    let m = solution_metrics(&perturbed, &fem, &db, DistanceVariant::Standard, model.weights()).unwrap();
    let expected = model.weights()[k] * metric().norm_sq(&dz);
    assert!((m.ddcm_fem - expected).abs() <= 1e-12 * expected);
    assert!(m.abs_field.iter().enumerate().all(|(p, &v)| (p == k) == (v > 0.0)));
}

#[test]
fn empty_inputs_are_rejected() {
    assert!(matches!(MaterialDatabase::build(vec![], metric()), Err(Error::EmptyDatabase)));
    let model = coarse_plate();
    let db = MaterialDatabase::build(vec![LocalState::zero()], metric()).unwrap();
    let err = ddcm_solve(&DdcmProblem {
        model: &model,
        database: &db,
        options: &DdcmOptions { max_iterations: 0, ..DdcmOptions::default() },
    })
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
