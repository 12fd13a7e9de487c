//! Acceptance run: one PASS/FAIL line per criterion, each at its stated
//! tolerance and time budget.
//!
//! A criterion listed in `KNOWN_FAILURES` still prints FAIL; listing it only
//! keeps the process exit code at zero. Any other failure exits non-zero.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use ddmech::datagen::meshgen::{perforated_sample, plate_hole_quarter, rectangle_q4, rectangle_t6, PlateParams};
use ddmech::datagen::{
    fit_isotropic_law, gen_regular_db, lbeam_problem, plate_problem, run_virtual_experiment, snapshots_for_ratio,
    StrainGridSpec,
};
use ddmech::ddcm::{
    ddcm_solve, power_identity_residual, solution_metrics, DdcmOptions, DdcmProblem, DdcmSolution, DistanceVariant,
    InitMode,
};
use ddmech::ddi::{ddi_solve, DdiOptions, DdiProblem, DdiResult};
use ddmech::fe::{dof, fem_reference_solve, BoundaryConditions, DiscreteModel, Element, ElementKind, Mesh, Quadrature};
use ddmech::phase_space::{mandel, optimal_rotation_2d, rotate_state, LocalState, MaterialDatabase, Metric};
use ddmech::study::{run_study, StudyConfig, StudyReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria known not to hold, with the reason printed next to the FAIL.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (
        1,
        "from z0 = 0 the alternating projection stops in a local fixed point of the non-convex problem; \
         the FE state itself is a fixed point",
    ),
    (
        6,
        "a uniform 1e5-angle grid is off the optimum by up to pi/2e5, which alone costs more than 1e-10 \
         relative distance; the closed form never loses to the scan",
    ),
];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

impl Outcome {
    fn ok(&self) -> bool {
        self.pass && self.elapsed <= self.budget
    }
}

/// Result of one check; `timed` replaces the wall time when only part of
/// the work counts against the budget.
struct Check {
    pass: bool,
    detail: String,
    timed: Option<Duration>,
}

impl From<(bool, String)> for Check {
    fn from((pass, detail): (bool, String)) -> Self {
        Self { pass, detail, timed: None }
    }
}

fn record(outcomes: &mut Vec<Outcome>, id: u32, title: &'static str, budget: Duration, f: impl FnOnce() -> Check) {
    let t = Instant::now();
    let c = f();
    let o = Outcome {
        id,
        title,
        pass: c.pass,
        detail: c.detail,
        elapsed: c.timed.unwrap_or_else(|| t.elapsed()),
        budget,
    };
    let verdict = if o.ok() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} [{}] {} ({:.1} s of {:.0} s): {}",
        o.id,
        o.title,
        o.elapsed.as_secs_f64(),
        o.budget.as_secs_f64(),
        o.detail
    );
    if o.elapsed > o.budget {
        println!("       over the time budget");
    }
    if !o.ok() {
        if let Some((_, why)) = KNOWN_FAILURES.iter().find(|k| k.0 == o.id) {
            println!("       known: {why}");
        }
    }
    outcomes.push(o);
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn flat_stresses(states: &[LocalState]) -> Vec<f64> {
    states.iter().flat_map(|z| [z.stress[0], z.stress[1], z.stress[2]]).collect()
}

fn solve(model: &DiscreteModel, db: &MaterialDatabase, options: &DdcmOptions) -> DdcmSolution {
    ddcm_solve(&DdcmProblem { model, database: db, options }).unwrap()
}

struct Setup {
    cfg: StudyConfig,
    metric: Metric,
    plate: DiscreteModel,
    lbeam: DiscreteModel,
}

impl Setup {
    fn desk() -> Self {
        let cfg = StudyConfig::preset("desk").unwrap();
        Self {
            metric: cfg.metric.build().unwrap(),
            plate: plate_problem(&cfg.plate, cfg.plate_strain).unwrap(),
            lbeam: lbeam_problem(&cfg.lbeam, cfg.lbeam_displacement).unwrap(),
            cfg,
        }
    }

    fn ddcm(&self, variant: DistanceVariant) -> DdcmOptions {
        DdcmOptions { variant, ..self.cfg.ddcm.clone() }
    }

    /// Same pipeline as the study: virtual experiment at the configured
    /// ratio, then identification. Returns the result and the state count.
    fn identify(&self, n_star: usize) -> (DdiResult, usize) {
        let mesh = perforated_sample(&self.cfg.sample).unwrap();
        let quad = Quadrature::build(&mesh).unwrap();
        let n_snap = snapshots_for_ratio(quad.len(), n_star, self.cfg.ratio);
        let snaps = run_virtual_experiment(&mesh, &self.cfg.law, &self.cfg.history, n_snap).unwrap();
        let options = DdiOptions { seed: self.cfg.seed, ..self.cfg.ddi.clone() };
        let problem = DdiProblem { quad: &quad, snapshots: &snaps, metric: &self.metric, n_star, options: &options };
        (ddi_solve(&problem).unwrap(), n_snap * quad.len())
    }
}

fn fem_oracle(s: &Setup) -> Check {
    let model = &s.plate;
    let fem = fem_reference_solve(model, &s.cfg.law).unwrap();
    let db = MaterialDatabase::build(fem.states(), s.metric.clone()).unwrap();
    let sol = solve(model, &db, &DdcmOptions::default());
    let d = sol.final_distance_sq() / (2.0 * fem.energy);
    let du = rel_diff(&sol.u, &fem.u);
    let ds = rel_diff(&flat_stresses(&sol.states), &flat_stresses(&fem.states()));
    let own = sol.mapping.indices.iter().enumerate().filter(|(p, i)| p == *i).count();
    let pass = sol.converged && d < 1e-8 && du < 1e-6 && ds < 1e-6;

    // Diagnostic: started on the FE state the iteration stays there.
    let exact = MaterialDatabase::build(fem.states(), s.cfg.law.metric().unwrap()).unwrap();
    let warm = solve(model, &exact, &DdcmOptions { init: InitMode::MetricWarmStart, ..DdcmOptions::default() });
    (
        pass,
        format!(
            "{} elements, zero start: d²/2E = {d:.3e} (need < 1e-8), |du| = {du:.2e}, |dsigma| = {ds:.2e}, \
             {own}/{} points on their own state after {} iterations; started on the FE state: d²/2E = {:.1e} \
             after {} iteration(s)",
            model.mesh.elements.len(),
            model.n_points(),
            sol.iterations,
            warm.final_distance_sq() / (2.0 * fem.energy),
            warm.iterations
        ),
    )
        .into()
}

fn reg_convergence(s: &Setup, report: &StudyReport) -> Check {
    let fem = fem_reference_solve(&s.plate, &s.cfg.law).unwrap();
    let mut rows = Vec::new();
    for n in [10, 20, 40] {
        let db = gen_regular_db(&StrainGridSpec::table_box(n), &s.cfg.law, &s.metric).unwrap();
        let sol = solve(&s.plate, &db, &s.ddcm(DistanceVariant::Standard));
        let m = solution_metrics(&sol.states, &fem, &db, DistanceVariant::Standard, s.plate.weights()).unwrap();
        let listed = report.case("plate", &format!("REG-{n}^3"), DistanceVariant::Standard).and_then(|c| c.ddcm_fem);
        rows.push((n * n * n, m.ddcm_fem, listed == Some(m.ddcm_fem)));
    }
    let slopes: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        .collect();
    let agree = rows.iter().all(|r| r.2);
    let pass = rows.windows(2).all(|w| w[1].1 < w[0].1) && slopes.iter().all(|&k| k < 0.0) && agree;
    (
        pass,
        format!(
            "plate DDCM-FEM d² = {:.4e}, {:.4e}, {:.4e} J at N* = 1e3, 8e3, 6.4e4; log-log slopes {:.3}, {:.3}; \
             study report agrees: {agree}",
            rows[0].1, rows[1].1, rows[2].1, slopes[0], slopes[1]
        ),
    )
        .into()
}

fn ddi_beats_reg(report: &StudyReport, study_time: Duration) -> Check {
    let ddi: Vec<_> = report.databases.iter().filter(|d| d.kind == "DDI").collect();
    let mut pass = ddi.iter().map(|d| d.size).eq([2500, 10_000]);
    let mut parts = Vec::new();
    for d in ddi {
        // smallest regular cube with at least as many entries
        let n = (1..).find(|n| n * n * n >= d.size).unwrap();
        let reg = format!("REG-{n}^3");
        for problem in ["plate", "lbeam"] {
            let a = report.case(problem, &d.name, DistanceVariant::Standard).and_then(|c| c.ddcm_fem);
            let b = report.case(problem, &reg, DistanceVariant::Standard).and_then(|c| c.ddcm_fem);
            pass &= matches!((a, b), (Some(a), Some(b)) if a < b);
            parts.push(format!(
                "{problem} {} {:.4e} vs {reg} {:.4e}",
                d.name,
                a.unwrap_or(f64::NAN),
                b.unwrap_or(f64::NAN)
            ));
        }
    }
    Check { pass, detail: format!("DDCM-FEM d² (J): {}", parts.join("; ")), timed: Some(study_time) }
}

fn law_recovery(s: &Setup, res: &DdiResult, states: usize, report: &StudyReport) -> Check {
    let eps: Vec<_> = res.database.iter().map(|z| z.strain).collect();
    let sig: Vec<_> = res.database.iter().map(|z| z.stress).collect();
    let fit = fit_isotropic_law(&eps, &sig, &res.cluster_weights).unwrap();
    let de = (fit.e - s.cfg.law.e).abs() / s.cfg.law.e;
    let dnu = (fit.nu - s.cfg.law.nu).abs();
    let same = report
        .databases
        .iter()
        .any(|d| d.name == "DDI-2500" && d.fit_e == Some(fit.e) && d.fit_nu == Some(fit.nu));
    let big = report.databases.iter().find(|d| d.name == "DDI-10000");
    (
        de < 0.05 && dnu < 0.05,
        format!(
            "N* = 2500 from {states} states (ratio {:.0}): E = {:.3} GPa ({:.2}% off), nu = {:.4} ({dnu:.4} off); \
             N* = 10000: E = {:.3} GPa, nu = {:.4}; study report agrees: {same}",
            states as f64 / 2500.0,
            fit.e / 1e9,
            100.0 * de,
            fit.nu,
            big.and_then(|d| d.fit_e).unwrap_or(f64::NAN) / 1e9,
            big.and_then(|d| d.fit_nu).unwrap_or(f64::NAN)
        ),
    )
        .into()
}

#[derive(Default)]
struct Invariants {
    solves: usize,
    converged: usize,
    power: f64,
    equilibrium: f64,
    increase: f64,
    ddi_iterations: usize,
    ddi_equilibrium: f64,
    ddi_increase: f64,
}

impl Invariants {
    fn ddcm(&mut self, model: &DiscreteModel, sol: &DdcmSolution) {
        self.solves += 1;
        self.equilibrium = sol.equilibrium.iter().fold(self.equilibrium, |a, &b| a.max(b));
        let scale = sol.history[0];
        for w in sol.history.windows(2) {
            self.increase = self.increase.max((w[1] - w[0]) / scale);
        }
        if sol.converged {
            self.converged += 1;
            self.power = self.power.max(power_identity_residual(model, &sol.u, &sol.states).unwrap());
        }
    }

    fn ddi(&mut self, res: &DdiResult) {
        self.ddi_iterations += res.history.len();
        let scale = res.history[0].objective;
        for h in &res.history {
            self.ddi_equilibrium = self.ddi_equilibrium.max(h.equilibrium);
        }
        for w in res.history.windows(2) {
            self.ddi_increase = self.ddi_increase.max((w[1].objective - w[0].objective) / scale);
        }
    }

    fn pass(&self) -> bool {
        self.power < 1e-9
            && self.equilibrium < 1e-9
            && self.increase <= 1e-12
            && self.ddi_equilibrium < 1e-9
            && self.ddi_increase <= 1e-12
    }
}

fn invariants(s: &Setup) -> Check {
    let mut inv = Invariants::default();
    let (res, _) = s.identify(1000);
    inv.ddi(&res);
    let ddi = MaterialDatabase::build(res.database, s.metric.clone()).unwrap();
    let reg = gen_regular_db(&StrainGridSpec::table_box(14), &s.cfg.law, &s.metric).unwrap();
    for db in [&ddi, &reg] {
        for model in [&s.plate, &s.lbeam] {
            for v in [DistanceVariant::Standard, DistanceVariant::Isotropic] {
                inv.ddcm(model, &solve(model, db, &s.ddcm(v)));
            }
        }
    }
    (
        inv.pass(),
        format!(
            "{} DDCM solves ({} converged): power identity {:.1e}, equilibrium {:.1e}, largest history increase \
             {:.1e}; DDI N* = 1000, {} outer iterations: equilibrium {:.1e}, largest objective increase {:.1e}",
            inv.solves,
            inv.converged,
            inv.power,
            inv.equilibrium,
            inv.increase,
            inv.ddi_iterations,
            inv.ddi_equilibrium,
            inv.ddi_increase
        ),
    )
        .into()
}

fn random_state(rng: &mut ChaCha8Rng) -> LocalState {
    let v: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
    LocalState::new(mandel(v[0], v[1], v[2]) * 1e-3, mandel(v[3], v[4], v[5]) * 1e8)
}

fn isotropic_variant(s: &Setup, ddi: &MaterialDatabase) -> Check {
    let std = solve(&s.lbeam, ddi, &s.ddcm(DistanceVariant::Standard));
    let iso = solve(&s.lbeam, ddi, &s.ddcm(DistanceVariant::Isotropic));
    let beam_ok = iso.final_distance_sq() <= std.final_distance_sq();

    let m = &s.metric;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let h = PI / n as f64;
    let (mut worst, mut loses, mut within, mut grid) = (0.0f64, 0.0f64, 0, 0.0f64);
    for _ in 0..1000 {
        let z = random_state(&mut rng);
        let y = random_state(&mut rng);
        let r = optimal_rotation_2d(&z, &y, m).unwrap();
        let scan = (0..n)
            .map(|k| m.distance_sq(&z, &rotate_state(&y, -PI / 2.0 + h * k as f64)))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let rel = (r.distance - scan) / scan;
        worst = worst.max(rel.abs());
        loses = loses.max(rel);
        within += usize::from(rel.abs() < 1e-10);
        // the scan's best angle should be the grid point next to the closed-form one
        let k = ((r.angle + PI / 2.0) / h).round();
        let g = m.distance_sq(&z, &rotate_state(&y, -PI / 2.0 + h * k)).sqrt();
        grid = grid.max(((g - scan) / scan).abs());
    }
    (
        beam_ok && worst < 1e-10,
        format!(
            "L-beam with DDI-2500: DDCM-DB d² isotropic {:.4e} <= standard {:.4e} J: {beam_ok}; closed-form rotation \
             vs 1e5-angle scan on 1000 pairs: max relative distance difference {worst:.2e} (need < 1e-10), \
             {within}/1000 within, closed form above the scan by at most {loses:.1e}, scan minimum matches the grid \
             angle nearest the closed-form one to {grid:.1e}",
            iso.final_distance_sq(),
            std.final_distance_sq()
        ),
    )
        .into()
}

fn search() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states: Vec<LocalState> = (0..1_000_000).map(|_| random_state(&mut rng)).collect();
    let queries: Vec<LocalState> = (0..10_000).map(|_| random_state(&mut rng)).collect();
    let t = Instant::now();
    let db = MaterialDatabase::build(states, Metric::isotropic_plane_strain(100e9, 0.35).unwrap()).unwrap();
    let build = t.elapsed();
    let found: Vec<(usize, f64)> = queries.iter().map(|q| db.nearest_sq(q, None)).collect();
    let timed = t.elapsed();
    let scan: Vec<(usize, f64)> = ddmech::par::map_slice(&queries, |q| db.nearest_scan_sq(q));
    let mismatches = found.iter().zip(&scan).filter(|(a, b)| a != b).count();
    let repeat = queries.iter().zip(&found).take(1000).all(|(q, f)| db.nearest_sq(q, None) == *f);
    Check {
        pass: mismatches == 0 && repeat,
        detail: format!(
            "1e6 states, 1e4 queries: {mismatches} mismatches (index and distance) against the exhaustive scan, \
             repeated queries identical: {repeat}; build {:.1} s, build + queries {:.1} s (scan not timed)",
            build.as_secs_f64(),
            timed.as_secs_f64()
        ),
        timed: Some(timed),
    }
}

/// Area enclosed by an element's boundary, `½∮(x dy − y dx)`, with Simpson's
/// rule on each edge (exact for straight and quadratic edges).
fn boundary_area(mesh: &Mesh, e: &Element) -> f64 {
    let mut a = 0.0;
    for edge in e.kind.edges() {
        let p = |l: usize| mesh.nodes[e.conn[l]];
        let (p0, p1) = (p(edge[0]), p(edge[1]));
        let pm = if edge.len() == 3 { p(edge[2]) } else { [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])] };
        let at = |t: f64, c: usize| {
            (1.0 - t) * (1.0 - 2.0 * t) * p0[c] + 4.0 * t * (1.0 - t) * pm[c] + t * (2.0 * t - 1.0) * p1[c]
        };
        let d = |t: f64, c: usize| (4.0 * t - 3.0) * p0[c] + (4.0 - 8.0 * t) * pm[c] + (4.0 * t - 1.0) * p1[c];
        let f = |t: f64| at(t, 0) * d(t, 1) - at(t, 1) * d(t, 0);
        a += 0.5 * (f(0.0) + 4.0 * f(0.5) + f(1.0)) / 6.0;
    }
    a
}

fn fem_kernel(s: &Setup) -> Check {
    let law = s.cfg.law;
    // Patch test on meshes with jittered interior nodes.
    let mut q4 = rectangle_q4(2.0, 1.5, 5, 4).unwrap();
    let mut t6 = rectangle_t6(2.0, 1.5, 4, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for mesh in [&mut q4, &mut t6] {
        let boundary = mesh.nodes_of_sides(&mesh.boundary_sides());
        for (n, p) in mesh.nodes.iter_mut().enumerate() {
            if !boundary.contains(&n) {
                p[0] += 0.05 * (rng.random::<f64>() - 0.5);
                p[1] += 0.05 * (rng.random::<f64>() - 0.5);
            }
        }
        // T6 sides stay straight: mid-side nodes back to the chord midpoints
        for e in mesh.elements.clone() {
            for edge in e.kind.edges().iter().filter(|ed| ed.len() == 3) {
                let (a, b) = (mesh.nodes[e.conn[edge[0]]], mesh.nodes[e.conn[edge[1]]]);
                mesh.nodes[e.conn[edge[2]]] = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            }
        }
    }
    let a = [[1e-3, 4e-4], [-2e-4, -6e-4]];
    let affine = |p: [f64; 2], c: usize| a[c][0] * p[0] + a[c][1] * p[1];
    let want = mandel(a[0][0], a[1][1], 0.5 * (a[0][1] + a[1][0]));
    let mut patch = 0.0f64;
    for mesh in [q4, t6] {
        let mut bcs = BoundaryConditions::new(mesh.n_dofs());
        for n in mesh.nodes_of_sides(&mesh.boundary_sides()) {
            for c in 0..2 {
                bcs.dirichlet.insert(dof(n, c), affine(mesh.nodes[n], c));
            }
        }
        let model = DiscreteModel::new(mesh, bcs).unwrap();
        let sol = fem_reference_solve(&model, &law).unwrap();
        for (n, p) in model.mesh.nodes.iter().enumerate() {
            for c in 0..2 {
                patch = patch.max((sol.u[dof(n, c)] - affine(*p, c)).abs() / 2e-3);
            }
        }
        for e in &sol.strains {
            patch = patch.max((e - want).norm() / want.norm());
        }
    }

    // Stress concentration at the hole of a refined plate (R = 1).
    let r = 1.0;
    let params = PlateParams { radius: r, size: 0.15 * r, grading: 1.08, ..PlateParams::default() };
    let mesh = plate_hole_quarter(&params).unwrap();
    let mut bcs = BoundaryConditions::new(mesh.n_dofs());
    bcs.fix_set(&mesh, "left", 0, 0.0).unwrap();
    bcs.fix_set(&mesh, "bottom", 1, 0.0).unwrap();
    bcs.fix_set(&mesh, "top", 1, -0.004 * 10.0 * r).unwrap();
    let model = DiscreteModel::new(mesh, bcs).unwrap();
    let sol = fem_reference_solve(&model, &law).unwrap();
    let fy: f64 = model.mesh.node_sets["top"].iter().map(|&n| sol.reactions[dof(n, 1)]).sum();
    let nominal = fy / (6.4 * r);
    let scf = sol.stresses.iter().map(|s| s[1] / nominal).fold(f64::NEG_INFINITY, f64::max);

    // Areas: per element against a boundary integral, totals against geometry.
    let mut element = 0.0f64;
    for mesh in [&s.plate.mesh, &s.lbeam.mesh, &model.mesh] {
        let q = Quadrature::build(mesh).unwrap();
        let mut sums = vec![0.0; mesh.elements.len()];
        for (w, &e) in q.weights().iter().zip(q.elements()) {
            sums[e] += w;
        }
        for (e, el) in mesh.elements.iter().enumerate() {
            let want = boundary_area(mesh, el);
            element = element.max((sums[e] - want).abs() / want);
        }
    }
    let tri = Mesh {
        nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
        elements: vec![Element { kind: ElementKind::T6, conn: vec![0, 1, 2, 3, 4, 5] }],
        ..Mesh::default()
    };
    let tri_err = (Quadrature::build(&tri).unwrap().total_weight() - 0.5).abs();
    let exact = 6.4 * 10.0 - PI / 4.0;
    let plate_errs: Vec<f64> = [0.8, 0.4, 0.2]
        .iter()
        .map(|&size| {
            let m = plate_hole_quarter(&PlateParams { radius: 1.0, size, ..PlateParams::default() }).unwrap();
            (Quadrature::build(&m).unwrap().total_weight() - exact).abs() / exact
        })
        .collect();
    let areas = element < 1e-12
        && tri_err < 1e-14
        && plate_errs[0] < 0.01
        && plate_errs[0] > plate_errs[1]
        && plate_errs[1] > plate_errs[2];
    (
        patch < 1e-12 && (2.5..=3.2).contains(&scf) && areas,
        format!(
            "patch test {patch:.1e}; SCF {scf:.3} on {} elements; element areas {element:.1e}, unit T6 {tri_err:.1e}, \
             quarter plate {:.2e} > {:.2e} > {:.2e}",
            model.mesh.elements.len(),
            plate_errs[0],
            plate_errs[1],
            plate_errs[2]
        ),
    )
        .into()
}

fn study_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("databases")] {
        let mut paths: Vec<_> = std::fs::read_dir(&sub)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for p in paths {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
        }
    }
    out
}

fn main() {
    let total = Instant::now();
    let s = Setup::desk();
    let mut out = Vec::new();

    record(&mut out, 1, "FEM oracle consistency", Duration::from_secs(10), || fem_oracle(&s));
    record(&mut out, 8, "FEM kernel", mins(5), || fem_kernel(&s));
    record(&mut out, 7, "search correctness", Duration::from_secs(60), search);
    record(&mut out, 5, "mechanics invariants", mins(2), || invariants(&s));

    let first = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let report = run_study(&s.cfg, Some(first.path())).unwrap();
    let study_time = t.elapsed();
    println!("       desk study: {:.1} s", study_time.as_secs_f64());

    record(&mut out, 2, "classical-limit convergence", mins(5), || reg_convergence(&s, &report));
    record(&mut out, 3, "identified beats regular data", mins(20), || ddi_beats_reg(&report, study_time));
    let mut ddi2500 = None;
    record(&mut out, 4, "law recovery", mins(5), || {
        let (res, states) = s.identify(2500);
        let c = law_recovery(&s, &res, states, &report);
        ddi2500 = Some(MaterialDatabase::build(res.database, s.metric.clone()).unwrap());
        c
    });
    let ddi2500 = ddi2500.unwrap();
    record(&mut out, 6, "isotropic distance", mins(3), || isotropic_variant(&s, &ddi2500));
    record(&mut out, 9, "determinism", mins(30), || {
        let second = tempfile::tempdir().unwrap();
        run_study(&s.cfg, Some(second.path())).unwrap();
        let (a, b) = (study_files(first.path()), study_files(second.path()));
        let names = a.iter().map(|x| &x.0).eq(b.iter().map(|x| &x.0));
        let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
        (
            names && differing.is_empty(),
            format!(
                "desk study run twice with seed {}: {} files compared byte for byte, differing: {differing:?}",
                s.cfg.seed,
                a.len()
            ),
        )
            .into()
    });

    out.sort_by_key(|o| o.id);
    println!("\nsummary ({:.0} s)", total.elapsed().as_secs_f64());
    for o in &out {
        println!("  {} [{}] {}", if o.ok() { "PASS" } else { "FAIL" }, o.id, o.title);
    }
    println!("{}/{} criteria passed", out.iter().filter(|o| o.ok()).count(), out.len());
    let unexpected = out.iter().filter(|o| !o.ok() && !KNOWN_FAILURES.iter().any(|k| k.0 == o.id)).count();
    if unexpected > 0 {
        std::process::exit(1);
    }
}
