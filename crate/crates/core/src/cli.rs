//! Command-line front end.
//!
//! Every subcommand reads a JSON config (unknown keys rejected), echoes the
//! resolved config into its output directory and stamps each output with a
//! provenance header. Exit codes: 2 invalid input, 3 numerical failure,
//! 4 I/O failure.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datagen::meshgen::{gen_mesh, LBeamParams, MeshSpec, PlateParams, SampleParams};
use crate::datagen::{
    fit_isotropic_law, gen_regular_db, lbeam_problem, plate_problem, run_virtual_experiment, LinearElasticLaw,
    LoadHistory, StrainGridSpec,
};
use crate::ddcm::{
    ddcm_solve, power_identity_residual, solution_metrics, DdcmOptions, DdcmProblem, DdcmSolution, DistanceVariant,
    InitMode,
};
use crate::ddi::{ddi_solve, DdiOptions, DdiProblem};
use crate::fe::{dof, fem_reference_solve, BoundaryConditions, DiscreteModel, Quadrature};
use crate::io::{self, CellField, DatabaseFile, MetricSpec, Provenance};
use crate::phase_space::MaterialDatabase;
use crate::study::{run_study, StudyConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ddmech", version, about = "Data-driven identification and distance-minimizing solvers")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh from a preset (plate, lbeam, sample).
    GenMesh {
        #[arg(long)]
        preset: String,
        /// JSON parameter overrides for the preset.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a regular database from the reference linear law.
    GenDb {
        /// REG-DB1, REG-DB2 or REG-DB3.
        #[arg(long, conflicts_with = "grid")]
        preset: Option<String>,
        /// JSON strain grid instead of a preset.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 217.5e9)]
        e: f64,
        #[arg(long, default_value_t = 0.3)]
        nu: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a virtual biaxial experiment and write the snapshot set.
    GenSnapshots {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Classical linear-elastic reference solution.
    Fem {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Identify a material database from a snapshot set.
    Ddi {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve a boundary-value problem against a database.
    Ddcm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve against a database and compare with the FE reference.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Full identification and comparison study.
    Study {
        /// smoke, desk or full.
        #[arg(long, default_value = "smoke", conflicts_with = "config")]
        preset: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Prescribed value on one component of every node of a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetValue {
    pub set: String,
    pub component: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Plate {
        #[serde(default)]
        params: PlateParams,
        strain: f64,
    },
    Lbeam {
        #[serde(default)]
        params: LBeamParams,
        displacement: f64,
    },
    Custom {
        mesh: PathBuf,
        dirichlet: Vec<SetValue>,
        /// Force on each node of the set (N).
        #[serde(default)]
        forces: Vec<SetValue>,
    },
}

impl ProblemSpec {
    fn resolve(&mut self, base: &Path) {
        if let ProblemSpec::Custom { mesh, .. } = self {
            *mesh = base.join(&*mesh);
        }
    }

    pub fn build(&self) -> Result<DiscreteModel> {
        match self {
            ProblemSpec::Plate { params, strain } => plate_problem(params, *strain),
            ProblemSpec::Lbeam { params, displacement } => lbeam_problem(params, *displacement),
            ProblemSpec::Custom { mesh, dirichlet, forces } => {
                let (mesh, _) = io::read_mesh(mesh)?;
                let mut bcs = BoundaryConditions::new(mesh.n_dofs());
                for d in dirichlet {
                    check_component(d)?;
                    bcs.fix_set(&mesh, &d.set, d.component, d.value)
                        .map_err(|e| Error::BoundaryConditions(e.to_string()))?;
                }
                for f in forces {
                    check_component(f)?;
                    for &n in mesh.node_set(&f.set).map_err(|e| Error::BoundaryConditions(e.to_string()))? {
                        bcs.forces[dof(n, f.component)] += f.value;
                    }
                }
                DiscreteModel::new(mesh, bcs)
            }
        }
    }
}

fn check_component(s: &SetValue) -> Result<()> {
    if s.component > 1 {
        return Err(Error::BoundaryConditions(format!("component {} of set `{}`", s.component, s.set)));
    }
    Ok(())
}

fn reference_law() -> LinearElasticLaw {
    LinearElasticLaw { e: 217.5e9, nu: 0.3 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemConfig {
    pub problem: ProblemSpec,
    #[serde(default = "reference_law")]
    pub law: LinearElasticLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub sample: SampleParams,
    #[serde(default = "reference_law")]
    pub law: LinearElasticLaw,
    #[serde(default)]
    pub history: LoadHistory,
    pub snapshots: usize,
    /// Metric recorded in the manifest for identification.
    #[serde(default)]
    pub metric: MetricSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdiConfig {
    /// Snapshot manifest.
    pub snapshots: PathBuf,
    pub n_star: usize,
    /// Defaults to the manifest's metric.
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub options: DdiOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdcmConfig {
    pub problem: ProblemSpec,
    pub database: PathBuf,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub options: DdcmOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub problem: ProblemSpec,
    pub database: PathBuf,
    #[serde(default = "reference_law")]
    pub law: LinearElasticLaw,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default = "default_variants")]
    pub variants: Vec<DistanceVariant>,
    #[serde(default)]
    pub options: DdcmOptions,
}

fn default_variants() -> Vec<DistanceVariant> {
    vec![DistanceVariant::Standard]
}

/// Distances of one compare run, computed twice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub provenance: Provenance,
    pub variant: DistanceVariant,
    /// Squared distances (J).
    pub fem_db: f64,
    pub ddcm_db: f64,
    pub ddcm_fem: f64,
    pub energy_fem: f64,
    pub energy_ddcm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycling: bool,
    pub power_identity_residual: f64,
    /// The same three distances re-computed from the written files.
    pub streamed: StreamedDistances,
    pub max_relative_discrepancy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamedDistances {
    pub fem_db: f64,
    pub ddcm_db: f64,
    pub ddcm_fem: f64,
}

/// Reads a config; parse and schema errors are configuration errors.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = io::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs the parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMesh { preset, params, output } => {
            let spec = mesh_spec(&preset, params.as_deref())?;
            let mesh = gen_mesh(&spec)?;
            let prov = Provenance::new(&spec, None, Some(&preset));
            io::write_mesh(&output, &mesh, &prov.lines())?;
            log::info!("mesh: {} elements, {} nodes", mesh.elements.len(), mesh.n_nodes());
            Ok(())
        }
        Command::GenDb { preset, grid, e, nu, output } => {
            let spec = match (&preset, &grid) {
                (Some(p), None) => StrainGridSpec::preset(p)?,
                (None, Some(g)) => load_config(g)?,
                _ => return Err(Error::Config("exactly one of --preset and --grid is required".into())),
            };
            let law = LinearElasticLaw::new(e, nu)?;
            let db = gen_regular_db(&spec, &law, &MetricSpec::default().build()?)?;
            let prov = Provenance::new(&(&spec, &law), None, preset.as_deref());
            let mut lines = prov.lines();
            lines.push(format!("law: E = {e}, nu = {nu}"));
            io::write_database(&output, &DatabaseFile::from_states(db.states(), lines))
        }
        Command::GenSnapshots { config, output } => {
            let cfg: ExperimentConfig = load_config(&config)?;
            if cfg.snapshots == 0 {
                return Err(Error::Config("snapshots must be positive".into()));
            }
            cfg.metric.build()?;
            LinearElasticLaw::new(cfg.law.e, cfg.law.nu)?;
            let prov = Provenance::new(&cfg, None, None);
            io::write_json(&output.join("config.json"), &cfg)?;
            let mesh = crate::datagen::meshgen::perforated_sample(&cfg.sample)?;
            let snaps = run_virtual_experiment(&mesh, &cfg.law, &cfg.history, cfg.snapshots)?;
            io::write_snapshots(&output, &mesh, cfg.metric, &snaps, &prov.lines())?;
            Ok(())
        }
        Command::Fem { config, output } => {
            let mut cfg: FemConfig = load_config(&config)?;
            cfg.problem.resolve(&base_dir(&config));
            run_fem(&cfg, &output)
        }
        Command::Ddi { config, seed, output } => {
            let mut cfg: DdiConfig = load_config(&config)?;
            cfg.snapshots = base_dir(&config).join(&cfg.snapshots);
            if let Some(s) = seed {
                cfg.options.seed = s;
            }
            run_ddi(&cfg, &output)
        }
        Command::Ddcm { config, seed, output } => {
            let mut cfg: DdcmConfig = load_config(&config)?;
            cfg.problem.resolve(&base_dir(&config));
            cfg.database = base_dir(&config).join(&cfg.database);
            if let (Some(s), InitMode::RandomDatabase { seed }) = (seed, &mut cfg.options.init) {
                *seed = s;
            }
            run_ddcm(&cfg, &output)
        }
        Command::Compare { config, seed, output } => {
            let mut cfg: CompareConfig = load_config(&config)?;
            cfg.problem.resolve(&base_dir(&config));
            cfg.database = base_dir(&config).join(&cfg.database);
            if let (Some(s), InitMode::RandomDatabase { seed }) = (seed, &mut cfg.options.init) {
                *seed = s;
            }
            run_compare(&cfg, &output).map(|_| ())
        }
        Command::Study { preset, config, seed, output } => {
            let mut cfg = match config {
                Some(p) => load_config(&p)?,
                None => StudyConfig::preset(&preset)?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            run_study(&cfg, Some(&output)).map(|_| ())
        }
    }
}

fn mesh_spec(preset: &str, params: Option<&Path>) -> Result<MeshSpec> {
    Ok(match preset {
        "plate" => MeshSpec::PlateHoleQuarter(params.map(load_config).transpose()?.unwrap_or_default()),
        "lbeam" => MeshSpec::LBeam(params.map(load_config).transpose()?.unwrap_or_default()),
        "sample" => MeshSpec::PerforatedSample(params.map(load_config).transpose()?.unwrap_or_default()),
        _ => return Err(Error::Config(format!("unknown mesh preset `{preset}` (plate, lbeam, sample)"))),
    })
}

fn read_db(path: &Path, metric: &MetricSpec) -> Result<MaterialDatabase> {
    let file = io::read_database(path)?;
    MaterialDatabase::build(file.states(), metric.build()?)
}

fn run_fem(cfg: &FemConfig, out: &Path) -> Result<()> {
    let prov = Provenance::new(cfg, None, None);
    io::write_json(&out.join("config.json"), cfg)?;
    LinearElasticLaw::new(cfg.law.e, cfg.law.nu)?;
    let model = cfg.problem.build()?;
    let sol = fem_reference_solve(&model, &cfg.law)?;
    let ne = model.mesh.elements.len();
    io::write_vtk(
        &out.join("fem.vtk"),
        &model.mesh,
        &vtk_title(&prov),
        &[("u", &sol.u), ("reaction", &sol.reactions)],
        &[
            ("strain", CellField::Tensor(io::element_average_tensor(&model.quad, ne, &sol.strains))),
            ("stress", CellField::Tensor(io::element_average_tensor(&model.quad, ne, &sol.stresses))),
        ],
    )?;
    io::write_text(
        &out.join("states.csv"),
        &io::states_csv(&prov.lines(), model.weights(), &sol.states()),
    )?;
    io::write_json(
        &out.join("report.json"),
        &serde_json::json!({ "provenance": prov, "energy": sol.energy, "points": model.n_points() }),
    )
}

fn vtk_title(prov: &Provenance) -> String {
    format!(
        "{} {} config_sha256={} seed={}",
        prov.tool,
        prov.version,
        prov.config_sha256,
        prov.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
    )
}

fn run_ddi(cfg: &DdiConfig, out: &Path) -> Result<()> {
    let prov = Provenance::new(cfg, Some(cfg.options.seed), None);
    io::write_json(&out.join("config.json"), cfg)?;
    let (manifest, mesh, snaps) = io::read_snapshots(&cfg.snapshots)?;
    let metric = cfg.metric.unwrap_or(manifest.metric).build()?;
    let quad = Quadrature::build(&mesh)?;
    let res = ddi_solve(&DdiProblem {
        quad: &quad,
        snapshots: &snaps,
        metric: &metric,
        n_star: cfg.n_star,
        options: &cfg.options,
    })?;
    io::write_database(
        &out.join("database.csv"),
        &DatabaseFile::from_states(&res.database, prov.lines()),
    )?;
    let mut hist = String::new();
    for line in prov.lines() {
        hist.push_str(&format!("# {line}\n"));
    }
    hist.push_str("iteration,objective,cg_iterations,equilibrium,mapping_changes\n");
    for (k, h) in res.history.iter().enumerate() {
        hist.push_str(&format!(
            "{k},{:.16e},{},{:.16e},{}\n",
            h.objective, h.cg_iterations, h.equilibrium, h.changes
        ));
    }
    io::write_text(&out.join("history.csv"), &hist)?;
    let eps: Vec<_> = res.database.iter().map(|z| z.strain).collect();
    let sig: Vec<_> = res.database.iter().map(|z| z.stress).collect();
    let fit = fit_isotropic_law(&eps, &sig, &res.cluster_weights).ok();
    io::write_json(
        &out.join("report.json"),
        &serde_json::json!({
            "provenance": prov,
            "n_star": cfg.n_star,
            "snapshots": snaps.len(),
            "iterations": res.iterations,
            "converged": res.converged,
            "objective": res.objective,
            "fit": fit,
        }),
    )
}

fn write_solution(
    out: &Path,
    prefix: &str,
    prov: &Provenance,
    model: &DiscreteModel,
    sol: &DdcmSolution,
    distance: Vec<f64>,
) -> Result<()> {
    let ne = model.mesh.elements.len();
    let strains: Vec<_> = sol.states.iter().map(|z| z.strain).collect();
    let stresses: Vec<_> = sol.states.iter().map(|z| z.stress).collect();
    io::write_vtk(
        &out.join(format!("{prefix}.vtk")),
        &model.mesh,
        &vtk_title(prov),
        &[("u", &sol.u), ("lambda", &sol.lambda)],
        &[
            ("strain", CellField::Tensor(io::element_average_tensor(&model.quad, ne, &strains))),
            ("stress", CellField::Tensor(io::element_average_tensor(&model.quad, ne, &stresses))),
            ("distance", CellField::Scalar(io::element_average_scalar(&model.quad, ne, &distance))),
        ],
    )?;
    io::write_text(
        &out.join(format!("{prefix}_history.csv")),
        &io::history_csv(&prov.lines(), &sol.history, &sol.changes),
    )
}

fn run_ddcm(cfg: &DdcmConfig, out: &Path) -> Result<()> {
    let seed = match cfg.options.init {
        InitMode::RandomDatabase { seed } => Some(seed),
        _ => None,
    };
    let prov = Provenance::new(cfg, seed, None);
    io::write_json(&out.join("config.json"), cfg)?;
    let model = cfg.problem.build()?;
    let db = read_db(&cfg.database, &cfg.metric)?;
    let sol = ddcm_solve(&DdcmProblem {
        model: &model,
        database: &db,
        options: &cfg.options,
    })?;
    let (_, d) = crate::ddcm::project_to_data(&sol.states, &db, cfg.options.variant, Some(&sol.mapping))?;
    let power = power_identity_residual(&model, &sol.u, &sol.states)?;
    write_solution(out, "ddcm", &prov, &model, &sol, d.iter().map(|v| v.max(0.0).sqrt()).collect())?;
    io::write_json(
        &out.join("report.json"),
        &serde_json::json!({
            "provenance": prov,
            "variant": cfg.options.variant,
            "ddcm_db": sol.final_distance_sq(),
            "iterations": sol.iterations,
            "converged": sol.converged,
            "cycling": sol.cycling,
            "power_identity_residual": power,
        }),
    )
}

/// Runs every requested variant and returns the reports (also written as
/// `metrics_<variant>.json`).
pub fn run_compare(cfg: &CompareConfig, out: &Path) -> Result<Vec<MetricsReport>> {
    let seed = match cfg.options.init {
        InitMode::RandomDatabase { seed } => Some(seed),
        _ => None,
    };
    let prov = Provenance::new(cfg, seed, None);
    io::write_json(&out.join("config.json"), cfg)?;
    if cfg.variants.is_empty() {
        return Err(Error::Config("variants must not be empty".into()));
    }
    LinearElasticLaw::new(cfg.law.e, cfg.law.nu)?;
    let model = cfg.problem.build()?;
    let db = read_db(&cfg.database, &cfg.metric)?;
    let reference = fem_reference_solve(&model, &cfg.law)?;
    let fem_path = out.join("fem_states.csv");
    io::write_text(&fem_path, &io::states_csv(&prov.lines(), model.weights(), &reference.states()))?;

    let mut reports = Vec::new();
    for &variant in &cfg.variants {
        let name = serde_json::to_value(variant)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let opts = DdcmOptions { variant, ..cfg.options.clone() };
        let sol = ddcm_solve(&DdcmProblem {
            model: &model,
            database: &db,
            options: &opts,
        })?;
        let m = solution_metrics(&sol.states, &reference, &db, variant, model.weights())?;
        let sol_path = out.join(format!("ddcm_{name}_states.csv"));
        io::write_text(&sol_path, &io::states_csv(&prov.lines(), model.weights(), &sol.states))?;
        write_solution(out, &format!("ddcm_{name}"), &prov, &model, &sol, m.abs_field.clone())?;

        let streamed = streamed_distances(&cfg.database, &fem_path, &sol_path, &cfg.metric, variant)?;
        let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        let discrepancy = rel(m.fem_db, streamed.fem_db)
            .max(rel(m.ddcm_db, streamed.ddcm_db))
            .max(rel(m.ddcm_fem, streamed.ddcm_fem));
        let report = MetricsReport {
            provenance: prov.clone(),
            variant,
            fem_db: m.fem_db,
            ddcm_db: m.ddcm_db,
            ddcm_fem: m.ddcm_fem,
            energy_fem: m.energy_fem,
            energy_ddcm: m.energy_ddcm,
            iterations: sol.iterations,
            converged: sol.converged,
            cycling: sol.cycling,
            power_identity_residual: power_identity_residual(&model, &sol.u, &sol.states)?,
            streamed,
            max_relative_discrepancy: discrepancy,
        };
        io::write_json(&out.join(format!("metrics_{name}.json")), &report)?;
        if !(discrepancy <= 1e-10) {
            return Err(Error::Solver(format!(
                "distance routes disagree by {discrepancy:.3e} (relative) for the {name} variant"
            )));
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Tensor-component state read back from a CSV row.
#[derive(Clone, Copy, Debug)]
struct Row {
    eps: [f64; 3],
    sig: [f64; 3],
}

/// Streams the numeric rows of one of our CSV files; `weighted` files carry
/// a leading weight column.
fn stream_rows(path: &Path, weighted: bool, mut f: impl FnMut(f64, Row)) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header_seen = false;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", k + 1)))?;
        let off = usize::from(weighted);
        if vals.len() != 6 + off {
            return Err(Error::format(path, format!("line {}: {} fields", k + 1, vals.len())));
        }
        let w = if weighted { vals[0] } else { 1.0 };
        f(
            w,
            Row {
                eps: [vals[off], vals[off + 1], vals[off + 2]],
                sig: [vals[off + 3], vals[off + 4], vals[off + 5]],
            },
        );
    }
    Ok(())
}

/// Plane-strain isotropic energy norm in tensor components:
/// `λ (tr ε)² + 2μ ε:ε` and its complementary counterpart.
struct TensorMetric {
    lambda: f64,
    mu: f64,
}

impl TensorMetric {
    fn dist_sq(&self, a: &Row, b: &Row) -> f64 {
        let de = [a.eps[0] - b.eps[0], a.eps[1] - b.eps[1], a.eps[2] - b.eps[2]];
        let ds = [a.sig[0] - b.sig[0], a.sig[1] - b.sig[1], a.sig[2] - b.sig[2]];
        let (l, m) = (self.lambda, self.mu);
        let tr_e = de[0] + de[1];
        let ee = de[0] * de[0] + de[1] * de[1] + 2.0 * de[2] * de[2];
        let tr_s = ds[0] + ds[1];
        let ss = ds[0] * ds[0] + ds[1] * ds[1] + 2.0 * ds[2] * ds[2];
        l * tr_e * tr_e + 2.0 * m * ee + (ss - l / (2.0 * (l + m)) * tr_s * tr_s) / (2.0 * m)
    }

    /// Minimum over in-plane rotations of `b`. The squared distance is
    /// `A + B cos 2θ + C sin 2θ`; three samples fix the coefficients.
    fn iso_dist_sq(&self, a: &Row, b: &Row) -> f64 {
        let d0 = self.dist_sq(a, b);
        let d45 = self.dist_sq(a, &rotate_row(b, std::f64::consts::FRAC_PI_4));
        let d90 = self.dist_sq(a, &rotate_row(b, std::f64::consts::FRAC_PI_2));
        let aa = 0.5 * (d0 + d90);
        let bb = 0.5 * (d0 - d90);
        let cc = d45 - aa;
        (aa - bb.hypot(cc)).min(d0).max(0.0)
    }
}

fn rotate_tensor(t: [f64; 3], th: f64) -> [f64; 3] {
    // R T Rᵀ with T = [[xx, xy], [xy, yy]].
    let (s, c) = th.sin_cos();
    let [xx, yy, xy] = t;
    [
        c * c * xx - 2.0 * c * s * xy + s * s * yy,
        s * s * xx + 2.0 * c * s * xy + c * c * yy,
        c * s * (xx - yy) + (c * c - s * s) * xy,
    ]
}

fn rotate_row(r: &Row, th: f64) -> Row {
    Row {
        eps: rotate_tensor(r.eps, th),
        sig: rotate_tensor(r.sig, th),
    }
}

/// Second route for the three distances: re-reads the database and both
/// state files and scans the database exhaustively, in tensor components.
pub fn streamed_distances(
    db_path: &Path,
    fem_path: &Path,
    sol_path: &Path,
    metric: &MetricSpec,
    variant: DistanceVariant,
) -> Result<StreamedDistances> {
    let (e, nu) = (metric.e, metric.nu);
    let tm = TensorMetric {
        lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        mu: e / (2.0 * (1.0 + nu)),
    };
    let mut db = Vec::new();
    stream_rows(db_path, false, |_, r| db.push(r))?;
    let nearest = |z: &Row| {
        db.iter()
            .map(|y| match variant {
                DistanceVariant::Standard => tm.dist_sq(z, y),
                DistanceVariant::Isotropic => tm.iso_dist_sq(z, y),
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut fem = Vec::new();
    let mut fem_db = 0.0;
    stream_rows(fem_path, true, |w, r| {
        fem_db += w * nearest(&r);
        fem.push(r);
    })?;
    let mut ddcm_db = 0.0;
    let mut ddcm_fem = 0.0;
    let mut k = 0;
    stream_rows(sol_path, true, |w, r| {
        ddcm_db += w * nearest(&r);
        if let Some(f) = fem.get(k) {
            ddcm_fem += w * tm.dist_sq(&r, f);
        }
        k += 1;
    })?;
    if k != fem.len() {
        return Err(Error::format(sol_path, "point count differs from the reference"));
    }
    Ok(StreamedDistances { fem_db, ddcm_db, ddcm_fem })
}

/// Entry point: parses `argv`, runs, reports errors on stderr and returns the
/// exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    // Verbosity comes from flags only; RAYON_NUM_THREADS is the one
    // environment variable that matters.
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error[{code}]: {e}");
            code
        }
    }
}
