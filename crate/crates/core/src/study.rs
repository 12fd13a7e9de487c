//! End-to-end study: virtual experiment, identification at several database
//! sizes, regular reference databases, data-driven solves of the plate and
//! L-beam problems against each database, and a consolidated report.
//!
//! The report contains no timings or host details, so identical configs give
//! byte-identical reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::meshgen::{perforated_sample, LBeamParams, PlateParams, SampleParams};
use crate::datagen::{
    fit_isotropic_law, gen_regular_db, lbeam_problem, plate_problem, run_virtual_experiment, snapshots_for_ratio,
    LinearElasticLaw, LoadHistory, StrainGridSpec,
};
use crate::ddcm::{ddcm_solve, solution_metrics, DdcmOptions, DdcmProblem, DistanceVariant};
use crate::ddi::{ddi_solve, DdiOptions, DdiProblem};
use crate::fe::{fem_reference_solve, DiscreteModel, FemSolution, Quadrature};
use crate::io::{self, DatabaseFile, MetricSpec, Provenance};
use crate::phase_space::{LocalState, MaterialDatabase};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub preset: String,
    pub seed: u64,
    /// Reference material of the virtual experiment and the REG databases.
    pub law: LinearElasticLaw,
    pub metric: MetricSpec,
    pub sample: SampleParams,
    pub history: LoadHistory,
    /// Target mechanical states per identified database entry.
    pub ratio: f64,
    pub ddi_sizes: Vec<usize>,
    /// Points per axis of each REG database.
    pub reg_counts: Vec<usize>,
    pub plate: PlateParams,
    /// Average vertical strain of the plate.
    pub plate_strain: f64,
    pub lbeam: LBeamParams,
    /// Horizontal displacement of the L-beam's top edge (m).
    pub lbeam_displacement: f64,
    pub variants: Vec<DistanceVariant>,
    #[serde(default)]
    pub ddi: DdiOptions,
    #[serde(default)]
    pub ddcm: DdcmOptions,
    /// Run the data-driven cases concurrently.
    #[serde(default)]
    pub parallel_cases: bool,
}

impl StudyConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            preset: name.to_string(),
            seed: 42,
            law: LinearElasticLaw::new(217.5e9, 0.3)?,
            metric: MetricSpec::default(),
            sample: SampleParams::default(),
            history: LoadHistory::default(),
            ratio: 200.0,
            ddi_sizes: vec![2500, 10_000],
            reg_counts: vec![10, 14, 20, 22, 40],
            plate: PlateParams::default(),
            plate_strain: -0.004,
            lbeam: LBeamParams::default(),
            lbeam_displacement: 0.002,
            variants: vec![DistanceVariant::Standard, DistanceVariant::Isotropic],
            ddi: DdiOptions::default(),
            ddcm: DdcmOptions::default(),
            parallel_cases: false,
        };
        match name {
            "desk" => Ok(base),
            "smoke" => {
                let mut c = base;
                c.sample.size = 0.1;
                c.plate.size = 2.0 * c.plate.radius;
                c.plate.grading = 1.5;
                c.lbeam.size = 0.12;
                c.ddi_sizes = vec![100];
                c.reg_counts = vec![10];
                Ok(c)
            }
            "full" => {
                let mut c = base;
                c.ddi_sizes = vec![10_000, 25_000, 100_000];
                c.reg_counts = vec![30, 50, 100];
                Ok(c)
            }
            _ => Err(Error::Config(format!("unknown study preset `{name}` (smoke, desk, full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.history.validate()?;
        LinearElasticLaw::new(self.law.e, self.law.nu)?;
        if self.ddi_sizes.contains(&0) || self.reg_counts.iter().any(|&n| n < 2) {
            return Err(Error::Config("database sizes must be positive and REG axes need ≥ 2 points".into()));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::Config("ratio must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one distance variant is required".into()));
        }
        self.metric.build()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem: String,
    pub elements: usize,
    pub nodes: usize,
    pub points: usize,
    /// FE strain energy (J per unit thickness).
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSummary {
    pub name: String,
    pub kind: String,
    pub size: usize,
    /// Identification only.
    pub snapshots: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub objective: Option<f64>,
    /// Weighted isotropic fit of the entries.
    pub fit_e: Option<f64>,
    pub fit_nu: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub problem: String,
    pub database: String,
    pub kind: String,
    pub size: usize,
    pub variant: DistanceVariant,
    /// Squared distances (J).
    pub fem_db: Option<f64>,
    pub ddcm_db: Option<f64>,
    pub ddcm_fem: Option<f64>,
    pub energy_ddcm: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub cycling: Option<bool>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub provenance: Provenance,
    pub config: StudyConfig,
    pub problems: Vec<ProblemSummary>,
    pub databases: Vec<DatabaseSummary>,
    pub cases: Vec<CaseReport>,
}

impl StudyReport {
    pub fn case(&self, problem: &str, database: &str, variant: DistanceVariant) -> Option<&CaseReport> {
        self.cases
            .iter()
            .find(|c| c.problem == problem && c.database == database && c.variant == variant)
    }

    /// One row per case, plot-ready.
    pub fn table_csv(&self) -> String {
        let mut s = String::new();
        for line in self.provenance.lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str("problem,database,kind,size,variant,fem_db,ddcm_db,ddcm_fem,iterations,converged\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for c in &self.cases {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.problem,
                c.database,
                c.kind,
                c.size,
                serde_json::to_value(c.variant).unwrap().as_str().unwrap_or(""),
                opt(c.fem_db),
                opt(c.ddcm_db),
                opt(c.ddcm_fem),
                c.iterations.map(|v| v.to_string()).unwrap_or_default(),
                c.converged.map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
        s
    }
}

struct Problem {
    name: &'static str,
    model: DiscreteModel,
    reference: FemSolution,
}

struct Database {
    summary: DatabaseSummary,
    db: Option<MaterialDatabase>,
}

fn identify(config: &StudyConfig, n_star: usize, quad: &Quadrature, mesh: &crate::fe::Mesh) -> Result<(DatabaseSummary, Vec<LocalState>)> {
    let metric = config.metric.build()?;
    let n_snap = snapshots_for_ratio(quad.len(), n_star, config.ratio);
    let snaps = run_virtual_experiment(mesh, &config.law, &config.history, n_snap)?;
    let opts = DdiOptions { seed: config.seed, ..config.ddi.clone() };
    let res = ddi_solve(&DdiProblem {
        quad,
        snapshots: &snaps,
        metric: &metric,
        n_star,
        options: &opts,
    })?;
    let eps: Vec<_> = res.database.iter().map(|z| z.strain).collect();
    let sig: Vec<_> = res.database.iter().map(|z| z.stress).collect();
    let fit = fit_isotropic_law(&eps, &sig, &res.cluster_weights).ok();
    let summary = DatabaseSummary {
        name: format!("DDI-{n_star}"),
        kind: "DDI".into(),
        size: n_star,
        snapshots: Some(n_snap),
        iterations: Some(res.iterations),
        converged: Some(res.converged),
        objective: Some(res.objective),
        fit_e: fit.map(|f| f.e),
        fit_nu: fit.map(|f| f.nu),
        failure: None,
    };
    Ok((summary, res.database))
}

fn failed(name: String, kind: &str, size: usize, e: &Error) -> Database {
    log::error!("study: database {name} failed: {e}");
    Database {
        summary: DatabaseSummary {
            name,
            kind: kind.into(),
            size,
            snapshots: None,
            iterations: None,
            converged: None,
            objective: None,
            fit_e: None,
            fit_nu: None,
            failure: Some(e.to_string()),
        },
        db: None,
    }
}

fn run_case(config: &StudyConfig, problem: &Problem, data: &Database, variant: DistanceVariant) -> CaseReport {
    let mut rep = CaseReport {
        problem: problem.name.into(),
        database: data.summary.name.clone(),
        kind: data.summary.kind.clone(),
        size: data.summary.size,
        variant,
        fem_db: None,
        ddcm_db: None,
        ddcm_fem: None,
        energy_ddcm: None,
        iterations: None,
        converged: None,
        cycling: None,
        failure: None,
    };
    let Some(db) = &data.db else {
        rep.failure = Some("database unavailable".into());
        return rep;
    };
    let opts = DdcmOptions { variant, ..config.ddcm.clone() };
    let mut run = || -> Result<()> {
        let sol = ddcm_solve(&DdcmProblem {
            model: &problem.model,
            database: db,
            options: &opts,
        })?;
        let m = solution_metrics(&sol.states, &problem.reference, db, variant, problem.model.weights())?;
        rep.fem_db = Some(m.fem_db);
        rep.ddcm_db = Some(m.ddcm_db);
        rep.ddcm_fem = Some(m.ddcm_fem);
        rep.energy_ddcm = Some(m.energy_ddcm);
        rep.iterations = Some(sol.iterations);
        rep.converged = Some(sol.converged);
        rep.cycling = Some(sol.cycling);
        Ok(())
    };
    if let Err(e) = run() {
        log::error!("study: case {}/{} failed: {e}", problem.name, data.summary.name);
        rep.failure = Some(e.to_string());
    }
    rep
}

/// Runs the full study. With `out_dir`, the report, a CSV table and the
/// identified databases are written there (identified databases into
/// `databases/`).
pub fn run_study(config: &StudyConfig, out_dir: Option<&Path>) -> Result<StudyReport> {
    config.validate()?;
    let provenance = Provenance::new(config, Some(config.seed), Some(&config.preset));
    let metric = config.metric.build()?;

    let plate = plate_problem(&config.plate, config.plate_strain)?;
    let beam = lbeam_problem(&config.lbeam, config.lbeam_displacement)?;
    let problems: Vec<Problem> = [("plate", plate), ("lbeam", beam)]
        .into_iter()
        .map(|(name, model)| {
            let reference = fem_reference_solve(&model, &config.law)?;
            Ok(Problem { name, model, reference })
        })
        .collect::<Result<_>>()?;

    let sample = perforated_sample(&config.sample)?;
    let quad = Quadrature::build(&sample)?;
    let mut data = Vec::new();
    for &n in &config.ddi_sizes {
        log::info!("study: identifying N* = {n}");
        data.push(match identify(config, n, &quad, &sample) {
            Ok((summary, states)) => {
                if let Some(dir) = out_dir {
                    let file = DatabaseFile::from_states(&states, provenance.lines());
                    io::write_database(&dir.join("databases").join(format!("{}.csv", summary.name)), &file)?;
                }
                match MaterialDatabase::build(states, metric.clone()) {
                    Ok(db) => Database { summary, db: Some(db) },
                    Err(e) => failed(summary.name, "DDI", n, &e),
                }
            }
            Err(e) => failed(format!("DDI-{n}"), "DDI", n, &e),
        });
    }
    for &n in &config.reg_counts {
        let size = n * n * n;
        let name = format!("REG-{n}^3");
        data.push(match gen_regular_db(&StrainGridSpec::table_box(n), &config.law, &metric) {
            Ok(db) => Database {
                summary: DatabaseSummary {
                    name,
                    kind: "REG".into(),
                    size,
                    snapshots: None,
                    iterations: None,
                    converged: None,
                    objective: None,
                    fit_e: None,
                    fit_nu: None,
                    failure: None,
                },
                db: Some(db),
            },
            Err(e) => failed(name, "REG", size, &e),
        });
    }

    let jobs: Vec<(usize, usize, DistanceVariant)> = (0..data.len())
        .flat_map(|d| (0..problems.len()).flat_map(move |p| config.variants.iter().map(move |&v| (d, p, v))))
        .collect();
    let run = |&(d, p, v): &(usize, usize, DistanceVariant)| {
        log::info!("study: {} with {} ({v:?})", problems[p].name, data[d].summary.name);
        run_case(config, &problems[p], &data[d], v)
    };
    let cases: Vec<CaseReport> = if config.parallel_cases {
        crate::par::map_slice(&jobs, run)
    } else {
        jobs.iter().map(run).collect()
    };

    let report = StudyReport {
        provenance,
        config: config.clone(),
        problems: problems
            .iter()
            .map(|p| ProblemSummary {
                problem: p.name.into(),
                elements: p.model.mesh.elements.len(),
                nodes: p.model.mesh.n_nodes(),
                points: p.model.n_points(),
                energy: p.reference.energy,
            })
            .collect(),
        databases: data.into_iter().map(|d| d.summary).collect(),
        cases,
    };
    if let Some(dir) = out_dir {
        io::write_json(&dir.join("config.json"), config)?;
        io::write_json(&dir.join("report.json"), &report)?;
        io::write_text(&dir.join("table.csv"), &report.table_csv())?;
    }
    Ok(report)
}
