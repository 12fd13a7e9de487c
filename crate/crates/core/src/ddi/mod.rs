//! Data-driven identification of a material database from displacement
//! snapshots.
//!
//! The unknowns are the database `(ε*_i, σ*_i)`, the per-snapshot stress
//! fields `σ^α` and the point-to-entry mappings. Strains are measured
//! (`ε^α = B u^α`); stresses are only constrained by equilibrium with the
//! known loads. The outer loop alternates an exact stress/multiplier solve
//! with nearest-entry reassignment and centroid updates, each of which lowers
//! the weighted phase-space distance between measurements and database.
//!
//! Displacement-controlled edges carry no force information at the node
//! level, so each loaded edge is treated as a rigid grip: its DOFs share one
//! multiplier and only the measured resultant enters equilibrium.

mod kmeans;
mod stationarity;

use serde::{Deserialize, Serialize};

pub use kmeans::{cluster_means, kmeans, KMeans};
pub use stationarity::{CgOutcome, StationaritySystem};

use crate::fe::{DofMap, FactorizedOperator, Quadrature};
use crate::phase_space::{LocalState, Mandel, MaterialDatabase, Metric};
use crate::{Error, Result};

/// Rigid grip: DOFs moving together, with the measured total force on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grip {
    pub name: String,
    pub dofs: Vec<usize>,
    pub resultant: f64,
}

/// One loading instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Nodal displacements (m).
    pub u: Vec<f64>,
    /// Applied nodal forces (N), zero on constrained DOFs.
    pub forces: Vec<f64>,
    /// Prescribed-displacement DOFs, grips included.
    pub dirichlet: Vec<usize>,
    pub grips: Vec<Grip>,
}

impl Snapshot {
    pub fn validate(&self, n_dofs: usize) -> Result<()> {
        if self.u.len() != n_dofs || self.forces.len() != n_dofs {
            return Err(Error::Dimension {
                what: "snapshot vector",
                expected: n_dofs,
                got: if self.u.len() != n_dofs { self.u.len() } else { self.forces.len() },
            });
        }
        if self.u.iter().chain(&self.forces).any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("snapshot at t = {} has non-finite data", self.time)));
        }
        for &d in &self.dirichlet {
            if d >= n_dofs {
                return Err(Error::BoundaryConditions(format!("DOF {d} does not exist")));
            }
            if self.forces[d] != 0.0 {
                return Err(Error::BoundaryConditions(format!("DOF {d} is both loaded and prescribed")));
            }
        }
        for g in &self.grips {
            if g.dofs.is_empty() || !g.resultant.is_finite() {
                return Err(Error::BoundaryConditions(format!("grip `{}` is empty or non-finite", g.name)));
            }
            if let Some(d) = g.dofs.iter().find(|d| !self.dirichlet.contains(d)) {
                return Err(Error::BoundaryConditions(format!(
                    "grip `{}` DOF {d} is not prescribed",
                    g.name
                )));
            }
        }
        Ok(())
    }

    /// Full-length load vector with each grip resultant placed on its group.
    pub fn load_vector(&self) -> Vec<f64> {
        let mut f = self.forces.clone();
        for g in &self.grips {
            f[g.dofs[0]] += g.resultant;
        }
        f
    }

    /// Constrained DOFs not belonging to a grip; the multipliers vanish there.
    pub fn supports(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self
            .dirichlet
            .iter()
            .copied()
            .filter(|d| !self.grips.iter().any(|g| g.dofs.contains(d)))
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    fn pattern(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut tied: Vec<Vec<usize>> = self
            .grips
            .iter()
            .map(|g| {
                let mut v = g.dofs.clone();
                v.sort_unstable();
                v
            })
            .collect();
        tied.sort();
        (self.supports(), tied)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdiOptions {
    pub seed: u64,
    pub max_iterations: usize,
    pub kmeans_iterations: usize,
    /// Relative preconditioned residual at which the stress solve stops.
    pub cg_tol: f64,
    pub cg_max_iterations: usize,
    /// States per database entry below which a warning is logged.
    pub ratio_warning: f64,
}

impl Default for DdiOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            max_iterations: 100,
            kmeans_iterations: 100,
            cg_tol: 1e-10,
            cg_max_iterations: 2000,
            ratio_warning: 150.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DdiProblem<'a> {
    pub quad: &'a Quadrature,
    pub snapshots: &'a [Snapshot],
    pub metric: &'a Metric,
    pub n_star: usize,
    pub options: &'a DdiOptions,
}

/// Per-iteration diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DdiIteration {
    /// Weighted squared distance after the stress solve (J).
    pub objective: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// Largest free-DOF equilibrium residual over the snapshots.
    pub equilibrium: f64,
    /// Points reassigned by the following mapping update.
    pub changes: usize,
    pub reseeded: usize,
}

#[derive(Clone, Debug)]
pub struct DdiResult {
    pub database: Vec<LocalState>,
    /// Per-snapshot point stresses, flattened snapshot-major.
    pub stresses: Vec<Mandel>,
    /// Per-snapshot measured strains, same layout.
    pub strains: Vec<Mandel>,
    /// Full-length multiplier field of every snapshot.
    pub eta: Vec<Vec<f64>>,
    /// Database entry of every point, same layout as `stresses`.
    pub mapping: Vec<usize>,
    pub points_per_snapshot: usize,
    pub cluster_weights: Vec<f64>,
    pub history: Vec<DdiIteration>,
    pub kmeans_iterations: usize,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

impl DdiResult {
    pub fn snapshot_stresses(&self, alpha: usize) -> &[Mandel] {
        let m = self.points_per_snapshot;
        &self.stresses[alpha * m..(alpha + 1) * m]
    }
}

/// `σ^α_e = σ*_{i(α,e)} + C B_e η^α`, flattened snapshot-major.
pub fn update_stresses(
    quad: &Quadrature,
    metric: &Metric,
    sigma_star: &[Mandel],
    eta: &[Vec<f64>],
    mapping: &[usize],
) -> Vec<Mandel> {
    let m = quad.len();
    let c = metric.c();
    let per = crate::par::map_range(eta.len(), |a| {
        quad.points()
            .enumerate()
            .map(|(p, q)| sigma_star[mapping[a * m + p]] + c * q.strain(&eta[a]))
            .collect::<Vec<_>>()
    });
    per.concat()
}

/// Nearest database entry of every mechanical state in the full phase-space
/// metric; `hint` only accelerates the search.
pub fn update_mapping(states: &[LocalState], db: &MaterialDatabase, hint: Option<&[usize]>) -> Vec<usize> {
    crate::par::map_range(states.len(), |p| db.nearest_sq(&states[p], hint.map(|h| h[p])).0)
}

/// Weighted mean strain of every cluster; empty clusters keep `previous`
/// and are reported.
pub fn update_centroids(
    mapping: &[usize],
    strains: &[Mandel],
    weights: &[f64],
    previous: &[Mandel],
) -> (Vec<Mandel>, Vec<usize>) {
    let (mut means, tot) = cluster_means(strains, weights, mapping, previous.len());
    let mut empty = Vec::new();
    for (i, t) in tot.iter().enumerate() {
        if !(*t > 0.0) {
            means[i] = previous[i];
            empty.push(i);
        }
    }
    (means, empty)
}

/// `Σ w [C(ε − ε*)·(ε − ε*) + C⁻¹(σ − σ*)·(σ − σ*)]` over all snapshots.
pub fn ddi_objective(
    strains: &[Mandel],
    stresses: &[Mandel],
    weights: &[f64],
    database: &[LocalState],
    mapping: &[usize],
    metric: &Metric,
) -> f64 {
    crate::par::sum_range(strains.len(), |p| {
        let z = LocalState::new(strains[p], stresses[p]);
        weights[p] * metric.distance_sq(&z, &database[mapping[p]])
    })
}

/// Relative free-DOF equilibrium residual of one snapshot's stress field,
/// each grip counting as one equation.
pub fn snapshot_equilibrium(quad: &Quadrature, dofs: &DofMap, snapshot: &Snapshot, stresses: &[Mandel]) -> Result<f64> {
    let fi = quad.internal_forces(stresses)?;
    let f = snapshot.load_vector();
    let diff: Vec<f64> = fi.iter().zip(&f).map(|(a, b)| a - b).collect();
    let num: f64 = dofs.restrict(&diff).iter().map(|v| v * v).sum();
    let mut scale: f64 = dofs.restrict(&f).iter().map(|v| v * v).sum();
    scale += dofs.fixed().iter().map(|&d| fi[d] * fi[d]).sum::<f64>();
    Ok(if scale > 0.0 { (num / scale).sqrt() } else { num.sqrt() })
}

/// Shared constraint pattern and the pseudo-stiffness with grips tied.
pub fn ddi_operator(quad: &Quadrature, snapshots: &[Snapshot], metric: &Metric) -> Result<FactorizedOperator> {
    let first = snapshots.first().ok_or_else(|| Error::Config("no snapshots".into()))?;
    let (fixed, tied) = first.pattern();
    for s in snapshots {
        s.validate(quad.n_dofs())?;
        let (f2, t2) = s.pattern();
        if f2 != fixed || t2 != tied {
            return Err(Error::BoundaryConditions(
                "all snapshots must share one constraint pattern".into(),
            ));
        }
    }
    FactorizedOperator::new(quad, metric.c(), DofMap::new(quad.n_dofs(), &fixed, &tied)?)
}

/// Picks, for each empty cluster, the point farthest from its database
/// entry and makes it the cluster's sole member (entry = that state).
fn reseed_empty(
    empty: &[usize],
    mapping: &mut [usize],
    states: &[LocalState],
    database: &mut [LocalState],
    dist: &[f64],
) {
    let mut count = vec![0usize; database.len()];
    for &i in mapping.iter() {
        count[i] += 1;
    }
    let mut taken = vec![false; mapping.len()];
    for &i in empty {
        let far = (0..mapping.len())
            .filter(|&p| !taken[p] && count[mapping[p]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
        if let Some(p) = far {
            count[mapping[p]] -= 1;
            mapping[p] = i;
            count[i] = 1;
            taken[p] = true;
            database[i] = states[p];
        }
    }
}

/// Full identification loop.
pub fn ddi_solve(problem: &DdiProblem) -> Result<DdiResult> {
    let quad = problem.quad;
    let snaps = problem.snapshots;
    let metric = problem.metric;
    let opts = problem.options;
    let n_star = problem.n_star;
    if n_star == 0 {
        return Err(Error::Config("the database size N* must be positive".into()));
    }
    let m = quad.len();
    let total = m * snaps.len();
    if total < n_star {
        return Err(Error::TooManyClusters {
            requested: n_star,
            distinct: total,
        });
    }
    let ratio = total as f64 / n_star as f64;
    if ratio < opts.ratio_warning {
        log::warn!("ddi: only {ratio:.1} mechanical states per database entry");
    }
    let op = ddi_operator(quad, snaps, metric)?;

    let strains: Vec<Mandel> = crate::par::map_slice(snaps, |s| quad.strains(&s.u))
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .concat();
    let weights: Vec<f64> = (0..snaps.len()).flat_map(|_| quad.weights().iter().copied()).collect();

    let km = kmeans(&strains, &weights, n_star, metric, opts.seed, opts.kmeans_iterations)?;
    log::info!("ddi: k-means finished after {} iterations", km.iterations);
    let mut mapping = km.assignment;
    let mut eps_star = km.centroids;
    let mut sigma_star = vec![Mandel::zeros(); n_star];

    let loads: Vec<Vec<f64>> = snaps.iter().map(Snapshot::load_vector).collect();
    let system = StationaritySystem::new(quad, &op, metric, &loads, n_star);

    let mut history = Vec::new();
    let mut converged = false;
    let mut iter = 0;
    loop {
        let (_, cw) = cluster_means(&strains, &weights, &mapping, n_star);
        let cg = system.solve_cg(&mapping, &cw, &sigma_star, opts.cg_tol, opts.cg_max_iterations)?;
        sigma_star = cg.sigma_star;
        let eta = system.multipliers(&mapping, &sigma_star);
        let stresses = update_stresses(quad, metric, &sigma_star, &eta, &mapping);
        let mut database: Vec<LocalState> = eps_star
            .iter()
            .zip(&sigma_star)
            .map(|(e, s)| LocalState::new(*e, *s))
            .collect();
        let objective = ddi_objective(&strains, &stresses, &weights, &database, &mapping, metric);
        let equilibrium = (0..snaps.len())
            .map(|a| snapshot_equilibrium(quad, op.dof_map(), &snaps[a], &stresses[a * m..(a + 1) * m]))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mut record = DdiIteration {
            objective,
            cg_iterations: cg.iterations,
            cg_residual: cg.residual,
            equilibrium,
            changes: 0,
            reseeded: 0,
        };
        log::info!(
            "ddi iteration {iter}: objective {objective:.10e}, {} CG steps, equilibrium {equilibrium:.2e}",
            cg.iterations
        );

        let finish = |history: Vec<DdiIteration>, converged: bool, mapping: Vec<usize>, cw: Vec<f64>| DdiResult {
            objective,
            iterations: history.len(),
            database: database.clone(),
            stresses: stresses.clone(),
            strains: strains.clone(),
            eta: eta.clone(),
            mapping,
            points_per_snapshot: m,
            cluster_weights: cw,
            history,
            kmeans_iterations: km.iterations,
            converged,
        };
        if iter >= opts.max_iterations {
            history.push(record);
            return Ok(finish(history, converged, mapping, cw));
        }

        let states: Vec<LocalState> = strains
            .iter()
            .zip(&stresses)
            .map(|(e, s)| LocalState::new(*e, *s))
            .collect();
        let db = MaterialDatabase::build(database.clone(), metric.clone())?;
        let mut next = update_mapping(&states, &db, Some(&mapping));
        record.changes = next.iter().zip(&mapping).filter(|(a, b)| a != b).count();
        if record.changes == 0 {
            converged = true;
            history.push(record);
            return Ok(finish(history, converged, mapping, cw));
        }
        let (_, tot) = cluster_means(&strains, &weights, &next, n_star);
        let empty: Vec<usize> = (0..n_star).filter(|&i| !(tot[i] > 0.0)).collect();
        if !empty.is_empty() {
            let dist: Vec<f64> = crate::par::map_range(states.len(), |p| {
                metric.distance_sq(&states[p], &database[next[p]])
            });
            reseed_empty(&empty, &mut next, &states, &mut database, &dist);
            for &i in &empty {
                sigma_star[i] = database[i].stress;
            }
            record.reseeded = empty.len();
        }
        let (eps_next, _) = update_centroids(&next, &strains, &weights, &eps_star);
        eps_star = eps_next;
        mapping = next;
        history.push(record);
        iter += 1;
    }
}
