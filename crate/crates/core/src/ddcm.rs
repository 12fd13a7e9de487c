//! Distance-minimizing data-driven solver.
//!
//! Alternates between the closest database entries (`P_D`) and the closest
//! compatible, equilibrated state (`P_E`, two linear solves against one
//! factorization) until the data assignment stops changing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fe::{assemble_operator, DiscreteModel, FactorizedOperator, FemSolution};
use crate::phase_space::{LocalState, Mandel, MaterialDatabase, Metric, StateMapping};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceVariant {
    #[default]
    Standard,
    /// Database entries may be rotated in-plane before matching.
    Isotropic,
}

/// Starting state `z_0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMode {
    #[default]
    Zero,
    /// Every point starts at a uniformly drawn database entry.
    RandomDatabase { seed: u64 },
    /// Linear solution with the metric used as stiffness.
    MetricWarmStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdcmOptions {
    pub max_iterations: usize,
    pub variant: DistanceVariant,
    pub init: InitMode,
    /// Cycling is declared when the distance moved by less than
    /// `stagnation_tol` (relative) over this many iterations while the
    /// mapping kept changing.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
    /// Isotropic variant only: with an unchanged index mapping the angles
    /// still relax; stop once the relative distance decrease falls below this.
    pub angle_tol: f64,
}

impl Default for DdcmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            variant: DistanceVariant::Standard,
            init: InitMode::Zero,
            stagnation_window: 10,
            stagnation_tol: 1e-14,
            angle_tol: 1e-10,
        }
    }
}

/// The metric is the database's own: the index is built in its embedding.
#[derive(Clone, Copy, Debug)]
pub struct DdcmProblem<'a> {
    pub model: &'a DiscreteModel,
    pub database: &'a MaterialDatabase,
    pub options: &'a DdcmOptions,
}

impl DdcmProblem<'_> {
    pub fn metric(&self) -> &Metric {
        self.database.metric()
    }
}

/// A point of the constraint set `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumState {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub states: Vec<LocalState>,
}

#[derive(Clone, Debug)]
pub struct DdcmSolution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub states: Vec<LocalState>,
    pub mapping: StateMapping,
    /// `d²(z_j, D)` after every projection onto `E` (J).
    pub history: Vec<f64>,
    /// Points whose database index changed at each iteration.
    pub changes: Vec<usize>,
    /// Free-DOF equilibrium residual of every iterate.
    pub equilibrium: Vec<f64>,
    pub converged: bool,
    pub cycling: bool,
    pub iterations: usize,
}

impl DdcmSolution {
    pub fn final_distance_sq(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Closest database entry of every point, with the per-point squared distances.
///
/// `hint` (a previous mapping) only speeds up the search; results do not
/// depend on it.
pub fn project_to_data(
    z: &[LocalState],
    db: &MaterialDatabase,
    variant: DistanceVariant,
    hint: Option<&StateMapping>,
) -> Result<(StateMapping, Vec<f64>)> {
    let hint_of = |p: usize| hint.and_then(|h| h.indices.get(p).copied());
    match variant {
        DistanceVariant::Standard => {
            let found = crate::par::map_range(z.len(), |p| db.nearest_sq(&z[p], hint_of(p)));
            let (idx, d2) = found.into_iter().unzip();
            Ok((StateMapping::new(idx), d2))
        }
        DistanceVariant::Isotropic => {
            let found = crate::par::map_range(z.len(), |p| db.nearest_isotropic(&z[p], hint_of(p)));
            let mut idx = Vec::with_capacity(z.len());
            let mut ang = Vec::with_capacity(z.len());
            let mut d2 = Vec::with_capacity(z.len());
            for m in found {
                let m = m?;
                idx.push(m.index);
                ang.push(m.angle);
                d2.push(m.distance_sq);
            }
            Ok((
                StateMapping {
                    indices: idx,
                    angles: Some(ang),
                },
                d2,
            ))
        }
    }
}

/// `P_E`: given per-point targets `(ε*, σ*)`, solves
/// `K u = Σ w Bᵀ C ε*` with the physical Dirichlet data and
/// `K λ = f − Σ w Bᵀ σ*` with homogeneous data, then returns
/// `ε = B u`, `σ = σ* + C B λ`.
pub fn project_to_equilibrium(
    mapped: &[LocalState],
    model: &DiscreteModel,
    metric: &Metric,
    op: &FactorizedOperator,
) -> Result<EquilibriumState> {
    let quad = &model.quad;
    if mapped.len() != quad.len() {
        return Err(Error::Dimension {
            what: "mapped states",
            expected: quad.len(),
            got: mapped.len(),
        });
    }
    let n = quad.n_dofs();
    let c = metric.c();
    let mut ru = vec![0.0; n];
    let mut rl = model.bcs.forces.clone();
    for (q, y) in quad.points().zip(mapped) {
        q.scatter_stress(&(c * y.strain), &mut ru);
        q.scatter_stress(&(-y.stress), &mut rl);
    }
    let mut u = vec![0.0; n];
    for (&d, &v) in &model.bcs.dirichlet {
        u[d] = v;
    }
    if model.bcs.dirichlet.values().any(|&v| v != 0.0) {
        for (r, k) in ru.iter_mut().zip(op.matrix().matvec(&u)) {
            *r -= k;
        }
    }
    let dofs = op.dof_map();
    let nr = dofs.n_reduced();
    let mut data = dofs.restrict(&ru);
    data.extend(dofs.restrict(&rl));
    op.solve_reduced_batch(&mut data);
    dofs.prolong_into(&data[..nr], &mut u);
    let mut lambda = vec![0.0; n];
    dofs.prolong_into(&data[nr..], &mut lambda);

    let eps = quad.strains(&u)?;
    let blam = quad.strains(&lambda)?;
    let states = eps
        .iter()
        .zip(&blam)
        .zip(mapped)
        .map(|((e, bl), y)| LocalState::new(*e, y.stress + c * bl))
        .collect();
    Ok(EquilibriumState { u, lambda, states })
}

fn initial_states(problem: &DdcmProblem, op: &FactorizedOperator) -> Result<Vec<LocalState>> {
    let m = problem.model.n_points();
    let db = problem.database;
    Ok(match problem.options.init {
        InitMode::Zero => vec![LocalState::zero(); m],
        InitMode::RandomDatabase { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..m).map(|_| db.states()[rng.random_range(0..db.len())]).collect()
        }
        InitMode::MetricWarmStart => {
            let u = op.solve(&problem.model.bcs.forces, &problem.model.bcs.values())?;
            let c = problem.metric().c();
            problem
                .model
                .quad
                .strains(&u)?
                .into_iter()
                .map(|e| LocalState::new(e, c * e))
                .collect()
        }
    })
}

fn weighted_sum(weights: &[f64], d2: &[f64]) -> f64 {
    crate::par::sum_range(d2.len(), |p| weights[p] * d2[p])
}

/// Fixed-point iteration `z_{j+1} = P_E P_D z_j`.
pub fn ddcm_solve(problem: &DdcmProblem) -> Result<DdcmSolution> {
    let model = problem.model;
    let db = problem.database;
    let opts = problem.options;
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if opts.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be positive".into()));
    }
    let metric = problem.metric();
    let op = assemble_operator(&model.quad, metric, &model.bcs)?;
    let weights = model.weights();

    let z0 = initial_states(problem, &op)?;
    let (mut mapping, _) = project_to_data(&z0, db, opts.variant, None)?;

    let mut history = Vec::new();
    let mut changes = Vec::new();
    let mut equilibrium = Vec::new();
    let mut best: Option<(f64, EquilibriumState, StateMapping)> = None;
    let mut converged = false;
    let mut cycling = false;

    for it in 0..opts.max_iterations {
        let mapped = mapping.mapped_states(db);
        let eq = project_to_equilibrium(&mapped, model, metric, &op)?;
        let stresses: Vec<Mandel> = eq.states.iter().map(|s| s.stress).collect();
        equilibrium.push(model.equilibrium_residual(&stresses)?);

        let (next, d2) = project_to_data(&eq.states, db, opts.variant, Some(&mapping))?;
        let d2 = weighted_sum(weights, &d2);
        let moved = next.changes_from(&mapping);
        let prev = history.last().copied();
        history.push(d2);
        changes.push(moved);
        log::trace!("ddcm iteration {it}: d² = {d2:.12e}, {moved} changes");

        if best.as_ref().is_none_or(|b| d2 <= b.0) {
            best = Some((d2, eq, next.clone()));
        }
        if moved == 0 {
            let settled = match opts.variant {
                DistanceVariant::Standard => true,
                DistanceVariant::Isotropic => prev.is_some_and(|p| p - d2 <= opts.angle_tol * d2.abs()),
            };
            if settled {
                converged = true;
                mapping = next;
                break;
            }
        } else if it >= opts.stagnation_window {
            let old = history[it - opts.stagnation_window];
            if (old - d2).abs() <= opts.stagnation_tol * d2.abs() {
                cycling = true;
                log::warn!("ddcm: distance stagnated with a changing mapping (limit cycle)");
                break;
            }
        }
        mapping = next;
    }

    let (_, eq, best_map) = best.expect("at least one iteration ran");
    if !converged {
        mapping = best_map;
    }
    let iterations = history.len();
    Ok(DdcmSolution {
        u: eq.u,
        lambda: eq.lambda,
        states: eq.states,
        mapping,
        history,
        changes,
        equilibrium,
        converged,
        cycling,
        iterations,
    })
}

/// `|f·u − Σ w σ·ε|` relative to the larger of the two, with `f` the applied
/// forces at free DOFs and the recovered reactions at constrained ones.
pub fn power_identity_residual(model: &DiscreteModel, u: &[f64], states: &[LocalState]) -> Result<f64> {
    let stresses: Vec<Mandel> = states.iter().map(|s| s.stress).collect();
    let fi = model.quad.internal_forces(&stresses)?;
    let mut external = 0.0;
    for (d, (&ud, &fid)) in u.iter().zip(&fi).enumerate() {
        let f = if model.bcs.dirichlet.contains_key(&d) { fid } else { model.bcs.forces[d] };
        external += f * ud;
    }
    let internal: f64 = model
        .weights()
        .iter()
        .zip(states)
        .map(|(w, s)| w * s.energy_density())
        .sum();
    let scale = external.abs().max(internal.abs());
    Ok(if scale > 0.0 { (external - internal).abs() / scale } else { 0.0 })
}

/// Distances between a data-driven solution, the reference and the database.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMetrics {
    /// `Σ w min_i |z_FEM − y_i|²` (J).
    pub fem_db: f64,
    pub ddcm_db: f64,
    pub ddcm_fem: f64,
    pub energy_fem: f64,
    pub energy_ddcm: f64,
    /// Per-point `|z − z_FEM|`.
    #[serde(skip)]
    pub abs_field: Vec<f64>,
    /// Per-point `|z − z_FEM|² / (ε·σ)_FEM`; zero where the reference energy
    /// density vanishes.
    #[serde(skip)]
    pub rel_field: Vec<f64>,
}

pub fn solution_metrics(
    states: &[LocalState],
    reference: &FemSolution,
    db: &MaterialDatabase,
    variant: DistanceVariant,
    weights: &[f64],
) -> Result<SolutionMetrics> {
    let ref_states = reference.states();
    if states.len() != ref_states.len() || weights.len() != states.len() {
        return Err(Error::Dimension {
            what: "solution points",
            expected: ref_states.len(),
            got: states.len(),
        });
    }
    let metric = db.metric();
    let (_, d_fem) = project_to_data(&ref_states, db, variant, None)?;
    let (_, d_sol) = project_to_data(states, db, variant, None)?;
    let d_pair: Vec<f64> = states
        .iter()
        .zip(&ref_states)
        .map(|(a, b)| metric.distance_sq(a, b).max(0.0))
        .collect();
    let rel_field = d_pair
        .iter()
        .zip(&ref_states)
        .map(|(d, r)| {
            let e = r.energy_density();
            if e > 0.0 { d / e } else { 0.0 }
        })
        .collect();
    let energy = |s: &[LocalState]| 0.5 * s.iter().zip(weights).map(|(z, w)| w * z.energy_density()).sum::<f64>();
    Ok(SolutionMetrics {
        fem_db: weighted_sum(weights, &d_fem),
        ddcm_db: weighted_sum(weights, &d_sol),
        ddcm_fem: weighted_sum(weights, &d_pair),
        energy_fem: energy(&ref_states),
        energy_ddcm: energy(states),
        abs_field: d_pair.iter().map(|d| d.sqrt()).collect(),
        rel_field,
    })
}
