//! Block elimination of the stationarity system.
//!
//! With `σ^α = σ* + C B η^α`, equilibrium gives `K η^α = f^α − A^αᵀ σ*` and
//! stationarity in `σ*` requires `Σ_α A^α η^α = 0`, where `A^α` sums
//! `w B` over the points of each cluster. Eliminating `η` leaves
//! `S σ* = b` with `S = Σ_α A^α K⁻¹ A^αᵀ` and `b = Σ_α A^α K⁻¹ f^α`.
//!
//! `S` is never formed: conjugate gradients apply it with one batched
//! back-substitution over all snapshots. Since `S ≤ diag(W_i C⁻¹)` (each
//! `A K⁻¹ Aᵀ` is an energy projection), the block preconditioner `C / W_i`
//! puts the spectrum in `(0, 1]`.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::fe::{FactorizedOperator, Quadrature};
use crate::phase_space::{Mandel, Metric};
use crate::{Error, Result};

/// Snapshots gathered per partial sum; fixed so sums do not depend on the
/// thread count.
const GATHER_CHUNK: usize = 8;

pub struct StationaritySystem<'a> {
    quad: &'a Quadrature,
    op: &'a FactorizedOperator,
    c: Matrix3<f64>,
    n_star: usize,
    n_snap: usize,
    /// `K⁻¹ f^α`, reduced, column-major.
    kf: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub sigma_star: Vec<Mandel>,
    pub iterations: usize,
    /// Preconditioned residual norm relative to that of `b`.
    pub residual: f64,
}

fn dot(a: &[Mandel], b: &[Mandel]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

impl<'a> StationaritySystem<'a> {
    /// `loads` are the full-length load vectors of the snapshots (grip
    /// resultants already placed on their groups).
    pub fn new(quad: &'a Quadrature, op: &'a FactorizedOperator, metric: &Metric, loads: &[Vec<f64>], n_star: usize) -> Self {
        let dofs = op.dof_map();
        let mut kf: Vec<f64> = loads.iter().flat_map(|f| dofs.restrict(f)).collect();
        op.solve_reduced_batch(&mut kf);
        Self {
            quad,
            op,
            c: *metric.c(),
            n_star,
            n_snap: loads.len(),
            kf,
        }
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snap
    }

    fn n_red(&self) -> usize {
        self.op.dof_map().n_reduced()
    }

    /// `A^αᵀ s` for every snapshot, reduced, column-major.
    fn scatter(&self, mapping: &[usize], s: &[Mandel]) -> Vec<f64> {
        let m = self.quad.len();
        let dofs = self.op.dof_map();
        let cols = crate::par::map_range(self.n_snap, |a| {
            let mut full = vec![0.0; self.quad.n_dofs()];
            for (p, q) in self.quad.points().enumerate() {
                q.scatter_stress(&s[mapping[a * m + p]], &mut full);
            }
            dofs.restrict(&full)
        });
        cols.concat()
    }

    /// `Σ_α A^α x^α` for reduced column-major `x`.
    fn gather(&self, mapping: &[usize], x: &[f64]) -> Vec<Mandel> {
        let m = self.quad.len();
        let nr = self.n_red();
        let dofs = self.op.dof_map();
        let chunks = self.n_snap.div_ceil(GATHER_CHUNK);
        let partial = crate::par::map_range(chunks, |ch| {
            let mut out = vec![Mandel::zeros(); self.n_star];
            let mut full = vec![0.0; self.quad.n_dofs()];
            for a in ch * GATHER_CHUNK..((ch + 1) * GATHER_CHUNK).min(self.n_snap) {
                dofs.prolong_into(&x[a * nr..(a + 1) * nr], &mut full);
                for (p, q) in self.quad.points().enumerate() {
                    out[mapping[a * m + p]] += q.weight * q.strain(&full);
                }
            }
            out
        });
        let mut out = vec![Mandel::zeros(); self.n_star];
        for part in partial {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }

    /// `S s`.
    pub fn apply(&self, mapping: &[usize], s: &[Mandel]) -> Vec<Mandel> {
        let mut x = self.scatter(mapping, s);
        self.op.solve_reduced_batch(&mut x);
        self.gather(mapping, &x)
    }

    /// `b = Σ_α A^α K⁻¹ f^α`.
    pub fn rhs(&self, mapping: &[usize]) -> Vec<Mandel> {
        self.gather(mapping, &self.kf)
    }

    /// `η^α = K⁻¹ (f^α − A^αᵀ σ*)` as full-length vectors.
    pub fn multipliers(&self, mapping: &[usize], sigma_star: &[Mandel]) -> Vec<Vec<f64>> {
        let mut x = self.scatter(mapping, sigma_star);
        self.op.solve_reduced_batch(&mut x);
        let nr = self.n_red();
        let dofs = self.op.dof_map();
        (0..self.n_snap)
            .map(|a| {
                let red: Vec<f64> = (0..nr).map(|k| self.kf[a * nr + k] - x[a * nr + k]).collect();
                let mut full = vec![0.0; self.quad.n_dofs()];
                dofs.prolong_into(&red, &mut full);
                full
            })
            .collect()
    }

    /// `‖Σ_α A^α η^α‖ / ‖b‖`: how far the multipliers are from stationarity.
    pub fn stationarity_residual(&self, mapping: &[usize], eta: &[Vec<f64>]) -> f64 {
        let nr = self.n_red();
        let dofs = self.op.dof_map();
        let mut x = Vec::with_capacity(nr * self.n_snap);
        for e in eta {
            x.extend(dofs.pick(e));
        }
        let g = self.gather(mapping, &x);
        let b = self.rhs(mapping);
        let (gn, bn) = (dot(&g, &g).sqrt(), dot(&b, &b).sqrt());
        if bn > 0.0 { gn / bn } else { gn }
    }

    /// Preconditioned conjugate gradients from `x0`.
    ///
    /// Every iterate lowers the quadratic objective, so a warm start never
    /// makes the result worse than the starting point.
    pub fn solve_cg(
        &self,
        mapping: &[usize],
        cluster_weights: &[f64],
        x0: &[Mandel],
        tol: f64,
        max_iterations: usize,
    ) -> Result<CgOutcome> {
        if let Some(i) = cluster_weights.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::EmptyCluster(i));
        }
        let precond = |r: &[Mandel]| -> Vec<Mandel> {
            r.iter().zip(cluster_weights).map(|(v, w)| self.c * v / *w).collect()
        };
        let b = self.rhs(mapping);
        let bnorm = dot(&b, &precond(&b)).sqrt();
        if bnorm == 0.0 {
            return Ok(CgOutcome {
                sigma_star: vec![Mandel::zeros(); self.n_star],
                iterations: 0,
                residual: 0.0,
            });
        }
        let mut x = x0.to_vec();
        let sx = self.apply(mapping, &x);
        let mut r: Vec<Mandel> = b.iter().zip(&sx).map(|(a, c)| a - c).collect();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut it = 0;
        while rz.max(0.0).sqrt() > tol * bnorm && it < max_iterations {
            let q = self.apply(mapping, &p);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            for k in 0..self.n_star {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..self.n_star {
                p[k] = z[k] + beta * p[k];
            }
            it += 1;
        }
        Ok(CgOutcome {
            sigma_star: x,
            iterations: it,
            residual: rz.max(0.0).sqrt() / bnorm,
        })
    }

    /// Forms `S` column by column and factorizes it. For small `N*` only.
    pub fn solve_dense(&self, mapping: &[usize]) -> Result<Vec<Mandel>> {
        let n = 3 * self.n_star;
        let mut s = DMatrix::<f64>::zeros(n, n);
        let mut unit = vec![Mandel::zeros(); self.n_star];
        for j in 0..n {
            unit[j / 3][j % 3] = 1.0;
            let col = self.apply(mapping, &unit);
            unit[j / 3][j % 3] = 0.0;
            for (i, v) in col.iter().enumerate() {
                for c in 0..3 {
                    s[(3 * i + c, j)] = v[c];
                }
            }
        }
        let s = 0.5 * (&s + s.transpose());
        let b = self.rhs(mapping);
        let bv = DVector::from_iterator(n, b.iter().flat_map(|v| v.iter().copied()));
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Solver("reduced stationarity matrix is not positive definite".into()))?;
        let x = chol.solve(&bv);
        Ok((0..self.n_star).map(|i| Mandel::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])).collect())
    }
}
