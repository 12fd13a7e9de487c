use nalgebra::{Cholesky, Matrix3};

use super::LocalState;
use crate::{Error, Result};

/// Symmetric positive-definite phase-space metric `C` in Mandel form.
///
/// The local norm is `|z|² = Cε·ε + C⁻¹σ·σ`. With `C = LᵀL` the embedding
/// `(Lε, L⁻ᵀσ)` maps the norm onto the Euclidean norm of a 6-vector, which is
/// what the nearest-neighbor index searches in.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    c: Matrix3<f64>,
    c_inv: Matrix3<f64>,
    l: Matrix3<f64>,
    l_inv_t: Matrix3<f64>,
}

impl Metric {
    pub fn new(c: Matrix3<f64>) -> Result<Self> {
        if !c.iter().all(|x| x.is_finite()) {
            return Err(Error::MetricNotSpd);
        }
        let scale = c.abs().max();
        if (c - c.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::MetricNotSpd);
        }
        let c = (c + c.transpose()) * 0.5;
        let chol = Cholesky::new(c).ok_or(Error::MetricNotSpd)?;
        let lower = chol.l();
        let c_inv = chol.inverse();
        let lower_inv = lower.try_inverse().ok_or(Error::MetricNotSpd)?;
        Ok(Self {
            c,
            c_inv,
            l: lower.transpose(),
            l_inv_t: lower_inv,
        })
    }

    /// Plane-strain isotropic Hooke matrix for Young's modulus `e` (Pa) and
    /// Poisson ratio `nu`.
    pub fn isotropic_plane_strain(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && nu > -1.0 && nu < 0.5) {
            return Err(Error::MetricNotSpd);
        }
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        Self::new(Matrix3::new(
            lambda + 2.0 * mu,
            lambda,
            0.0,
            lambda,
            lambda + 2.0 * mu,
            0.0,
            0.0,
            0.0,
            2.0 * mu,
        ))
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity()).expect("identity is SPD")
    }

    pub fn c(&self) -> &Matrix3<f64> {
        &self.c
    }

    pub fn c_inv(&self) -> &Matrix3<f64> {
        &self.c_inv
    }

    /// Upper factor `L` with `C = LᵀL`.
    pub fn factor(&self) -> &Matrix3<f64> {
        &self.l
    }

    pub fn norm_sq(&self, z: &LocalState) -> f64 {
        (self.c * z.strain).dot(&z.strain) + (self.c_inv * z.stress).dot(&z.stress)
    }

    pub fn distance_sq(&self, z: &LocalState, y: &LocalState) -> f64 {
        self.norm_sq(&(*z - *y))
    }

    /// Embedded 6-vector `(Lε, L⁻ᵀσ)`.
    #[inline]
    pub fn embed(&self, z: &LocalState) -> [f64; 6] {
        let a = self.l * z.strain;
        let b = self.l_inv_t * z.stress;
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }

    /// Embedded strain `Lε` (the strain half of [`Metric::embed`]).
    #[inline]
    pub fn embed_strain(&self, eps: &super::Mandel) -> [f64; 3] {
        let a = self.l * eps;
        [a[0], a[1], a[2]]
    }

    /// Spherical and deviatoric moduli `(k_s, k_d)` when the metric commutes
    /// with in-plane rotations, i.e. `C = [[a, b, 0], [b, a, 0], [0, 0, a-b]]`.
    pub fn isotropic_moduli(&self) -> Option<(f64, f64)> {
        let c = &self.c;
        let tol = 1e-12 * c.abs().max();
        let a = c[(0, 0)];
        let b = c[(0, 1)];
        let ok = (c[(1, 1)] - a).abs() <= tol
            && c[(0, 2)].abs() <= tol
            && c[(1, 2)].abs() <= tol
            && (c[(2, 2)] - (a - b)).abs() <= tol;
        ok.then_some((a + b, a - b))
    }
}

/// Local norm `|z| = (Cε·ε + C⁻¹σ·σ)^½`.
pub fn local_norm(z: &LocalState, metric: &Metric) -> f64 {
    metric.norm_sq(z).max(0.0).sqrt()
}

/// Squared global distance `Σ w |z − y|²` (an energy, J per unit thickness).
pub fn global_distance_sq(
    zs: &[LocalState],
    ys: &[LocalState],
    weights: &[f64],
    metric: &Metric,
) -> Result<f64> {
    if zs.len() != ys.len() {
        return Err(Error::Dimension {
            what: "state lists",
            expected: zs.len(),
            got: ys.len(),
        });
    }
    if zs.len() != weights.len() {
        return Err(Error::Dimension {
            what: "weights",
            expected: zs.len(),
            got: weights.len(),
        });
    }
    Ok(crate::par::sum_range(zs.len(), |e| {
        weights[e] * metric.distance_sq(&zs[e], &ys[e])
    }))
}

/// Global distance `(Σ w |z − y|²)^½`.
pub fn global_distance(
    zs: &[LocalState],
    ys: &[LocalState],
    weights: &[f64],
    metric: &Metric,
) -> Result<f64> {
    global_distance_sq(zs, ys, weights, metric).map(|d| d.max(0.0).sqrt())
}
