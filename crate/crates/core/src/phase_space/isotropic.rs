//! Rotation-minimized (isotropic) distance in 2D.
//!
//! For a metric that commutes with in-plane rotations, a state splits into a
//! spherical part (rotation invariant) and a deviatoric part that turns by
//! `−2θ` when the tensors are conjugated as `RᵀTR`. The squared distance to a
//! rotated state is then `const − 2·Re(w·e^{−2iθ})`, minimized in closed form
//! at `θ = arg(w)/2`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};

use super::{LocalState, Mandel, Metric};
use crate::{Error, Result};

/// Conjugation `RᵀTR` of a Mandel tensor by the rotation of angle `theta`.
pub fn rotate_mandel(v: &Mandel, theta: f64) -> Mandel {
    let (s, c) = theta.sin_cos();
    let (a, b, d) = (v[0], v[1], v[2] * FRAC_1_SQRT_2);
    let xx = a * c * c + 2.0 * d * s * c + b * s * s;
    let yy = a * s * s - 2.0 * d * s * c + b * c * c;
    let xy = (b - a) * s * c + d * (c * c - s * s);
    Mandel::new(xx, yy, SQRT_2 * xy)
}

/// Rotates both strain and stress of a state.
pub fn rotate_state(y: &LocalState, theta: f64) -> LocalState {
    LocalState::new(rotate_mandel(&y.strain, theta), rotate_mandel(&y.stress, theta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation2d {
    /// Minimizing angle in `(−π/2, π/2]`.
    pub angle: f64,
    pub rotated: LocalState,
    pub distance: f64,
}

/// Invariant decomposition of a state under an isotropic metric.
#[derive(Clone, Copy, Debug)]
pub(crate) struct IsoParts {
    /// `(√k_s·p_ε, p_σ/√k_s)`
    spherical: [f64; 2],
    /// `√k_d·dev_ε` and `dev_σ/√k_d` as complex numbers `(re, im)`.
    a: [f64; 2],
    b: [f64; 2],
}

impl IsoParts {
    pub(crate) fn new(z: &LocalState, ks: f64, kd: f64) -> Self {
        let (sks, skd) = (ks.sqrt(), kd.sqrt());
        let sph = |v: &Mandel| (v[0] + v[1]) * FRAC_1_SQRT_2;
        let dev = |v: &Mandel| [(v[0] - v[1]) * FRAC_1_SQRT_2, v[2]];
        let de = dev(&z.strain);
        let ds = dev(&z.stress);
        Self {
            spherical: [sks * sph(&z.strain), sph(&z.stress) / sks],
            a: [skd * de[0], skd * de[1]],
            b: [ds[0] / skd, ds[1] / skd],
        }
    }

    /// Lower-bound coordinates: their Euclidean distance never exceeds the
    /// rotation-minimized distance.
    pub(crate) fn features(&self) -> [f64; 4] {
        [
            self.spherical[0],
            self.spherical[1],
            self.a[0].hypot(self.a[1]),
            self.b[0].hypot(self.b[1]),
        ]
    }

    /// `w = Σ conj(A_z)·A_y` for `self = z`.
    fn overlap(&self, y: &IsoParts) -> [f64; 2] {
        let cm = |z: [f64; 2], y: [f64; 2]| [z[0] * y[0] + z[1] * y[1], z[0] * y[1] - z[1] * y[0]];
        let wa = cm(self.a, y.a);
        let wb = cm(self.b, y.b);
        [wa[0] + wb[0], wa[1] + wb[1]]
    }

    fn dev_norm_sq(&self) -> f64 {
        self.a[0] * self.a[0] + self.a[1] * self.a[1] + self.b[0] * self.b[0] + self.b[1] * self.b[1]
    }

    /// Minimal squared distance over rotations of `y`, and the minimizing angle.
    pub(crate) fn min_dist_sq(&self, y: &IsoParts) -> (f64, f64) {
        let w = self.overlap(y);
        let ds0 = self.spherical[0] - y.spherical[0];
        let ds1 = self.spherical[1] - y.spherical[1];
        let wn = w[0].hypot(w[1]);
        let d2 = ds0 * ds0 + ds1 * ds1 + self.dev_norm_sq() + y.dev_norm_sq() - 2.0 * wn;
        let angle = if wn > 0.0 { normalize_angle(0.5 * w[1].atan2(w[0])) } else { 0.0 };
        (d2.max(0.0), angle)
    }
}

/// Maps an angle onto `(−π/2, π/2]` (tensor conjugation has period π).
pub(crate) fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % std::f64::consts::PI;
    if t <= -FRAC_PI_2 {
        t += std::f64::consts::PI;
    } else if t > FRAC_PI_2 {
        t -= std::f64::consts::PI;
    }
    t
}

pub(crate) fn require_isotropic(metric: &Metric) -> Result<(f64, f64)> {
    metric.isotropic_moduli().ok_or_else(|| {
        Error::UnsupportedMetric("the isotropic distance needs a rotation-invariant metric".into())
    })
}

/// Rotation of `y` closest to `z` under an isotropic metric.
pub fn optimal_rotation_2d(z: &LocalState, y: &LocalState, metric: &Metric) -> Result<Rotation2d> {
    let (ks, kd) = require_isotropic(metric)?;
    let (_, angle) = IsoParts::new(z, ks, kd).min_dist_sq(&IsoParts::new(y, ks, kd));
    let rotated = rotate_state(y, angle);
    let d_rot = metric.distance_sq(z, &rotated);
    let d_id = metric.distance_sq(z, y);
    Ok(if d_id < d_rot {
        Rotation2d {
            angle: 0.0,
            rotated: *y,
            distance: d_id.max(0.0).sqrt(),
        }
    } else {
        Rotation2d {
            angle,
            rotated,
            distance: d_rot.max(0.0).sqrt(),
        }
    })
}
