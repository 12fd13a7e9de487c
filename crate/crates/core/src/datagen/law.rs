use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::phase_space::{Mandel, Metric};
use crate::{Error, Result};

/// Linear isotropic elastic law in plane strain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearElasticLaw {
    /// Young's modulus (Pa).
    pub e: f64,
    pub nu: f64,
}

impl LinearElasticLaw {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite() && nu > -1.0 && nu < 0.5) {
            return Err(Error::Config(format!("invalid elastic constants E = {e}, nu = {nu}")));
        }
        Ok(Self { e, nu })
    }

    /// Lamé constants `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.e, self.nu);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Mandel stiffness matrix.
    pub fn stiffness(&self) -> Matrix3<f64> {
        let (l, m) = self.lame();
        Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, 2.0 * m)
    }

    pub fn metric(&self) -> Result<Metric> {
        Metric::new(self.stiffness())
    }

    /// `σ = λ tr(ε) I + 2μ ε` on a Mandel strain.
    #[inline]
    pub fn stress(&self, eps: &Mandel) -> Mandel {
        let (l, m) = self.lame();
        let tr = eps[0] + eps[1];
        Mandel::new(l * tr + 2.0 * m * eps[0], l * tr + 2.0 * m * eps[1], 2.0 * m * eps[2])
    }
}

/// Hooke stress of a Mandel strain.
pub fn hooke_stress(eps: &Mandel, law: &LinearElasticLaw) -> Mandel {
    law.stress(eps)
}

/// Weighted least-squares fit of `(λ, μ)` to strain–stress pairs, returned
/// as a plane-strain law.
///
/// Residual `Σ w |σ − λ tr(ε)(1,1,0) − 2μ ε|²` is minimized through the
/// 2×2 normal equations.
pub fn fit_isotropic_law(strains: &[Mandel], stresses: &[Mandel], weights: &[f64]) -> Result<LinearElasticLaw> {
    if strains.len() != stresses.len() || strains.len() != weights.len() {
        return Err(Error::Dimension {
            what: "fit samples",
            expected: strains.len(),
            got: stresses.len().min(weights.len()),
        });
    }
    let mut a = Matrix2::<f64>::zeros();
    let mut rhs = Vector2::<f64>::zeros();
    for ((e, s), &w) in strains.iter().zip(stresses).zip(weights) {
        let tr = e[0] + e[1];
        // columns of the design matrix: ∂σ/∂λ = tr·(1,1,0), ∂σ/∂μ = 2ε
        let gl = Mandel::new(tr, tr, 0.0);
        let gm = e * 2.0;
        a[(0, 0)] += w * gl.dot(&gl);
        a[(0, 1)] += w * gl.dot(&gm);
        a[(1, 1)] += w * gm.dot(&gm);
        rhs[0] += w * gl.dot(s);
        rhs[1] += w * gm.dot(s);
    }
    a[(1, 0)] = a[(0, 1)];
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("law fit: singular normal equations".into()))?;
    let (l, m) = (x[0], x[1]);
    let nu = l / (2.0 * (l + m));
    let e = m * (3.0 * l + 2.0 * m) / (l + m);
    LinearElasticLaw::new(e, nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{mandel, tensor_components};

    #[test]
    fn zero_strain_zero_stress() {
        let law = LinearElasticLaw::new(217.5e9, 0.3).unwrap();
        assert_eq!(hooke_stress(&Mandel::zeros(), &law), Mandel::zeros());
    }

    #[test]
    fn pure_shear_decouples() {
        let law = LinearElasticLaw::new(217.5e9, 0.3).unwrap();
        let (_, mu) = law.lame();
        let g = 1e-3;
        let s = tensor_components(&hooke_stress(&mandel(0.0, 0.0, g), &law));
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.0);
        assert!((s[2] - 2.0 * mu * g).abs() <= 1e-12 * 2.0 * mu * g);
    }

    #[test]
    fn uniaxial_strain_matches_lame_formulas() {
        let (e, nu) = (217.5e9_f64, 0.3_f64);
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let law = LinearElasticLaw::new(e, nu).unwrap();
        let s = hooke_stress(&mandel(1e-3, 0.0, 0.0), &law);
        assert!((s[0] - (lam + 2.0 * mu) * 1e-3).abs() <= 1e-12 * s[0]);
        assert!((s[1] - lam * 1e-3).abs() <= 1e-12 * s[1]);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn stress_matches_stiffness_matrix() {
        let law = LinearElasticLaw::new(100e9, 0.35).unwrap();
        let eps = mandel(1e-3, -4e-4, 2.5e-4);
        let a = law.stress(&eps);
        let b = law.stiffness() * eps;
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn fit_recovers_exact_law() {
        let law = LinearElasticLaw::new(217.5e9, 0.3).unwrap();
        let strains: Vec<Mandel> = (0..20)
            .map(|i| {
                let t = i as f64;
                mandel(1e-3 * t.sin(), 7e-4 * (1.3 * t).cos(), 3e-4 * (0.7 * t).sin())
            })
            .collect();
        let stresses: Vec<Mandel> = strains.iter().map(|e| law.stress(e)).collect();
        let fit = fit_isotropic_law(&strains, &stresses, &[1.0; 20]).unwrap();
        assert!((fit.e - law.e).abs() <= 1e-9 * law.e);
        assert!((fit.nu - law.nu).abs() <= 1e-9);
    }

    #[test]
    fn rejects_invalid_constants() {
        assert!(LinearElasticLaw::new(-1.0, 0.3).is_err());
        assert!(LinearElasticLaw::new(1.0, 0.5).is_err());
    }
}
