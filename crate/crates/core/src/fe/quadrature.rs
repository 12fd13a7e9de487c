use std::f64::consts::FRAC_1_SQRT_2;

use super::mesh::{dof, ElementKind, Mesh};
use crate::phase_space::Mandel;
use crate::{Error, Result};

/// Borrowed view of one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct QuadraturePoint<'a> {
    pub element: usize,
    /// Area measure `w_e` (m², unit thickness).
    pub weight: f64,
    pub location: [f64; 2],
    /// Global DOFs of the element, in local order.
    pub dofs: &'a [usize],
    /// Columns of `B_e`, one Mandel 3-vector per local DOF.
    pub b: &'a [[f64; 3]],
}

impl QuadraturePoint<'_> {
    /// `B_e·u_loc` in Mandel form.
    #[inline]
    pub fn strain(&self, u: &[f64]) -> Mandel {
        let mut e = Mandel::zeros();
        for (&d, col) in self.dofs.iter().zip(self.b) {
            let ud = u[d];
            e[0] += col[0] * ud;
            e[1] += col[1] * ud;
            e[2] += col[2] * ud;
        }
        e
    }

    /// Adds `w_e·B_eᵀ·σ` into a full-length force vector.
    #[inline]
    pub fn scatter_stress(&self, sigma: &Mandel, out: &mut [f64]) {
        for (&d, col) in self.dofs.iter().zip(self.b) {
            out[d] += self.weight * (col[0] * sigma[0] + col[1] * sigma[1] + col[2] * sigma[2]);
        }
    }
}

/// All quadrature points of a mesh, stored flat.
#[derive(Clone, Debug)]
pub struct Quadrature {
    n_dofs: usize,
    element: Vec<usize>,
    weight: Vec<f64>,
    location: Vec<[f64; 2]>,
    /// `offsets[p]..offsets[p + 1]` indexes `dofs` and `b` for point `p`.
    offsets: Vec<usize>,
    dofs: Vec<usize>,
    b: Vec<[f64; 3]>,
}

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/√3

const Q4_RULE: [([f64; 2], f64); 4] = [
    ([-GAUSS, -GAUSS], 1.0),
    ([GAUSS, -GAUSS], 1.0),
    ([GAUSS, GAUSS], 1.0),
    ([-GAUSS, GAUSS], 1.0),
];

const SIXTH: f64 = 1.0 / 6.0;
const T6_RULE: [([f64; 2], f64); 3] = [
    ([SIXTH, SIXTH], SIXTH),
    ([2.0 / 3.0, SIXTH], SIXTH),
    ([SIXTH, 2.0 / 3.0], SIXTH),
];

/// Shape functions and reference derivatives at `(xi, eta)`.
fn shape(kind: ElementKind, xi: f64, eta: f64, n: &mut [f64], dn: &mut [[f64; 2]]) {
    match kind {
        ElementKind::Q4 => {
            const S: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
            for (k, s) in S.iter().enumerate() {
                let a = 1.0 + s[0] * xi;
                let b = 1.0 + s[1] * eta;
                n[k] = 0.25 * a * b;
                dn[k] = [0.25 * s[0] * b, 0.25 * s[1] * a];
            }
        }
        ElementKind::T6 => {
            let l = [1.0 - xi - eta, xi, eta];
            let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            for k in 0..3 {
                n[k] = l[k] * (2.0 * l[k] - 1.0);
                let f = 4.0 * l[k] - 1.0;
                dn[k] = [f * dl[k][0], f * dl[k][1]];
            }
            for (k, (i, j)) in [(0usize, 1usize), (1, 2), (2, 0)].into_iter().enumerate() {
                n[3 + k] = 4.0 * l[i] * l[j];
                dn[3 + k] = [
                    4.0 * (l[i] * dl[j][0] + l[j] * dl[i][0]),
                    4.0 * (l[i] * dl[j][1] + l[j] * dl[i][1]),
                ];
            }
        }
    }
}

impl Quadrature {
    /// Builds `w_e` and `B_e` for every quadrature point (2×2 Gauss on Q4,
    /// 3-point interior rule on T6).
    pub fn build(mesh: &Mesh) -> Result<Self> {
        mesh.validate()?;
        let mut q = Quadrature {
            n_dofs: mesh.n_dofs(),
            element: Vec::new(),
            weight: Vec::new(),
            location: Vec::new(),
            offsets: vec![0],
            dofs: Vec::new(),
            b: Vec::new(),
        };
        let mut n = [0.0; 6];
        let mut dn = [[0.0; 2]; 6];
        for (e, el) in mesh.elements.iter().enumerate() {
            let rule: &[([f64; 2], f64)] = match el.kind {
                ElementKind::Q4 => &Q4_RULE,
                ElementKind::T6 => &T6_RULE,
            };
            let nn = el.conn.len();
            for &(xi, wq) in rule {
                shape(el.kind, xi[0], xi[1], &mut n[..nn], &mut dn[..nn]);
                let mut jac = [[0.0; 2]; 2];
                let mut x = [0.0; 2];
                for k in 0..nn {
                    let p = mesh.nodes[el.conn[k]];
                    for r in 0..2 {
                        x[r] += n[k] * p[r];
                        jac[r][0] += p[r] * dn[k][0];
                        jac[r][1] += p[r] * dn[k][1];
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if !(det > 0.0) {
                    return Err(Error::Geometry { element: e, det });
                }
                // dN/dx = J⁻ᵀ dN/dξ
                let inv = [
                    [jac[1][1] / det, -jac[0][1] / det],
                    [-jac[1][0] / det, jac[0][0] / det],
                ];
                for k in 0..nn {
                    let nx = inv[0][0] * dn[k][0] + inv[1][0] * dn[k][1];
                    let ny = inv[0][1] * dn[k][0] + inv[1][1] * dn[k][1];
                    let node = el.conn[k];
                    q.dofs.push(dof(node, 0));
                    q.b.push([nx, 0.0, ny * FRAC_1_SQRT_2]);
                    q.dofs.push(dof(node, 1));
                    q.b.push([0.0, ny, nx * FRAC_1_SQRT_2]);
                }
                q.element.push(e);
                q.weight.push(wq * det);
                q.location.push(x);
                q.offsets.push(q.dofs.len());
            }
        }
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn elements(&self) -> &[usize] {
        &self.element
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.location
    }

    pub fn point(&self, p: usize) -> QuadraturePoint<'_> {
        let r = self.offsets[p]..self.offsets[p + 1];
        QuadraturePoint {
            element: self.element[p],
            weight: self.weight[p],
            location: self.location[p],
            dofs: &self.dofs[r.clone()],
            b: &self.b[r],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = QuadraturePoint<'_>> {
        (0..self.len()).map(|p| self.point(p))
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    fn check_dofs(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_dofs {
            return Err(Error::Dimension {
                what: "nodal vector",
                expected: self.n_dofs,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Per-point strains `B_e·u`.
    pub fn strains(&self, u: &[f64]) -> Result<Vec<Mandel>> {
        self.check_dofs(u)?;
        Ok(crate::par::map_range(self.len(), |p| self.point(p).strain(u)))
    }

    /// `Σ w_e B_eᵀ σ_e` as a full nodal force vector.
    pub fn internal_forces(&self, stresses: &[Mandel]) -> Result<Vec<f64>> {
        if stresses.len() != self.len() {
            return Err(Error::Dimension {
                what: "per-point stresses",
                expected: self.len(),
                got: stresses.len(),
            });
        }
        let mut f = vec![0.0; self.n_dofs];
        // sequential scatter keeps the summation order fixed
        for (p, s) in stresses.iter().enumerate() {
            self.point(p).scatter_stress(s, &mut f);
        }
        Ok(f)
    }
}
