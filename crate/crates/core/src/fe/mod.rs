//! Plane-strain finite elements: meshes, quadrature, assembly and the
//! constrained direct solver shared by every linear solve in the crate.
//!
//! Unit thickness throughout, so areas are m² and energies J/m.

mod assembly;
mod fem;
mod mesh;
mod quadrature;

use std::collections::BTreeMap;

pub use assembly::{assemble_stiffness, CsrMatrix, DofMap, FactorizedOperator};
pub use fem::{fem_reference_solve, FemSolution};
pub use mesh::{dof, Element, ElementKind, Mesh};
pub use quadrature::{Quadrature, QuadraturePoint};

use crate::phase_space::{Mandel, Metric};
use crate::{Error, Result};

/// Prescribed displacements and applied nodal forces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet: BTreeMap<usize, f64>,
    pub forces: Vec<f64>,
}

impl BoundaryConditions {
    pub fn new(n_dofs: usize) -> Self {
        Self {
            dirichlet: BTreeMap::new(),
            forces: vec![0.0; n_dofs],
        }
    }

    /// Prescribes `value` on `component` of every node in a node set.
    pub fn fix_set(&mut self, mesh: &Mesh, set: &str, component: usize, value: f64) -> Result<()> {
        for &n in mesh.node_set(set)? {
            self.dirichlet.insert(dof(n, component), value);
        }
        Ok(())
    }

    pub fn validate(&self, n_dofs: usize) -> Result<()> {
        if self.forces.len() != n_dofs {
            return Err(Error::BoundaryConditions(format!(
                "force vector has {} entries, model has {n_dofs} DOFs",
                self.forces.len()
            )));
        }
        for (&d, &v) in &self.dirichlet {
            if d >= n_dofs {
                return Err(Error::BoundaryConditions(format!("DOF {d} does not exist")));
            }
            if !v.is_finite() {
                return Err(Error::BoundaryConditions(format!("non-finite prescribed value at DOF {d}")));
            }
            if self.forces[d] != 0.0 {
                return Err(Error::BoundaryConditions(format!("DOF {d} is both loaded and prescribed")));
            }
        }
        if self.forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::BoundaryConditions("non-finite applied force".into()));
        }
        Ok(())
    }

    pub fn constrained(&self) -> Vec<usize> {
        self.dirichlet.keys().copied().collect()
    }

    pub fn values(&self) -> Vec<(usize, f64)> {
        self.dirichlet.iter().map(|(&d, &v)| (d, v)).collect()
    }
}

/// Mesh, quadrature and boundary conditions of one boundary-value problem.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    pub mesh: Mesh,
    pub quad: Quadrature,
    pub bcs: BoundaryConditions,
}

impl DiscreteModel {
    pub fn new(mesh: Mesh, bcs: BoundaryConditions) -> Result<Self> {
        let quad = Quadrature::build(&mesh)?;
        bcs.validate(mesh.n_dofs())?;
        Ok(Self { mesh, quad, bcs })
    }

    pub fn n_points(&self) -> usize {
        self.quad.len()
    }

    pub fn weights(&self) -> &[f64] {
        self.quad.weights()
    }

    /// Free-DOF equilibrium residual `‖(Σ w Bᵀσ − f)_free‖`, relative to the
    /// external force scale (applied forces plus reactions).
    pub fn equilibrium_residual(&self, stresses: &[Mandel]) -> Result<f64> {
        let fi = self.quad.internal_forces(stresses)?;
        let (mut num, mut scale) = (0.0, 0.0);
        for (d, (a, b)) in fi.iter().zip(&self.bcs.forces).enumerate() {
            if self.bcs.dirichlet.contains_key(&d) {
                scale += a * a;
            } else {
                num += (a - b) * (a - b);
                scale += b * b;
            }
        }
        Ok(if scale > 0.0 { (num / scale).sqrt() } else { num.sqrt() })
    }
}

/// Quadrature points with `w_e` and `B_e` for every element.
pub fn build_quadrature(mesh: &Mesh) -> Result<Quadrature> {
    Quadrature::build(mesh)
}

/// Assembles and factorizes `Σ w B^T C B` with the model's Dirichlet DOFs eliminated.
pub fn assemble_operator(quad: &Quadrature, metric: &Metric, bcs: &BoundaryConditions) -> Result<FactorizedOperator> {
    bcs.validate(quad.n_dofs())?;
    let dofs = DofMap::new(quad.n_dofs(), &bcs.constrained(), &[])?;
    FactorizedOperator::new(quad, metric.c(), dofs)
}

/// Solves with prescribed values at constrained DOFs.
pub fn solve_displacement(op: &FactorizedOperator, rhs: &[f64], dirichlet: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let vals: Vec<(usize, f64)> = dirichlet.iter().map(|(&d, &v)| (d, v)).collect();
    op.solve(rhs, &vals)
}

/// `Σ w_e B_eᵀ σ_e`.
pub fn internal_forces(quad: &Quadrature, stresses: &[Mandel]) -> Result<Vec<f64>> {
    quad.internal_forces(stresses)
}
