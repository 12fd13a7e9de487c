use super::meshgen::{l_beam, plate_hole_quarter, LBeamParams, PlateParams};
use crate::fe::{BoundaryConditions, DiscreteModel};
use crate::Result;

/// Quarter plate under vertical compression: symmetry on `left` and
/// `bottom`, the `top` edge displaced by `strain` times the quarter height.
pub fn plate_problem(params: &PlateParams, strain: f64) -> Result<DiscreteModel> {
    let mesh = plate_hole_quarter(params)?;
    let h = 0.5 * params.height_factor * params.radius;
    let mut bcs = BoundaryConditions::new(mesh.n_dofs());
    bcs.fix_set(&mesh, "left", 0, 0.0)?;
    bcs.fix_set(&mesh, "bottom", 1, 0.0)?;
    bcs.fix_set(&mesh, "top", 1, strain * h)?;
    DiscreteModel::new(mesh, bcs)
}

/// L-beam clamped at its base with a horizontal displacement of the top edge
/// (vertical motion of the top left free).
pub fn lbeam_problem(params: &LBeamParams, displacement: f64) -> Result<DiscreteModel> {
    let mesh = l_beam(params)?;
    let mut bcs = BoundaryConditions::new(mesh.n_dofs());
    bcs.fix_set(&mesh, "bottom", 0, 0.0)?;
    bcs.fix_set(&mesh, "bottom", 1, 0.0)?;
    bcs.fix_set(&mesh, "top", 0, displacement)?;
    DiscreteModel::new(mesh, bcs)
}
