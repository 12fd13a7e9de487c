use super::{assemble_operator, DiscreteModel};
use crate::datagen::LinearElasticLaw;
use crate::phase_space::{LocalState, Mandel};
use crate::Result;

/// Classical linear-elastic solution on a discrete model.
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub u: Vec<f64>,
    pub strains: Vec<Mandel>,
    pub stresses: Vec<Mandel>,
    /// Internal forces minus applied forces; non-zero only at constrained DOFs.
    pub reactions: Vec<f64>,
    /// `½ Σ w σ·ε` (J per unit thickness).
    pub energy: f64,
}

impl FemSolution {
    pub fn states(&self) -> Vec<LocalState> {
        self.strains
            .iter()
            .zip(&self.stresses)
            .map(|(e, s)| LocalState::new(*e, *s))
            .collect()
    }
}

/// Solves the model with a linear elastic law.
pub fn fem_reference_solve(model: &DiscreteModel, law: &LinearElasticLaw) -> Result<FemSolution> {
    let metric = law.metric()?;
    let op = assemble_operator(&model.quad, &metric, &model.bcs)?;
    let u = op.solve(&model.bcs.forces, &model.bcs.values())?;
    let strains = model.quad.strains(&u)?;
    let stresses: Vec<Mandel> = strains.iter().map(|e| law.stress(e)).collect();
    let fi = model.quad.internal_forces(&stresses)?;
    let reactions: Vec<f64> = fi.iter().zip(&model.bcs.forces).map(|(a, b)| a - b).collect();
    let energy = 0.5
        * model
            .weights()
            .iter()
            .zip(strains.iter().zip(&stresses))
            .map(|(w, (e, s))| w * e.dot(s))
            .sum::<f64>();
    Ok(FemSolution {
        u,
        strains,
        stresses,
        reactions,
        energy,
    })
}
