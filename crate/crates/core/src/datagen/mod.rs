//! Generators: elastic law, regular databases, meshes, virtual experiments.

mod experiment;
mod law;
pub mod meshgen;
mod problems;
mod regdb;

pub use law::{fit_isotropic_law, hooke_stress, LinearElasticLaw};
pub use meshgen::{gen_mesh, MeshSpec};
pub use experiment::{run_virtual_experiment, snapshots_for_ratio, BiaxialRig, LoadHistory, LoadPoint};
pub use regdb::{gen_regular_db, regular_states, AxisSpec, StrainGridSpec};
pub use problems::{lbeam_problem, plate_problem};
