//! Local strain–stress states, the phase-space metric, and material databases.

mod database;
mod isotropic;
pub mod kdtree;
mod metric;

use nalgebra::Vector3;

pub use database::{nearest_state, IsoMatch, MaterialDatabase};
pub use isotropic::{optimal_rotation_2d, rotate_mandel, rotate_state, Rotation2d};
pub use metric::{global_distance, global_distance_sq, local_norm, Metric};

use crate::{Error, Result};

/// Symmetric 2-tensor in Mandel form `(xx, yy, √2·xy)`.
pub type Mandel = Vector3<f64>;

/// Converts tensor components to Mandel form.
#[inline]
pub fn mandel(xx: f64, yy: f64, xy: f64) -> Mandel {
    Vector3::new(xx, yy, std::f64::consts::SQRT_2 * xy)
}

/// Tensor components `(xx, yy, xy)` of a Mandel vector.
#[inline]
pub fn tensor_components(v: &Mandel) -> [f64; 3] {
    [v[0], v[1], v[2] / std::f64::consts::SQRT_2]
}

/// A point `(ε, σ)` of the local phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalState {
    pub strain: Mandel,
    pub stress: Mandel,
}

impl LocalState {
    pub fn new(strain: Mandel, stress: Mandel) -> Self {
        Self { strain, stress }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.strain.iter().chain(self.stress.iter()).all(|x| x.is_finite())
    }

    /// Strain energy density `ε·σ`.
    pub fn energy_density(&self) -> f64 {
        self.strain.dot(&self.stress)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.strain * s, self.stress * s)
    }
}

impl std::ops::Sub for LocalState {
    type Output = LocalState;
    fn sub(self, rhs: Self) -> Self {
        LocalState::new(self.strain - rhs.strain, self.stress - rhs.stress)
    }
}

impl std::ops::Add for LocalState {
    type Output = LocalState;
    fn add(self, rhs: Self) -> Self {
        LocalState::new(self.strain + rhs.strain, self.stress + rhs.stress)
    }
}

/// Per-point assignment of mechanical states to database entries.
///
/// `angles` is present only for the isotropic distance, where each point is
/// matched to a rotated copy of its database entry.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMapping {
    pub indices: Vec<usize>,
    pub angles: Option<Vec<f64>>,
}

impl StateMapping {
    pub fn new(indices: Vec<usize>) -> Self {
        Self {
            indices,
            angles: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of points whose database index differs from `other`.
    pub fn changes_from(&self, other: &StateMapping) -> usize {
        self.indices
            .iter()
            .zip(&other.indices)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Checks every index against a database of `n_states` entries.
    pub fn validate(&self, n_states: usize) -> Result<()> {
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= n_states) {
            return Err(Error::Dimension {
                what: "mapping index",
                expected: n_states,
                got: bad,
            });
        }
        Ok(())
    }

    /// Database states selected by this mapping, rotated when angles are present.
    pub fn mapped_states(&self, db: &MaterialDatabase) -> Vec<LocalState> {
        let states = db.states();
        match &self.angles {
            None => self.indices.iter().map(|&i| states[i]).collect(),
            Some(angles) => self
                .indices
                .iter()
                .zip(angles)
                .map(|(&i, &th)| rotate_state(&states[i], th))
                .collect(),
        }
    }
}
