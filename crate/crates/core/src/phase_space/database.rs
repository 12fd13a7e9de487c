use std::sync::OnceLock;

use super::isotropic::{require_isotropic, IsoParts};
use super::kdtree::{dist_sq, KdTree};
use super::{LocalState, Metric};
use crate::{Error, Result};

/// Immutable material database `D` with an exact nearest-neighbor index.
#[derive(Debug)]
pub struct MaterialDatabase {
    states: Vec<LocalState>,
    metric: Metric,
    embedded: Vec<[f64; 6]>,
    tree: KdTree<6>,
    iso: OnceLock<Option<IsoIndex>>,
}

#[derive(Debug)]
struct IsoIndex {
    parts: Vec<IsoParts>,
    tree: KdTree<4>,
    moduli: (f64, f64),
}

/// Nearest rotated database entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoMatch {
    pub index: usize,
    pub angle: f64,
    pub distance_sq: f64,
}

impl MaterialDatabase {
    /// Indexes `states` under `metric` (the k-d tree lives in the embedded
    /// coordinates `(Lε, L⁻ᵀσ)`).
    pub fn build(states: Vec<LocalState>, metric: Metric) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        if let Some(bad) = states.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        let embedded = crate::par::map_slice(&states, |s| metric.embed(s));
        let tree = KdTree::new(&embedded);
        Ok(Self {
            states,
            metric,
            embedded,
            tree,
            iso: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[LocalState] {
        &self.states
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Nearest entry as `(index, squared distance)`. `hint` is a previously
    /// matched index used to tighten the initial search radius.
    pub fn nearest_sq(&self, z: &LocalState, hint: Option<usize>) -> (usize, f64) {
        let q = self.metric.embed(z);
        let hint = hint
            .filter(|&i| i < self.len())
            .map(|i| (i, dist_sq(&q, &self.embedded[i])));
        self.tree.nearest(&q, hint).expect("database is non-empty")
    }

    /// Exhaustive linear scan with the same distance evaluation and tie rule
    /// as the index.
    pub fn nearest_scan_sq(&self, z: &LocalState) -> (usize, f64) {
        let q = self.metric.embed(z);
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.embedded.iter().enumerate() {
            let d = dist_sq(&q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn iso_index(&self) -> Result<&IsoIndex> {
        self.iso
            .get_or_init(|| {
                let (ks, kd) = self.metric.isotropic_moduli()?;
                let parts = crate::par::map_slice(&self.states, |s| IsoParts::new(s, ks, kd));
                let feats: Vec<[f64; 4]> = parts.iter().map(|p| p.features()).collect();
                Some(IsoIndex {
                    tree: KdTree::new(&feats),
                    parts,
                    moduli: (ks, kd),
                })
            })
            .as_ref()
            .ok_or_else(|| require_isotropic(&self.metric).unwrap_err())
    }

    /// Nearest entry over all in-plane rotations of the database.
    ///
    /// The search is exact: rotation invariants give a lower bound that
    /// prunes the tree, and surviving candidates are evaluated with the
    /// closed-form minimal distance.
    pub fn nearest_isotropic(&self, z: &LocalState, hint: Option<usize>) -> Result<IsoMatch> {
        let idx = self.iso_index()?;
        let (ks, kd) = idx.moduli;
        let pz = IsoParts::new(z, ks, kd);
        let hint = hint
            .filter(|&i| i < self.len())
            .map(|i| (i, pz.min_dist_sq(&idx.parts[i]).0));
        let (index, distance_sq) = idx
            .tree
            .nearest_by(&pz.features(), hint, |i| pz.min_dist_sq(&idx.parts[i]).0)
            .expect("database is non-empty");
        let (_, angle) = pz.min_dist_sq(&idx.parts[index]);
        Ok(IsoMatch {
            index,
            angle,
            distance_sq,
        })
    }

    /// Exhaustive counterpart of [`MaterialDatabase::nearest_isotropic`].
    pub fn nearest_isotropic_scan(&self, z: &LocalState) -> Result<IsoMatch> {
        let idx = self.iso_index()?;
        let (ks, kd) = idx.moduli;
        let pz = IsoParts::new(z, ks, kd);
        let mut best = IsoMatch {
            index: 0,
            angle: 0.0,
            distance_sq: f64::INFINITY,
        };
        for (i, p) in idx.parts.iter().enumerate() {
            let (d, a) = pz.min_dist_sq(p);
            if d < best.distance_sq {
                best = IsoMatch {
                    index: i,
                    angle: a,
                    distance_sq: d,
                };
            }
        }
        Ok(best)
    }
}

/// Closest database entry to `z` and its local distance.
pub fn nearest_state(z: &LocalState, db: &MaterialDatabase) -> (usize, f64) {
    let (i, d2) = db.nearest_sq(z, None);
    (i, d2.max(0.0).sqrt())
}
