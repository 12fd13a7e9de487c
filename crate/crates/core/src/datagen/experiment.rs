use serde::{Deserialize, Serialize};

use super::LinearElasticLaw;
use crate::ddi::{Grip, Snapshot};
use crate::fe::{dof, DofMap, FactorizedOperator, Mesh, Quadrature};
use crate::{Error, Result};

/// One breakpoint of a piecewise-linear load history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadPoint {
    pub time: f64,
    /// Nominal grip strains `[x, y]`: edge displacement over sample length.
    pub strain: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadHistory {
    pub points: Vec<LoadPoint>,
}

impl Default for LoadHistory {
    /// Non-radial path: biaxial tension peaking in x at `t = 1`, then
    /// compression in y peaking at `t = 2`.
    fn default() -> Self {
        let p = |time, x, y| LoadPoint { time, strain: [x, y] };
        Self {
            points: vec![p(0.0, 0.0, 0.0), p(1.0, 0.005, 0.002), p(2.0, 0.0, -0.005)],
        }
    }
}

impl LoadHistory {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("load history has no points".into()));
        }
        for w in self.points.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Config("load history times must increase strictly".into()));
            }
        }
        if self.points.iter().any(|p| !p.time.is_finite() || p.strain.iter().any(|s| !s.is_finite())) {
            return Err(Error::Config("non-finite load history entry".into()));
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.time)
    }

    /// Linear interpolation, constant outside the breakpoints.
    pub fn at(&self, t: f64) -> [f64; 2] {
        let pts = &self.points;
        if t <= pts[0].time {
            return pts[0].strain;
        }
        for w in pts.windows(2) {
            if t <= w[1].time {
                let s = (t - w[0].time) / (w[1].time - w[0].time);
                return [0, 1].map(|c| w[0].strain[c] + s * (w[1].strain[c] - w[0].strain[c]));
            }
        }
        pts[pts.len() - 1].strain
    }

    /// `n` equally spaced instants in `(t_0, t_end]`.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let t0 = self.points[0].time;
        let t1 = self.end_time();
        (1..=n).map(|k| if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 }).collect()
    }
}

/// Biaxial rig on a rectangular sample: `left` and `bottom` roll, `right`
/// and `top` are rigid grips moved in x and y respectively.
#[derive(Clone, Debug)]
pub struct BiaxialRig {
    pub fixed: Vec<usize>,
    pub grip_x: Vec<usize>,
    pub grip_y: Vec<usize>,
    pub length: [f64; 2],
}

impl BiaxialRig {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let xs = |set: &str, c: usize| -> Result<Vec<usize>> { Ok(mesh.node_set(set)?.iter().map(|&n| dof(n, c)).collect()) };
        let mut fixed = xs("left", 0)?;
        fixed.extend(xs("bottom", 1)?);
        fixed.sort_unstable();
        fixed.dedup();
        let b = mesh.bounding_box();
        Ok(Self {
            fixed,
            grip_x: xs("right", 0)?,
            grip_y: xs("top", 1)?,
            length: [b[2] - b[0], b[3] - b[1]],
        })
    }

    pub fn constrained(&self) -> Vec<usize> {
        let mut d = self.fixed.clone();
        d.extend(&self.grip_x);
        d.extend(&self.grip_y);
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// FEM-simulated biaxial test: one snapshot per sampled instant, each with
/// the measured displacement field and the two grip force resultants.
pub fn run_virtual_experiment(
    mesh: &Mesh,
    law: &LinearElasticLaw,
    history: &LoadHistory,
    n_snapshots: usize,
) -> Result<Vec<Snapshot>> {
    history.validate()?;
    if n_snapshots == 0 {
        return Err(Error::Config("at least one snapshot is required".into()));
    }
    let rig = BiaxialRig::new(mesh)?;
    let quad = Quadrature::build(mesh)?;
    let constrained = rig.constrained();
    let op = FactorizedOperator::new(&quad, &law.stiffness(), DofMap::new(quad.n_dofs(), &constrained, &[])?)?;
    let times = history.sample_times(n_snapshots);
    let zero = vec![0.0; quad.n_dofs()];
    let results = crate::par::map_slice(&times, |&t| -> Result<Snapshot> {
        let a = history.at(t);
        let ux = a[0] * rig.length[0];
        let uy = a[1] * rig.length[1];
        let mut vals: Vec<(usize, f64)> = rig.fixed.iter().map(|&d| (d, 0.0)).collect();
        vals.extend(rig.grip_x.iter().map(|&d| (d, ux)));
        vals.extend(rig.grip_y.iter().map(|&d| (d, uy)));
        let u = op.solve(&zero, &vals)?;
        let stresses: Vec<_> = quad.strains(&u)?.iter().map(|e| law.stress(e)).collect();
        let fi = quad.internal_forces(&stresses)?;
        let resultant = |dofs: &[usize]| dofs.iter().map(|&d| fi[d]).sum::<f64>();
        Ok(Snapshot {
            time: t,
            grips: vec![
                Grip { name: "right".into(), dofs: rig.grip_x.clone(), resultant: resultant(&rig.grip_x) },
                Grip { name: "top".into(), dofs: rig.grip_y.clone(), resultant: resultant(&rig.grip_y) },
            ],
            u,
            forces: zero.clone(),
            dirichlet: constrained.clone(),
        })
    });
    let snaps = results.into_iter().collect::<Result<Vec<_>>>()?;
    for s in &snaps {
        log::debug!(
            "t = {:.3}: grip resultants {:.6e} N, {:.6e} N",
            s.time,
            s.grips[0].resultant,
            s.grips[1].resultant
        );
    }
    Ok(snaps)
}

/// Snapshot count giving roughly `ratio` mechanical states per database entry.
pub fn snapshots_for_ratio(points_per_snapshot: usize, n_star: usize, ratio: f64) -> usize {
    ((ratio * n_star as f64 / points_per_snapshot as f64).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_interpolation() {
        let h = LoadHistory::default();
        assert_eq!(h.at(0.0), [0.0, 0.0]);
        assert_eq!(h.at(1.0), [0.005, 0.002]);
        assert_eq!(h.at(1.5), [0.0025, -0.0015]);
        assert_eq!(h.at(3.0), [0.0, -0.005]);
        assert_eq!(h.sample_times(4), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let mut h = LoadHistory::default();
        h.points[1].time = 0.0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn ratio_rounding() {
        assert_eq!(snapshots_for_ratio(9927, 10_000, 200.0), 201);
        assert_eq!(snapshots_for_ratio(1000, 1, 200.0), 1);
    }
}
