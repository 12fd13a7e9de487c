use serde::{Deserialize, Serialize};

use super::LinearElasticLaw;
use crate::phase_space::{mandel, LocalState, MaterialDatabase, Metric};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    /// Grid values; both end points are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (k as f64 / (n - 1) as f64)
                }
            })
            .collect()
    }
}

/// Cartesian strain grid in tensor components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainGridSpec {
    pub xx: AxisSpec,
    pub xy: AxisSpec,
    pub yy: AxisSpec,
}

impl StrainGridSpec {
    /// The strain box of the regular reference databases, `n` points per axis.
    pub fn table_box(n: usize) -> Self {
        Self {
            xx: AxisSpec { min: -0.002, max: 0.005, count: n },
            xy: AxisSpec { min: -0.002, max: 0.005, count: n },
            yy: AxisSpec { min: -0.015, max: 0.0025, count: n },
        }
    }

    /// `REG-DB1/2/3` with 30, 50 and 100 points per axis.
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "REG-DB1" => Ok(Self::table_box(30)),
            "REG-DB2" => Ok(Self::table_box(50)),
            "REG-DB3" => Ok(Self::table_box(100)),
            _ => Err(Error::Config(format!("unknown database preset `{name}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, a) in [("xx", self.xx), ("xy", self.xy), ("yy", self.yy)] {
            if !(a.min < a.max && a.count >= 2 && a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::Config(format!("strain axis {n}: need min < max and count >= 2")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xx.count * self.xy.count * self.yy.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid states `(ε, law(ε))`, ordered with `yy` varying fastest.
pub fn regular_states(spec: &StrainGridSpec, law: &LinearElasticLaw) -> Result<Vec<LocalState>> {
    spec.validate()?;
    let (xs, ss, ys) = (spec.xx.values(), spec.xy.values(), spec.yy.values());
    let mut out = Vec::with_capacity(spec.len());
    for &xx in &xs {
        for &xy in &ss {
            for &yy in &ys {
                let e = mandel(xx, yy, xy);
                out.push(LocalState::new(e, law.stress(&e)));
            }
        }
    }
    Ok(out)
}

/// Regular synthetic database indexed under `metric`.
pub fn gen_regular_db(spec: &StrainGridSpec, law: &LinearElasticLaw, metric: &Metric) -> Result<MaterialDatabase> {
    MaterialDatabase::build(regular_states(spec, law)?, metric.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::tensor_components;

    fn law() -> LinearElasticLaw {
        LinearElasticLaw::new(217.5e9, 0.3).unwrap()
    }

    #[test]
    fn corners_only() {
        let mut s = StrainGridSpec::table_box(2);
        s.xx = AxisSpec { min: 0.0, max: 1.0, count: 2 };
        let st = regular_states(&s, &law()).unwrap();
        assert_eq!(st.len(), 8);
    }

    #[test]
    fn preset_size_and_extreme_state() {
        let s = StrainGridSpec::preset("REG-DB1").unwrap();
        let st = regular_states(&s, &law()).unwrap();
        assert_eq!(st.len(), 27_000);
        let hit = st.iter().any(|z| {
            let t = tensor_components(&z.strain);
            t == [0.005, 0.0025, 0.005]
        });
        assert!(hit);
        for z in &st {
            assert_eq!(z.stress, law().stress(&z.strain));
        }
        let mins = st.iter().fold([f64::MAX; 3], |m, z| {
            let t = tensor_components(&z.strain);
            [m[0].min(t[0]), m[1].min(t[1]), m[2].min(t[2])]
        });
        assert_eq!(mins[0], -0.002);
        assert_eq!(mins[1], -0.015);
    }

    #[test]
    fn rejects_bad_axis() {
        let mut s = StrainGridSpec::table_box(3);
        s.yy.count = 1;
        assert!(regular_states(&s, &law()).is_err());
        assert!(StrainGridSpec::preset("REG-DB9").is_err());
    }
}
