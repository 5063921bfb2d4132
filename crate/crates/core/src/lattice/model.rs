use std::path::Path;

use serde::{Deserialize, Serialize};

use super::local::LocalFunction;
use super::Configuration;
use crate::error::{Error, Result};

/// Jump-rate modulation c, a positive local function on `{-r, …, r+1}`.
///
/// The rate across bond {x, x+1} is c(τ_x η) times p_n or q_n.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    name: String,
    radius: usize,
    c: LocalFunction,
    c_min: f64,
    c_max: f64,
}

impl RateModel {
    /// Build from a table indexed by the occupations of sites −r..=r+1
    /// (bit i ↔ site i − r) and declared bounds.
    pub fn from_table(
        name: impl Into<String>,
        radius: usize,
        table: Vec<f64>,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        let c = LocalFunction::new(-(radius as isize), 2 * radius + 2, table)?;
        let (lo, hi) = c
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let (c_min, c_max) = bounds.unwrap_or((lo, hi));
        if !(c_min > 0.0 && c_min <= c_max && c_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate bounds must satisfy 0 < c_min <= c_max < inf, got [{c_min}, {c_max}]"
            )));
        }
        for (pattern, &value) in c.values.iter().enumerate() {
            if !(value >= c_min && value <= c_max) {
                return Err(Error::BoundsViolated {
                    value,
                    min: c_min,
                    max: c_max,
                    pattern,
                });
            }
        }
        Ok(RateModel {
            name: name.into(),
            radius,
            c,
            c_min,
            c_max,
        })
    }

    pub fn from_fn(name: impl Into<String>, radius: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let table = LocalFunction::from_fn(-(radius as isize), 2 * radius + 2, f).values;
        Self::from_table(name, radius, table, None)
    }

    /// Simple exclusion, c ≡ 1.
    pub fn ssep() -> Self {
        Self::constant(1.0).expect("unit rate is valid").renamed("ssep")
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::from_fn(format!("constant-{value}"), 0, |_| value)
    }

    /// c(η) = 1 + b(η(−1) + η(2)), gradient with
    /// h(η) = η(0) + b(η(−1)η(0) + η(0)η(1) − η(−1)η(1)).
    pub fn gradient_example(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient example needs b in (0, 1), got {b}"
            )));
        }
        // sites -1, 0, 1, 2 at indices 0..4
        Self::from_fn(format!("gradient-b{b}"), 1, |o| 1.0 + b * (o[0] + o[3]) as f64)
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.c_min, self.c_max)
    }

    /// c as a local function anchored at the bond's left site.
    pub fn local(&self) -> &LocalFunction {
        &self.c
    }

    pub fn window_offset(&self) -> isize {
        -(self.radius as isize)
    }

    pub fn window_width(&self) -> usize {
        2 * self.radius + 2
    }

    /// c_x(η) = c(τ_x η).
    #[inline]
    pub fn rate_at(&self, config: &Configuration, x: isize) -> f64 {
        self.c.eval_at(config, x)
    }

    pub fn to_def(&self) -> ModelDef {
        ModelDef {
            name: self.name.clone(),
            window_radius: Some(self.radius),
            builtin: None,
            b: None,
            c_table: Some(self.c.values.clone()),
            bounds: Some([self.c_min, self.c_max]),
        }
    }
}

/// JSON model definition: either a builtin id or an explicit c table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<usize>,
    /// `ssep` or `gradient` (the latter takes `b`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_table: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

impl ModelDef {
    pub fn ssep() -> Self {
        ModelDef {
            name: "ssep".into(),
            window_radius: None,
            builtin: Some("ssep".into()),
            b: None,
            c_table: None,
            bounds: None,
        }
    }

    pub fn gradient(b: f64) -> Self {
        ModelDef {
            name: format!("gradient-b{b}"),
            window_radius: None,
            builtin: Some("gradient".into()),
            b: Some(b),
            c_table: None,
            bounds: None,
        }
    }

    pub fn build(&self) -> Result<RateModel> {
        match (&self.builtin, &self.c_table) {
            (Some(id), None) => {
                let model = match id.as_str() {
                    "ssep" => RateModel::ssep(),
                    "gradient" => RateModel::gradient_example(self.b.ok_or_else(|| {
                        Error::InvalidParameter("builtin `gradient` needs `b`".into())
                    })?)?,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown builtin model `{other}`"
                        )))
                    }
                };
                Ok(model.renamed(&self.name))
            }
            (None, Some(table)) => {
                let radius = self.window_radius.ok_or_else(|| {
                    Error::InvalidParameter("explicit c_table needs `window_radius`".into())
                })?;
                RateModel::from_table(
                    self.name.clone(),
                    radius,
                    table.clone(),
                    self.bounds.map(|[lo, hi]| (lo, hi)),
                )
            }
            _ => Err(Error::InvalidParameter(
                "model definition needs exactly one of `builtin` and `c_table`".into(),
            )),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssep_is_unit() {
        let m = RateModel::ssep();
        assert_eq!(m.radius(), 0);
        assert!(m.local().values.iter().all(|&v| v == 1.0));
        assert_eq!(m.bounds(), (1.0, 1.0));
    }

    #[test]
    fn gradient_example_table() {
        let m = RateModel::gradient_example(0.5).unwrap();
        let config = Configuration::new(vec![1, 0, 0, 1, 0, 1]).unwrap();
        // bond {1,2}: sites 0..=3 → η(0)=1, η(3)=1
        assert_eq!(m.rate_at(&config, 1), 2.0);
        // bond {3,4}: sites 2..=5 → η(2)=0, η(5)=1
        assert_eq!(m.rate_at(&config, 3), 1.5);
        assert!(RateModel::gradient_example(1.2).is_err());
    }

    #[test]
    fn zero_rate_fails_bounds() {
        let mut table = vec![1.0; 4];
        table[2] = 0.0;
        assert!(RateModel::from_table("broken", 0, table.clone(), None).is_err());
        assert!(matches!(
            RateModel::from_table("broken", 0, table, Some((0.5, 2.0))),
            Err(Error::BoundsViolated { pattern: 2, .. })
        ));
    }

    #[test]
    fn model_def_json() {
        let def: ModelDef = serde_json::from_str(r#"{"name":"g","builtin":"gradient","b":0.25}"#).unwrap();
        assert_eq!(def.build().unwrap().name(), "g");
        let table = ModelDef {
            name: "t".into(),
            window_radius: Some(0),
            builtin: None,
            b: None,
            c_table: Some(vec![2.0; 4]),
            bounds: Some([1.0, 3.0]),
        };
        let back: ModelDef = serde_json::from_str(&serde_json::to_string(&table).unwrap()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.build().unwrap().bounds(), (1.0, 3.0));
        let both = ModelDef {
            builtin: Some("ssep".into()),
            ..table
        };
        assert!(both.build().is_err());
    }
}
