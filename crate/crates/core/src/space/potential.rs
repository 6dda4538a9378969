use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Named one-dimensional potentials `V` for weighted spaces `e^{-V} dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `V(x) = a (x - center)² / 2`.
    Quadratic {
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        center: f64,
    },
    /// `V(x) = a x⁴/4 - b x²/2`.
    DoubleWell {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// `V(θ) = a cos θ`.
    Cosine {
        #[serde(default = "one")]
        a: f64,
    },
    /// Values on an equispaced grid over `[lo, hi]`, linearly interpolated.
    Table { lo: f64, hi: f64, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Quadratic { a: 0.0, center: 0.0 }
    }
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        let ok = match self {
            Potential::Quadratic { a, center } => finite(*a) && finite(*center),
            Potential::DoubleWell { a, b } => finite(*a) && finite(*b),
            Potential::Cosine { a } => finite(*a),
            Potential::Table { lo, hi, values } => {
                values.len() >= 2 && lo < hi && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad potential parameters: {self:?}")))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { a, center } => 0.5 * a * (x - center).powi(2),
            Potential::DoubleWell { a, b } => 0.25 * a * x.powi(4) - 0.5 * b * x * x,
            Potential::Cosine { a } => a * x.cos(),
            Potential::Table { lo, hi, values } => {
                let cells = (values.len() - 1) as f64;
                let pos = ((x - lo) / (hi - lo) * cells).clamp(0.0, cells);
                let i = (pos.floor() as usize).min(values.len() - 2);
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// `V''(x)`, the curvature contribution of the tilt; `None` for tables.
    pub fn second_derivative(&self, x: f64) -> Option<f64> {
        match self {
            Potential::Quadratic { a, .. } => Some(*a),
            Potential::DoubleWell { a, b } => Some(3.0 * a * x * x - b),
            Potential::Cosine { a } => Some(-a * x.cos()),
            Potential::Table { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_names_and_defaults() {
        let p: Potential = serde_json::from_str(r#"{"name":"double_well","params":{}}"#).unwrap();
        assert_eq!(p, Potential::DoubleWell { a: 1.0, b: 1.0 });
        assert_eq!(p.value(1.0), -0.25);
        assert_eq!(p.second_derivative(1.0), Some(2.0));
        let t: Potential =
            serde_json::from_str(r#"{"name":"table","params":{"lo":0,"hi":2,"values":[0,1,4]}}"#)
                .unwrap();
        assert_eq!(t.value(1.5), 2.5);
        assert_eq!(t.value(9.0), 4.0);
    }

    #[test]
    fn second_derivative_matches_differences() {
        let p = Potential::Cosine { a: 0.7 };
        let (x, e) = (0.4, 1e-4);
        let fd = (p.value(x + e) - 2.0 * p.value(x) + p.value(x - e)) / (e * e);
        assert!((fd - p.second_derivative(x).unwrap()).abs() < 1e-6);
    }
}
