use serde::{Deserialize, Serialize};

use super::{build_from_parts, DiscreteSpace, Potential};
use crate::error::{invalid, Result};

/// JSON description of a space:
///
/// ```json
/// {"kind": "interval", "n": 201, "L": 5.0,
///  "potential": {"name": "quadratic", "params": {"a": 1.0}}}
/// ```
///
/// Circles take `"R"` instead of `"L"`. Products list their `"factors"`;
/// graphs list `"edges"` as `[i, j, length, weight]` and an optional
/// `"measure"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<GraphEdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<f64>>,
}

/// `{"name": ..., "params": {...}}`; kept as a thin wrapper so unknown
/// parameter keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PotentialSpec(pub Potential);

/// `[i, j, length, weight]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdgeSpec(pub usize, pub usize, pub f64, pub f64);

impl SpaceSpec {
    pub fn interval(n: usize, half_width: f64, potential: Option<Potential>) -> Self {
        Self {
            kind: "interval".into(),
            n: Some(n),
            half_width: Some(half_width),
            radius: None,
            potential: potential.map(PotentialSpec),
            factors: Vec::new(),
            edges: Vec::new(),
            measure: None,
        }
    }

    pub fn potential(&self) -> Option<&Potential> {
        self.potential.as_ref().map(|p| &p.0)
    }

    pub fn build(&self) -> Result<DiscreteSpace> {
        if let Some(p) = self.potential() {
            p.validate()?;
        }
        let flat = Potential::default();
        let pot = self.potential().unwrap_or(&flat);
        let v = |x: f64| pot.value(x);
        let n = || {
            self.n
                .ok_or_else(|| invalid(format!("{} space needs \"n\"", self.kind)))
        };
        match self.kind.as_str() {
            "interval" => {
                let l = self
                    .half_width
                    .ok_or_else(|| invalid("interval space needs \"L\""))?;
                build_from_parts("interval", n()?, l, &v)
            }
            "circle" => {
                let r = self.radius.ok_or_else(|| invalid("circle space needs \"R\""))?;
                build_from_parts("circle", n()?, r, &v)
            }
            "product" => {
                if self.factors.len() < 2 {
                    return Err(invalid("product space needs at least two factors"));
                }
                let mut acc = self.factors[0].build()?;
                for f in &self.factors[1..] {
                    acc = DiscreteSpace::product(&acc, &f.build()?)?;
                }
                Ok(acc)
            }
            "graph" => {
                let edges: Vec<_> = self.edges.iter().map(|e| (e.0, e.1, e.2, e.3)).collect();
                DiscreteSpace::graph(n()?, &edges, self.measure.as_deref())
            }
            other => Err(invalid(format!(
                "unknown space kind {other:?} (expected interval, circle, product or graph)"
            ))),
        }
    }

    /// `V''` at every site, for one-dimensional specs with an analytic potential;
    /// products get `None`.
    pub fn potential_curvature(&self, space: &DiscreteSpace) -> Option<Vec<f64>> {
        if !matches!(self.kind.as_str(), "interval" | "circle") {
            return None;
        }
        let flat = Potential::default();
        let pot = self.potential().unwrap_or(&flat);
        (0..space.len())
            .map(|i| pot.second_derivative(space.sites()[i].coords[0]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds_interval() {
        let spec: SpaceSpec = serde_json::from_str(
            r#"{"kind":"interval","n":5,"L":2,"potential":{"name":"quadratic","params":{"a":1}}}"#,
        )
        .unwrap();
        let s = spec.build().unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(spec.potential_curvature(&s).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn rejects_unknown_keys_and_kinds() {
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"interval","n":5,"L":2,"x":1}"#).is_err());
        assert!(serde_json::from_str::<SpaceSpec>(
            r#"{"kind":"interval","n":5,"L":2,"potential":{"name":"quadratic","params":{"q":1}}}"#
        )
        .is_err());
        let spec: SpaceSpec = serde_json::from_str(r#"{"kind":"torus","n":5}"#).unwrap();
        assert!(spec.build().is_err());
        let spec: SpaceSpec = serde_json::from_str(r#"{"kind":"interval","n":5}"#).unwrap();
        assert!(spec.build().is_err());
    }

    #[test]
    fn product_and_graph_specs() {
        let spec: SpaceSpec = serde_json::from_str(
            r#"{"kind":"product","factors":[{"kind":"interval","n":3,"L":1},{"kind":"circle","n":4,"R":1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap().len(), 12);
        let spec: SpaceSpec = serde_json::from_str(
            r#"{"kind":"graph","n":3,"edges":[[0,1,1.0,1.0],[1,2,2.0,0.5]]}"#,
        )
        .unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.distance(0, 2), 3.0);
    }
}
