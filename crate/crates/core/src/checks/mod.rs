//! Numeric verifiers for curvature inequalities.
//!
//! Every check produces margins with the sign convention "margin ≥ -τ means
//! the inequality holds within the discretisation budget τ" and collects
//! them into a [`CheckReport`].

mod bochner;
mod contraction;
mod entropy;
mod weighted;

pub use bochner::{be_check, be_point_margins, be_scan, be_scan_functions, gradient_estimate_check};
pub use contraction::{wp_contraction_check, Exponent};
pub use entropy::{cd_check, ent_slope_check, evi_check, pathwise_convexity_check, SlopeEstimate};
pub use weighted::{change_of_measure, lambda_convexity_check, tensor_curvature};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Pass/fail against the stated tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Finer reading of a verdict: a pass with a negative margin is only a pass
/// within the discretisation budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assessment {
    Pass,
    InconclusiveWithinBudget,
    Fail,
}

/// The input that produced a particular margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub margin: f64,
    pub input: Value,
}

/// Outcome of one inequality check over a sampled family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub residuals: Vec<f64>,
    pub min_margin: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub assessment: Assessment,
    pub witnesses: Vec<Witness>,
    /// Number of sampled instances (functions, pairs or paths) behind the residuals.
    pub family_size: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl CheckReport {
    /// Builds a report from per-instance residuals and a closure that
    /// describes the input behind residual `i`; only the worst instance is
    /// kept as a witness.
    pub fn from_residuals(
        name: &str,
        residuals: Vec<f64>,
        tolerance: f64,
        family_size: usize,
        describe: impl Fn(usize) -> Value,
    ) -> Self {
        let (arg, min_margin) = residuals
            .iter()
            .copied()
            .enumerate()
            .fold((usize::MAX, f64::INFINITY), |(bi, bv), (i, v)| {
                if v < bv || v.is_nan() {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        let witnesses = if arg == usize::MAX {
            Vec::new()
        } else {
            vec![Witness {
                margin: min_margin,
                input: describe(arg),
            }]
        };
        let min_margin = if residuals.is_empty() { 0.0 } else { min_margin };
        let (verdict, assessment) = judge(min_margin, tolerance);
        Self {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            residuals,
            min_margin,
            tolerance,
            verdict,
            assessment,
            witnesses,
            family_size,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_parameter(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// Re-judges the residuals against another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        (self.verdict, self.assessment) = judge(self.min_margin, tolerance);
        self
    }

    /// Merges several reports into one covering all their residuals; the
    /// tolerance of the merged report is the smallest of the parts and each
    /// part keeps its own verdict in the diagnostics.
    pub fn merge(name: &str, parts: Vec<CheckReport>) -> Self {
        let tolerance = parts.iter().map(|p| p.tolerance).fold(f64::INFINITY, f64::min);
        let passed = parts.iter().all(|p| p.passed());
        let mut residuals = Vec::new();
        let mut witnesses = Vec::new();
        let mut family = 0;
        let mut diagnostics = BTreeMap::new();
        let mut min_margin = f64::INFINITY;
        let mut parameters = BTreeMap::new();
        for p in parts {
            residuals.extend(&p.residuals);
            witnesses.extend(p.witnesses);
            family += p.family_size;
            min_margin = min_margin.min(p.min_margin);
            for (k, v) in p.diagnostics {
                diagnostics.insert(format!("{}.{}", p.name, k), v);
            }
            diagnostics.insert(format!("{}.min_margin", p.name), p.min_margin);
            parameters.insert(p.name.clone(), Value::Object(p.parameters.into_iter().collect()));
        }
        let verdict = if passed { Verdict::Pass } else { Verdict::Fail };
        let assessment = if !passed {
            Assessment::Fail
        } else if min_margin >= 0.0 {
            Assessment::Pass
        } else {
            Assessment::InconclusiveWithinBudget
        };
        Self {
            name: name.to_string(),
            parameters,
            residuals,
            min_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
            tolerance: if tolerance.is_finite() { tolerance } else { 0.0 },
            verdict,
            assessment,
            witnesses,
            family_size: family,
            diagnostics,
        }
    }
}

fn judge(min_margin: f64, tolerance: f64) -> (Verdict, Assessment) {
    if min_margin >= 0.0 {
        (Verdict::Pass, Assessment::Pass)
    } else if min_margin >= -tolerance {
        (Verdict::Pass, Assessment::InconclusiveWithinBudget)
    } else {
        (Verdict::Fail, Assessment::Fail)
    }
}
