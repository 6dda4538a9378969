//! Wasserstein contraction of the heat flow, `W_p(P_tμ, P_tν) ≤ e^{-Kt} W_p(μ, ν)`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::CheckReport;
use crate::error::{invalid, Result};
use crate::semigroup::{heat_flow_measure, SpectralCache};
use crate::space::{DiscreteSpace, ProbMeasure};
use crate::transport::{wasserstein_inf_masses, wasserstein_p_masses};

/// Transport exponent `p ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Infinity(InfinityTag),
}

/// Serialises as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub const INF: Exponent = Exponent::Infinity(InfinityTag::Inf);

    pub fn distance(&self, space: &DiscreteSpace, a: &[f64], b: &[f64]) -> Result<f64> {
        match *self {
            Exponent::Finite(p) => Ok(wasserstein_p_masses(space, a, b, p)?.0),
            Exponent::Infinity(_) => Ok(wasserstein_inf_masses(space, a, b)?.0),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Exponent::Finite(p) => format!("{p}"),
            Exponent::Infinity(_) => "inf".to_string(),
        }
    }
}

/// Default relative budget.
const WP_BUDGET: f64 = 1e-3;

/// Residuals `(e^{-Kt} W_p(μ,ν) - W_p(P_tμ, P_tν)) / W_p(μ,ν)` over all pairs
/// and times (absolute when `μ = ν`). The default budget is `1e-3`, raised
/// for `p = ∞` to one mesh step over the smallest `W∞(μ,ν)`.
pub fn wp_contraction_check(
    space: &DiscreteSpace,
    rate: f64,
    pairs: &[(ProbMeasure, ProbMeasure)],
    times: &[f64],
    exponent: Exponent,
    tolerance: Option<f64>,
) -> Result<CheckReport> {
    if pairs.is_empty() || times.is_empty() {
        return Err(invalid("contraction check needs pairs and times"));
    }
    if let Exponent::Finite(p) = exponent {
        if !(p >= 1.0) {
            return Err(invalid(format!("exponent must be ≥ 1, got {p}")));
        }
    }
    let cache = SpectralCache::heat(space)?;
    let mut residuals = Vec::new();
    let mut labels = Vec::new();
    for (pi, (mu, nu)) in pairs.iter().enumerate() {
        let w0 = exponent.distance(space, &mu.masses(space), &nu.masses(space))?;
        for &t in times {
            let (a, b) = if t == 0.0 {
                (mu.masses(space), nu.masses(space))
            } else {
                (
                    heat_flow_measure(&cache, space, mu, t)?.masses(space),
                    heat_flow_measure(&cache, space, nu, t)?.masses(space),
                )
            };
            let wt = exponent.distance(space, &a, &b)?;
            let margin = (-rate * t).exp() * w0 - wt;
            residuals.push(if w0 > 0.0 { margin / w0 } else { margin });
            labels.push((pi, t, w0, wt));
        }
    }
    // W∞ only takes lattice distances, so its default budget is at least one
    // grid step relative to the smallest initial distance
    let lattice = match exponent {
        Exponent::Infinity(_) => labels
            .iter()
            .map(|l| l.2)
            .filter(|w| *w > 0.0)
            .fold(0.0, |acc: f64, w| acc.max(space.mesh() / w)),
        Exponent::Finite(_) => 0.0,
    };
    let tol = tolerance.unwrap_or(WP_BUDGET.max(lattice));
    let report = CheckReport::from_residuals("contraction-wp", residuals, tol, pairs.len(), |i| {
        let (pi, t, w0, wt) = labels[i];
        json!({"pair": pi, "t": t, "w0": w0, "wt": wt})
    });
    Ok(report
        .with_parameter("p", exponent.label())
        .with_parameter("K", rate)
        .with_parameter("times", times))
}
