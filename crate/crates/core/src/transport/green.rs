use std::io::Write;

use super::GeodesicPlan;
use crate::error::{invalid, Result};
use crate::space::CurvatureField;

/// Green function of the unit interval, `g(s,t) = min{s(1-t), t(1-s)}`.
pub fn green_function(s: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("green function needs s, t in [0, 1], got ({s}, {t})")));
    }
    Ok(green(s, t))
}

pub(crate) fn green(s: f64, t: f64) -> f64 {
    (s * (1.0 - t)).min(t * (1.0 - s))
}

/// Exact integrals `∫₀¹ f(s) φ_j(s) ds` of a piecewise-linear `f` (kink only
/// at `kink`) against the hat functions of the uniform grid `j/S`.
fn hat_weights(resolution: usize, kink: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let ds = 1.0 / resolution as f64;
    let mut w = vec![0.0; resolution + 1];
    let simpson = |a: f64, b: f64, h: &dyn Fn(f64) -> f64| {
        (b - a) / 6.0 * (h(a) + 4.0 * h(0.5 * (a + b)) + h(b))
    };
    for j in 0..resolution {
        let (s0, s1) = (j as f64 * ds, (j + 1) as f64 * ds);
        let left = |s: f64| f(s) * (s1 - s) / ds;
        let right = |s: f64| f(s) * (s - s0) / ds;
        // Products of two linear pieces are quadratics, so Simpson on each
        // kink-free piece is exact.
        let pieces: Vec<(f64, f64)> = if kink > s0 && kink < s1 {
            vec![(s0, kink), (kink, s1)]
        } else {
            vec![(s0, s1)]
        };
        for (a, b) in pieces {
            w[j] += simpson(a, b, &left);
            w[j + 1] += simpson(a, b, &right);
        }
    }
    w
}

/// Product-integration weights for `∫₀¹ g(s,t) f(s) ds` with `f` sampled on
/// the grid `j/S`; they sum to `t(1-t)/2`.
pub fn green_weights(resolution: usize, t: f64) -> Vec<f64> {
    hat_weights(resolution, t, |s| green(s, t))
}

/// Product-integration weights for `∫₀¹ (1-s) f(s) ds`; they sum to `1/2`.
pub fn tail_weights(resolution: usize) -> Vec<f64> {
    hat_weights(resolution, -1.0, |s| 1.0 - s)
}

/// `∫₀¹∫ g(s,t) k(γ_s) |γ̇|² dΘ(γ) ds` over the atoms of the plan.
pub fn action_integral(plan: &GeodesicPlan, k: &CurvatureField, t: f64) -> Result<f64> {
    let weights = green_weights(plan.resolution(), t);
    plan.weighted_path_integral(k, &weights)
}

/// Writes the `(s, t, g, integrand)` trace of the action at time `t`, where
/// the integrand is `g(s,t) Σ θ k(γ(s)) |γ̇|²`.
pub fn write_action_trace(
    plan: &GeodesicPlan,
    k: &CurvatureField,
    t: f64,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "t", "g", "integrand"])?;
    let s_count = plan.resolution();
    for j in 0..=s_count {
        let s = j as f64 / s_count as f64;
        let g = green(s, t);
        let inner: f64 = plan
            .atoms()
            .iter()
            .map(|a| a.weight * a.speed * a.speed * k.values()[a.path[j]])
            .sum();
        w.write_record([s, t, g, g * inner].iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
