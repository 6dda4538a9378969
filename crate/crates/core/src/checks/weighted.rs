//! Weighted spaces: change of measure by a λ-convex potential, the
//! λ-convexity check itself, and curvature of products.

use serde_json::json;

use super::CheckReport;
use crate::error::{invalid, LabError, Result};
use crate::space::{CurvatureField, DiscreteSpace};
use crate::transport::green_function;

/// Tilts the reference measure by `e^{-V}` (edge weights rebuilt with the
/// same midpoint rule) and returns the tilted space with the field `k + λ`.
/// `potential` is evaluated on site coordinates and edge midpoints.
pub fn change_of_measure(
    space: &DiscreteSpace,
    k: &CurvatureField,
    potential: &dyn Fn(&[f64]) -> f64,
    lambda: &CurvatureField,
) -> Result<(DiscreteSpace, CurvatureField)> {
    k.check_len(space)?;
    lambda.check_len(space)?;
    let tilted = space.tilted(potential);
    tilted.validate()?;
    let field: Vec<f64> = k.values().iter().zip(lambda.values()).map(|(a, b)| a + b).collect();
    let field = CurvatureField::with_lower_bound(field, k.lower_bound() + lambda.lower_bound())?;
    Ok((tilted, field))
}

/// Margins of
/// `V(γ_t) ≤ (1-t)V(γ0) + tV(γ1) - ∫g(s,t)λ(γ_s)|γ̇|² ds`
/// along the straight site-to-site paths of an interval, divided by `|γ̇|²`.
/// `t` runs over the interior site crossings of each path and `λ` is linear
/// between sites, so the integral is exact. The default tolerance covers
/// linear interpolation of a convex `λ`, `max |Δ²λ| / 64`.
pub fn lambda_convexity_check(
    space: &DiscreteSpace,
    potential: &[f64],
    lambda: &CurvatureField,
    paths: &[(usize, usize)],
    tolerance: Option<f64>,
) -> Result<CheckReport> {
    if !space.is_interval() {
        return Err(LabError::UnsupportedGeometry(
            "λ-convexity is checked along interval geodesics".into(),
        ));
    }
    lambda.check_len(space)?;
    if potential.len() != space.len() {
        return Err(invalid("potential must have one value per site"));
    }
    let n = space.len();
    let lv = lambda.values();
    let mut residuals = Vec::new();
    let mut labels = Vec::new();
    for (pi, &(a, b)) in paths.iter().enumerate() {
        if a >= n || b >= n {
            return Err(invalid(format!("path ({a}, {b}) leaves the space")));
        }
        let steps = a.abs_diff(b);
        if steps == 0 {
            residuals.push(0.0);
            labels.push((pi, 0.0));
            continue;
        }
        let site = |m: usize| if b > a { a + m } else { a - m };
        let len = space.distance(a, b);
        for m in 1..steps {
            let t = m as f64 / steps as f64;
            // ∫ g(s,t) λ(γ_s) ds, Simpson on each cell (integrand quadratic there)
            let mut integral = 0.0;
            for c in 0..steps {
                let (s0, s1) = (c as f64 / steps as f64, (c + 1) as f64 / steps as f64);
                let (l0, l1) = (lv[site(c)], lv[site(c + 1)]);
                let sm = 0.5 * (s0 + s1);
                let f = |s: f64, l: f64| green_function(s, t).unwrap_or(0.0) * l;
                integral += (s1 - s0) / 6.0 * (f(s0, l0) + 4.0 * f(sm, 0.5 * (l0 + l1)) + f(s1, l1));
            }
            let v = (1.0 - t) * potential[a] + t * potential[b] - integral * len * len - potential[site(m)];
            residuals.push(v / (len * len));
            labels.push((pi, t));
        }
    }
    let tol = tolerance.unwrap_or_else(|| {
        let curv = (1..n.saturating_sub(1))
            .map(|i| (lv[i - 1] - 2.0 * lv[i] + lv[i + 1]).abs())
            .fold(0.0, f64::max);
        curv / 64.0 + 1e-12
    });
    let report = CheckReport::from_residuals("lambda-convexity", residuals, tol, paths.len(), |i| {
        let (pi, t) = labels[i];
        json!({"path": [paths[pi].0, paths[pi].1], "t": t})
    });
    Ok(report.with_parameter("paths", paths.len()))
}

/// Curvature field `k(x₁,…,x_n) = min{0, k₁(x₁), …, k_n(x_n)}` on a product.
pub fn tensor_curvature(k_list: &[CurvatureField], product: &DiscreteSpace) -> Result<CurvatureField> {
    let factors = product
        .factors()
        .ok_or_else(|| invalid("tensor curvature needs a product space"))?;
    if factors.len() != k_list.len() {
        return Err(invalid(format!(
            "{} curvature fields for {} factors",
            k_list.len(),
            factors.len()
        )));
    }
    for (k, f) in k_list.iter().zip(factors) {
        k.check_len(f)?;
    }
    let values = (0..product.len())
        .map(|x| {
            product
                .factor_indices(x)
                .iter()
                .zip(k_list)
                .map(|(&i, k)| k.values()[i])
                .fold(0.0, f64::min)
        })
        .collect();
    CurvatureField::new(values)
}
