//! Bochner inequality `BE(k,∞)` and the variable-curvature gradient estimate.

use serde_json::json;

use super::CheckReport;
use crate::error::{invalid, Result};
use crate::families::FunctionFamily;
use crate::semigroup::SpectralCache;
use crate::space::{CurvatureField, DiscreteSpace};

/// Default relative budget of the Bochner scan, in units of `h²`.
const BE_BUDGET: f64 = 10.0;
/// Default relative budget of the gradient estimate.
const GRADIENT_BUDGET: f64 = 5e-3;

struct BochnerTerms {
    gamma: Vec<f64>,
    gamma_lap: Vec<f64>,
}

fn terms(space: &DiscreteSpace, u: &[f64]) -> BochnerTerms {
    let lap = space.apply_laplacian(u);
    BochnerTerms {
        gamma: space.gamma_sq(u),
        gamma_lap: space.gamma(u, &lap),
    }
}

fn margin(space: &DiscreteSpace, k: &[f64], t: &BochnerTerms, phi: &[f64]) -> f64 {
    let lap_phi = space.apply_laplacian(phi);
    let m = space.measure();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for x in 0..space.len() {
        lhs += m[x] * (0.5 * lap_phi[x] - k[x] * phi[x]) * t.gamma[x];
        rhs += m[x] * phi[x] * t.gamma_lap[x];
    }
    lhs - rhs
}

fn check_inputs(space: &DiscreteSpace, k: &CurvatureField, u: &[f64]) -> Result<()> {
    k.check_len(space)?;
    if u.len() != space.len() {
        return Err(invalid("function length does not match the space"));
    }
    Ok(())
}

/// `∫(½Δ - k)φ Γ(u) dm - ∫ φ Γ(u, Δu) dm` for a test function `φ ≥ 0`.
pub fn be_check(space: &DiscreteSpace, k: &CurvatureField, u: &[f64], phi: &[f64]) -> Result<f64> {
    check_inputs(space, k, u)?;
    if phi.len() != space.len() {
        return Err(invalid("test function length does not match the space"));
    }
    if let Some(x) = phi.iter().position(|v| !(*v >= 0.0)) {
        return Err(invalid(format!("test function φ is negative at site {x}")));
    }
    Ok(margin(space, k.values(), &terms(space, u), phi))
}

/// Pointwise Bochner defect `Γ₂(u) - kΓ(u)`, i.e. the margin for the
/// normalised point masses `φ = δ_x / m(x)`.
pub fn be_point_margins(space: &DiscreteSpace, k: &CurvatureField, u: &[f64]) -> Result<Vec<f64>> {
    check_inputs(space, k, u)?;
    let t = terms(space, u);
    let half_lap_gamma = space.apply_laplacian(&t.gamma);
    Ok((0..space.len())
        .map(|x| 0.5 * half_lap_gamma[x] - t.gamma_lap[x] - k.values()[x] * t.gamma[x])
        .collect())
}

fn point_phi(space: &DiscreteSpace, x: usize) -> Vec<f64> {
    let mut phi = vec![0.0; space.len()];
    phi[x] = 1.0 / space.measure()[x];
    phi
}

/// Scale of `u` for relative Bochner margins: `max_x (1 + |k(x)|) Γ(u)(x)`.
fn be_scale(k: &[f64], gamma: &[f64]) -> f64 {
    gamma
        .iter()
        .zip(k)
        .map(|(g, kx)| (1.0 + kx.abs()) * g)
        .fold(0.0, f64::max)
}

/// Bochner scan over explicit test functions. For each `u`, `φ` runs over the
/// normalised point masses and the constant 1; residuals are margins divided
/// by `max (1+|k|)Γ(u)`. Default budget `10 h²`.
pub fn be_scan_functions(
    space: &DiscreteSpace,
    k: &CurvatureField,
    functions: &[Vec<f64>],
    tolerance: Option<f64>,
) -> Result<CheckReport> {
    if functions.is_empty() {
        return Err(invalid("be_scan needs a nonempty family"));
    }
    let n = space.len();
    let mut residuals = Vec::with_capacity(functions.len() * (n + 1));
    let mut labels = Vec::with_capacity(residuals.capacity());
    let mut scales = Vec::with_capacity(functions.len());
    for (ui, u) in functions.iter().enumerate() {
        check_inputs(space, k, u)?;
        let t = terms(space, u);
        let scale = be_scale(k.values(), &t.gamma);
        scales.push(scale);
        let norm = if scale > 0.0 { scale } else { 1.0 };
        for x in 0..=n {
            let phi = if x < n { point_phi(space, x) } else { vec![1.0; n] };
            residuals.push(margin(space, k.values(), &t, &phi) / norm);
            labels.push((ui, x));
        }
    }
    let h = space.mesh();
    let tol = tolerance.unwrap_or(BE_BUDGET * h * h);
    let report = CheckReport::from_residuals("be", residuals, tol, functions.len(), |i| {
        let (ui, x) = labels[i];
        let phi = if x < n {
            json!({"kind": "point", "site": x})
        } else {
            json!({"kind": "constant"})
        };
        json!({"u_index": ui, "phi": phi, "scale": scales[ui], "u": functions[ui]})
    });
    Ok(report
        .with_parameter("mesh", h)
        .with_parameter("k_min", k.lower_bound())
        .with_diagnostic("max_scale", scales.iter().cloned().fold(0.0, f64::max)))
}

/// Bochner scan over a named family of test functions.
pub fn be_scan(
    space: &DiscreteSpace,
    k: &CurvatureField,
    family: &FunctionFamily,
    tolerance: Option<f64>,
) -> Result<CheckReport> {
    let cache = SpectralCache::heat(space)?;
    let functions = family.generate(space, &cache)?;
    Ok(be_scan_functions(space, k, &functions, tolerance)?.with_parameter("family", family))
}

/// `T^{2k}_t Γ(u) - Γ(T_t u)` at every site and time, relative to `‖Γ(u)‖_∞`,
/// for each function of the family. Default budget `5e-3`.
pub fn gradient_estimate_check(
    space: &DiscreteSpace,
    k: &CurvatureField,
    functions: &[Vec<f64>],
    times: &[f64],
    tolerance: Option<f64>,
) -> Result<CheckReport> {
    k.check_len(space)?;
    if functions.is_empty() || times.is_empty() {
        return Err(invalid("gradient estimate needs functions and times"));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(invalid(format!("gradient estimate times must be positive, got {t}")));
    }
    let heat = SpectralCache::heat(space)?;
    let schr = SpectralCache::schrodinger(space, k)?;
    let mut residuals = Vec::new();
    let mut labels = Vec::new();
    for (ui, u) in functions.iter().enumerate() {
        if u.len() != space.len() {
            return Err(invalid("function length does not match the space"));
        }
        let gamma = space.gamma_sq(u);
        let norm = gamma.iter().cloned().fold(0.0, f64::max);
        let norm = if norm > 0.0 { norm } else { 1.0 };
        for &t in times {
            let lhs = space.gamma_sq(&heat.apply(u, t)?);
            let rhs = schr.apply(&gamma, t)?;
            for x in 0..space.len() {
                residuals.push((rhs[x] - lhs[x]) / norm);
                labels.push((ui, t, x));
            }
        }
    }
    let tol = tolerance.unwrap_or(GRADIENT_BUDGET);
    let report = CheckReport::from_residuals("grad", residuals, tol, functions.len(), |i| {
        let (ui, t, x) = labels[i];
        json!({"u_index": ui, "t": t, "site": x})
    });
    Ok(report.with_parameter("times", times).with_parameter("k_min", k.lower_bound()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ou(n: usize) -> DiscreteSpace {
        DiscreteSpace::interval(n, 5.0, |x| 0.5 * x * x).unwrap()
    }

    #[test]
    fn constant_u_gives_zero_margin() {
        let s = ou(21);
        let k = CurvatureField::constant(21, 1.0);
        let m = be_check(&s, &k, &[3.0; 21], &[1.0; 21]).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn negative_phi_is_rejected() {
        let s = ou(5);
        let k = CurvatureField::constant(5, 1.0);
        assert!(be_check(&s, &k, &[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn flat_circle_harmonic() {
        let s = DiscreteSpace::circle(32, 1.0, |_| 0.0).unwrap();
        let k = CurvatureField::constant(32, 0.0);
        let u: Vec<f64> = (0..32).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 32.0).cos()).collect();
        assert!(be_check(&s, &k, &u, &[1.0; 32]).unwrap() >= -1e-12);
    }

    #[test]
    fn point_margins_match_the_integral_form() {
        let s = ou(15);
        let k = CurvatureField::new((0..15).map(|i| 0.1 * i as f64).collect()).unwrap();
        let u: Vec<f64> = (0..15).map(|i| (0.3 * i as f64).sin()).collect();
        let pm = be_point_margins(&s, &k, &u).unwrap();
        for x in 0..15 {
            let direct = be_check(&s, &k, &u, &point_phi(&s, x)).unwrap();
            assert_abs_diff_eq!(pm[x], direct, epsilon = 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn lowering_k_adds_the_gamma_integral() {
        let s = ou(15);
        let k = CurvatureField::constant(15, 1.0);
        let u: Vec<f64> = (0..15).map(|i| (0.2 * i as f64).powi(2)).collect();
        let phi: Vec<f64> = (0..15).map(|i| 1.0 + (i % 3) as f64).collect();
        let a = be_check(&s, &k, &u, &phi).unwrap();
        let b = be_check(&s, &k.shifted(-1.0), &u, &phi).unwrap();
        let g = s.gamma_sq(&u);
        let expect: f64 = (0..15).map(|x| s.measure()[x] * phi[x] * g[x]).sum();
        assert_abs_diff_eq!(b - a, expect, epsilon = 1e-10 * expect.abs().max(1.0));
        // bilinearity in u
        let u3: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        let c = be_check(&s, &k, &u3, &phi).unwrap();
        assert_abs_diff_eq!(c, 9.0 * a, epsilon = 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn witness_reproduces_min_margin() {
        let s = ou(41);
        let k = CurvatureField::constant(41, 1.2);
        let fam = FunctionFamily::LowEigenfunctions { count: 3 };
        let r = be_scan(&s, &k, &fam, Some(1e-3)).unwrap();
        let w = &r.witnesses[0].input;
        let u: Vec<f64> = serde_json::from_value(w["u"].clone()).unwrap();
        let scale = w["scale"].as_f64().unwrap();
        let phi = match w["phi"]["kind"].as_str().unwrap() {
            "point" => point_phi(&s, w["phi"]["site"].as_u64().unwrap() as usize),
            _ => vec![1.0; 41],
        };
        let again = be_check(&s, &k, &u, &phi).unwrap() / scale;
        assert!((again - r.min_margin).abs() <= 1e-12 * r.min_margin.abs().max(1.0));
        assert!(!r.passed(), "{} {}", r.min_margin, r.tolerance);
    }

    #[test]
    fn empty_family_is_an_error() {
        let s = ou(11);
        let k = CurvatureField::constant(11, 0.0);
        assert!(be_scan_functions(&s, &k, &[], None).is_err());
    }

    #[test]
    fn gradient_estimate_small_time_and_constant_k() {
        let s = ou(41);
        let k = CurvatureField::constant(41, 1.0);
        let u: Vec<f64> = (0..41).map(|i| (0.4 * i as f64).sin()).collect();
        let r = gradient_estimate_check(&s, &k, std::slice::from_ref(&u), &[1e-6], None).unwrap();
        assert!(r.min_margin.abs() < 1e-5, "{}", r.min_margin);
        let r = gradient_estimate_check(&s, &k, &[u], &[0.1, 0.5], None).unwrap();
        assert!(r.passed(), "{}", r.min_margin);
        assert!(gradient_estimate_check(&s, &k, &[vec![0.0; 41]], &[0.0], None).is_err());
    }
}
