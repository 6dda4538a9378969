//! Fixtures shared by the benchmarks.

use ricci_lab::{DiscreteSpace, ProbMeasure};

/// Interval `[-L, L]` with `n` sites and the Gaussian weight `e^{-x²/2}`.
pub fn ou(n: usize, half_width: f64) -> DiscreteSpace {
    DiscreteSpace::interval(n, half_width, |x| 0.5 * x * x).expect("valid interval")
}

/// Normalised Gaussian bump in the first coordinate.
pub fn bump(space: &DiscreteSpace, center: f64, width: f64) -> ProbMeasure {
    let w: Vec<f64> = space
        .sites()
        .iter()
        .map(|p| (-(p.coords[0] - center).powi(2) / (2.0 * width * width)).exp())
        .collect();
    ProbMeasure::normalized(space, &w).expect("positive weights")
}
