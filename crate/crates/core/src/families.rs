//! Seeded families of test functions and probability measures.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::stream;
use crate::semigroup::SpectralCache;
use crate::space::{DiscreteSpace, ProbMeasure};

/// Generator of test functions `u` for Bochner-type checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionFamily {
    /// The `count` lowest nonconstant eigenfunctions of `-Δ`.
    LowEigenfunctions { count: usize },
    /// Gaussian noise smoothed by the heat semigroup, `T_τ ξ`.
    RandomSmooth {
        count: usize,
        #[serde(default = "default_mollify")]
        mollify_time: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Powers `x, x², …, x^degree` of the first coordinate.
    Polynomial { degree: usize },
}

fn default_mollify() -> f64 {
    0.01
}

impl FunctionFamily {
    pub fn generate(&self, space: &DiscreteSpace, cache: &SpectralCache) -> Result<Vec<Vec<f64>>> {
        let out: Vec<Vec<f64>> = match *self {
            FunctionFamily::LowEigenfunctions { count } => cache
                .eigenpairs()
                .into_iter()
                .skip(1)
                .take(count)
                .map(|(_, phi)| phi)
                .collect(),
            FunctionFamily::RandomSmooth {
                count,
                mollify_time,
                seed,
            } => (0..count)
                .map(|i| {
                    let mut rng = stream(seed, i as u64);
                    let noise: Vec<f64> = (0..space.len()).map(|_| rng.sample(StandardNormal)).collect();
                    cache.apply(&noise, mollify_time)
                })
                .collect::<Result<_>>()?,
            FunctionFamily::Polynomial { degree } => (1..=degree)
                .map(|d| {
                    space
                        .sites()
                        .iter()
                        .map(|s| s.coords[0].powi(d as i32))
                        .collect()
                })
                .collect(),
        };
        if out.is_empty() {
            return Err(invalid("test-function family is empty"));
        }
        Ok(out)
    }
}

/// Random mixtures of one to `max_bumps` Gaussian bumps `e^{-d(x,c)²/2σ²}`
/// in the space metric, centred at sites whose first coordinate lies in
/// `center_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpFamily {
    #[serde(default = "default_centers")]
    pub center_range: (f64, f64),
    #[serde(default = "default_widths")]
    pub width_range: (f64, f64),
    #[serde(default = "default_weights")]
    pub weight_range: (f64, f64),
    #[serde(default = "default_bumps")]
    pub max_bumps: usize,
}

fn default_centers() -> (f64, f64) {
    (-2.0, 2.0)
}
fn default_widths() -> (f64, f64) {
    (0.3, 1.0)
}
fn default_weights() -> (f64, f64) {
    (0.2, 1.0)
}
fn default_bumps() -> usize {
    3
}

impl Default for BumpFamily {
    fn default() -> Self {
        Self {
            center_range: default_centers(),
            width_range: default_widths(),
            weight_range: default_weights(),
            max_bumps: default_bumps(),
        }
    }
}

impl BumpFamily {
    /// Draws one measure (mass vector normalised to one).
    pub fn sample(&self, space: &DiscreteSpace, rng: &mut impl Rng) -> Result<ProbMeasure> {
        let centers: Vec<usize> = (0..space.len())
            .filter(|&i| {
                let c = space.sites()[i].coords[0];
                c >= self.center_range.0 && c <= self.center_range.1
            })
            .collect();
        if centers.is_empty() || self.max_bumps == 0 {
            return Err(invalid("bump family has no admissible centres"));
        }
        let bumps = rng.random_range(1..=self.max_bumps);
        let mut w = vec![0.0; space.len()];
        for _ in 0..bumps {
            let c = centers[rng.random_range(0..centers.len())];
            let sigma = rng.random_range(self.width_range.0..=self.width_range.1);
            let amp = rng.random_range(self.weight_range.0..=self.weight_range.1);
            for (x, wx) in w.iter_mut().enumerate() {
                let d = space.distance(x, c);
                *wx += amp * (-d * d / (2.0 * sigma * sigma)).exp();
            }
        }
        ProbMeasure::normalized(space, &w)
    }

    /// `count` measures from stream `(seed, i)`.
    pub fn sample_many(&self, space: &DiscreteSpace, count: usize, seed: u64) -> Result<Vec<ProbMeasure>> {
        (0..count)
            .map(|i| self.sample(space, &mut stream(seed, i as u64)))
            .collect()
    }
}

/// Mixes a measure with the reference measure, `(1-ε)μ + ε m`, giving a
/// strictly positive density.
pub fn mix_with_reference(space: &DiscreteSpace, mu: &ProbMeasure, eps: f64) -> Result<ProbMeasure> {
    let rho: Vec<f64> = mu.density().iter().map(|r| (1.0 - eps) * r + eps).collect();
    ProbMeasure::from_density(space, rho)
}
