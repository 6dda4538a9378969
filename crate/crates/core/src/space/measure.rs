use serde::{Deserialize, Serialize};

use super::DiscreteSpace;
use crate::error::{invalid, Result};

/// Densities below this are treated as exact zeros (`0 log 0 = 0`).
pub const DENSITY_FLOOR: f64 = 1e-300;

const MASS_TOL: f64 = 1e-12;

/// Probability measure `μ = ρ m` stored through its density relative to the
/// reference measure of the space it was built on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbMeasure {
    density: Vec<f64>,
}

impl ProbMeasure {
    /// Validates `Σ ρ m = 1` (within 1e-12) and `ρ ≥ 0`.
    pub fn from_density(space: &DiscreteSpace, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(invalid(format!(
                "density has {} entries for {} sites",
                density.len(),
                space.len()
            )));
        }
        if let Some(i) = density.iter().position(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(invalid(format!("density is negative or not finite at site {i}")));
        }
        let mass = space.integrate(&density);
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("measure has total mass {mass}")));
        }
        Ok(Self { density })
    }

    /// Builds the measure with point masses `masses[x] = μ({x})`.
    pub fn from_masses(space: &DiscreteSpace, masses: &[f64]) -> Result<Self> {
        if masses.len() != space.len() {
            return Err(invalid(format!(
                "mass vector has {} entries for {} sites",
                masses.len(),
                space.len()
            )));
        }
        let density = masses
            .iter()
            .zip(space.measure())
            .map(|(q, m)| q / m)
            .collect();
        Self::from_density(space, density)
    }

    /// Like [`Self::from_masses`] but rescales nonnegative weights to mass one.
    pub fn normalized(space: &DiscreteSpace, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(invalid("weights must be nonnegative with positive sum"));
        }
        let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::from_masses(space, &masses)
    }

    /// The reference measure itself (`ρ ≡ 1`).
    pub fn uniform(space: &DiscreteSpace) -> Self {
        Self {
            density: vec![1.0; space.len()],
        }
    }

    pub fn dirac(space: &DiscreteSpace, x: usize) -> Self {
        let mut density = vec![0.0; space.len()];
        density[x] = 1.0 / space.measure()[x];
        Self { density }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn masses(&self, space: &DiscreteSpace) -> Vec<f64> {
        self.density
            .iter()
            .zip(space.measure())
            .map(|(r, m)| r * m)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }
}

/// Pointwise curvature lower bound `k(x)` with its global floor `K ≤ min k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureField {
    values: Vec<f64>,
    lower_bound: f64,
}

impl CurvatureField {
    /// Field with `K = min_x k(x)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("curvature field must be nonempty and finite"));
        }
        let lower_bound = values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            values,
            lower_bound,
        })
    }

    pub fn with_lower_bound(values: Vec<f64>, lower_bound: f64) -> Result<Self> {
        let field = Self::new(values)?;
        if lower_bound > field.lower_bound {
            return Err(invalid(format!(
                "lower bound {lower_bound} exceeds min k = {}",
                field.lower_bound
            )));
        }
        Ok(Self {
            lower_bound,
            ..field
        })
    }

    pub fn constant(n: usize, k: f64) -> Self {
        Self {
            values: vec![k; n],
            lower_bound: k,
        }
    }

    /// `k + c` pointwise.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            lower_bound: self.lower_bound + c,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub(crate) fn check_len(&self, space: &DiscreteSpace) -> Result<()> {
        if self.values.len() != space.len() {
            return Err(invalid(format!(
                "curvature field has {} values for {} sites",
                self.values.len(),
                space.len()
            )));
        }
        Ok(())
    }
}
