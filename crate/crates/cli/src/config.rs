//! Experiment configuration: one JSON file per run.

use std::path::PathBuf;

use ricci_lab::checks::Exponent;
use ricci_lab::coupling::DEFAULT_PAIR_CAP;
use ricci_lab::families::{BumpFamily, FunctionFamily};
use ricci_lab::{CurvatureField, DiscreteSpace, Potential, ProbMeasure, SpaceSpec, SpectralCache};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Top-level config. `params` is decoded separately against the schema of
/// the named experiment so that unknown keys are rejected there too.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub space: SpaceSpec,
    #[serde(default)]
    pub k: Option<KSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                CliError::Parse {
                    message: e.to_string(),
                    line: e.line(),
                    column: e.column(),
                }
            } else {
                CliError::Config(e.to_string())
            }
        })
    }

    /// Decodes `params` into the experiment's schema, filling defaults.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P, CliError> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::Config(format!("params for {:?}: {e}", self.experiment)))
    }

    pub fn curvature(&self, space: &DiscreteSpace) -> Result<CurvatureField, CliError> {
        self.k.clone().unwrap_or_default().resolve(&self.space, space)
    }

    pub fn reject_k(&self) -> Result<(), CliError> {
        match self.k {
            Some(_) => Err(CliError::Config(format!(
                "{:?} does not read the top-level \"k\"",
                self.experiment
            ))),
            None => Ok(()),
        }
    }
}

/// A curvature field: `{"constant": c}`, `{"values": [...]}` or
/// `{"potential_hessian": {"shift": c}}` for `V'' + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KSpec {
    Constant(f64),
    Values(Vec<f64>),
    PotentialHessian {
        #[serde(default)]
        shift: f64,
    },
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Constant(0.0)
    }
}

impl KSpec {
    pub fn resolve(&self, spec: &SpaceSpec, space: &DiscreteSpace) -> Result<CurvatureField, CliError> {
        let values = match self {
            KSpec::Constant(c) => vec![*c; space.len()],
            KSpec::Values(v) => v.clone(),
            KSpec::PotentialHessian { shift } => spec
                .potential_curvature(space)
                .ok_or_else(|| CliError::Config("potential_hessian needs a 1-d space with an analytic potential".into()))?
                .into_iter()
                .map(|v| v + shift)
                .collect(),
        };
        if values.len() != space.len() {
            return Err(CliError::Config(format!(
                "curvature has {} values for {} sites",
                values.len(),
                space.len()
            )));
        }
        Ok(CurvatureField::new(values)?)
    }
}

/// A probability measure: `{"gaussian": {"center": c, "width": w}}` in the
/// first coordinate, `{"masses": [...]}`, `"uniform"` or `{"dirac": site}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Gaussian { center: f64, width: f64 },
    Masses(Vec<f64>),
    Uniform,
    Dirac(usize),
}

impl MeasureSpec {
    pub fn build(&self, space: &DiscreteSpace) -> Result<ProbMeasure, CliError> {
        Ok(match self {
            MeasureSpec::Gaussian { center, width } => {
                if !(*width > 0.0) {
                    return Err(CliError::Config(format!("gaussian width must be positive, got {width}")));
                }
                let w: Vec<f64> = space
                    .sites()
                    .iter()
                    .map(|s| (-(s.coords[0] - center).powi(2) / (2.0 * width * width)).exp())
                    .collect();
                ProbMeasure::normalized(space, &w)?
            }
            MeasureSpec::Masses(m) => ProbMeasure::from_masses(space, m)?,
            MeasureSpec::Uniform => ProbMeasure::uniform(space),
            MeasureSpec::Dirac(x) => {
                if *x >= space.len() {
                    return Err(CliError::Config(format!("dirac site {x} out of range")));
                }
                ProbMeasure::dirac(space, *x)
            }
        })
    }
}

/// A single function on the sites: `{"eigenfunction": j}` (j ≥ 1),
/// `{"values": [...]}` or `{"coordinate_power": d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Eigenfunction(usize),
    Values(Vec<f64>),
    CoordinatePower(i32),
}

impl FunctionSpec {
    pub fn build(&self, space: &DiscreteSpace, cache: &SpectralCache) -> Result<Vec<f64>, CliError> {
        let u = match self {
            FunctionSpec::Eigenfunction(j) => cache
                .eigenpairs()
                .into_iter()
                .nth(*j)
                .map(|(_, phi)| phi)
                .ok_or_else(|| CliError::Config(format!("eigenfunction {j} out of range")))?,
            FunctionSpec::Values(v) => v.clone(),
            FunctionSpec::CoordinatePower(d) => space.sites().iter().map(|s| s.coords[0].powi(*d)).collect(),
        };
        if u.len() != space.len() {
            return Err(CliError::Config(format!("function has {} values for {} sites", u.len(), space.len())));
        }
        Ok(u)
    }
}

/// Random families draw from the run seed plus their own `seed` offset.
pub fn reseed(family: &FunctionFamily, run_seed: u64) -> FunctionFamily {
    match family.clone() {
        FunctionFamily::RandomSmooth {
            count,
            mollify_time,
            seed,
        } => FunctionFamily::RandomSmooth {
            count,
            mollify_time,
            seed: run_seed.wrapping_add(seed),
        },
        other => other,
    }
}

fn default_family() -> FunctionFamily {
    FunctionFamily::RandomSmooth {
        count: 16,
        mollify_time: 0.01,
        seed: 0,
    }
}

fn unit_grid() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeParams {
    pub family: FunctionFamily,
    pub tolerance: Option<f64>,
}

impl Default for BeParams {
    fn default() -> Self {
        Self {
            family: default_family(),
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradParams {
    pub family: FunctionFamily,
    pub times: Vec<f64>,
    pub tolerance: Option<f64>,
}

impl Default for GradParams {
    fn default() -> Self {
        Self {
            family: default_family(),
            times: vec![0.01, 0.1, 0.5],
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CdParams {
    pub mu0: MeasureSpec,
    pub mu1: MeasureSpec,
    pub times: Vec<f64>,
    pub resolution: usize,
    pub geo_coeff: Option<f64>,
}

impl Default for CdParams {
    fn default() -> Self {
        Self {
            mu0: MeasureSpec::Gaussian { center: -1.0, width: 0.6 },
            mu1: MeasureSpec::Gaussian { center: 1.0, width: 0.6 },
            times: unit_grid(),
            resolution: 200,
            geo_coeff: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EviParams {
    pub mu0: MeasureSpec,
    pub nu: MeasureSpec,
    pub times: Vec<f64>,
    pub resolution: usize,
    pub eta: f64,
    pub geo_coeff: Option<f64>,
}

impl Default for EviParams {
    fn default() -> Self {
        Self {
            mu0: MeasureSpec::Gaussian { center: -1.0, width: 0.6 },
            nu: MeasureSpec::Gaussian { center: 0.5, width: 1.0 },
            times: vec![0.05, 0.1, 0.3, 1.0],
            resolution: 200,
            eta: 1e-3,
            geo_coeff: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WpParams {
    /// Contraction rate; defaults to the lower bound of `k`.
    pub rate: Option<f64>,
    pub pairs: usize,
    pub bumps: BumpFamily,
    pub times: Vec<f64>,
    pub exponents: Vec<Exponent>,
    pub tolerance: Option<f64>,
}

impl Default for WpParams {
    fn default() -> Self {
        Self {
            rate: None,
            pairs: 4,
            bumps: BumpFamily::default(),
            times: vec![0.1, 0.5, 1.0],
            exponents: vec![Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::INF],
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuhamelParams {
    pub times: Vec<f64>,
    pub nodes: usize,
    pub tolerance: f64,
}

impl Default for DuhamelParams {
    fn default() -> Self {
        Self {
            times: vec![0.1, 0.5, 1.0],
            nodes: 64,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeynmanKacParams {
    pub function: FunctionSpec,
    pub t: f64,
    pub n_paths: usize,
    /// Allowed deviation in standard errors.
    pub z: f64,
}

impl Default for FeynmanKacParams {
    fn default() -> Self {
        Self {
            function: FunctionSpec::Eigenfunction(1),
            t: 0.2,
            n_paths: 2000,
            z: 4.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleParams {
    /// Kernel rate; defaults to the lower bound of `k`.
    pub rate: Option<f64>,
    pub step: f64,
    pub epsilon: f64,
    /// Process time, a multiple of `2·step`.
    pub horizon: f64,
    pub n_paths: usize,
    /// Initial pair; defaults to the two ends of the site list.
    pub start: Option<(usize, usize)>,
    /// Largest `|X|²` for which the composed kernel is formed.
    pub pair_cap: usize,
    pub marginal_tolerance: f64,
}

impl Default for CoupleParams {
    fn default() -> Self {
        Self {
            rate: None,
            step: 2f64.powi(-6),
            epsilon: 1e-3,
            horizon: 0.5,
            n_paths: 256,
            start: None,
            pair_cap: DEFAULT_PAIR_CAP,
            marginal_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensorParams {
    /// One curvature per factor; missing entries are `k ≡ 0`.
    pub k_factors: Vec<KSpec>,
    pub family: FunctionFamily,
    pub tolerance: Option<f64>,
}

impl Default for TensorParams {
    fn default() -> Self {
        Self {
            k_factors: Vec::new(),
            family: default_family(),
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChangeOfMeasureParams {
    /// Tilt `V` as a function of the first coordinate.
    pub potential: Potential,
    pub lambda: KSpec,
    pub family: FunctionFamily,
    pub tolerance: Option<f64>,
    /// Site pairs for the λ-convexity check (intervals only); defaults to
    /// the full interval and its middle half.
    pub paths: Vec<(usize, usize)>,
    pub convexity_tolerance: Option<f64>,
}

impl Default for ChangeOfMeasureParams {
    fn default() -> Self {
        Self {
            potential: Potential::Quadratic { a: 1.0, center: 0.0 },
            lambda: KSpec::Constant(1.0),
            family: default_family(),
            tolerance: None,
            paths: Vec::new(),
            convexity_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathwiseParams {
    pub mu0: MeasureSpec,
    pub mu1: MeasureSpec,
    pub times: Vec<f64>,
    pub resolution: usize,
    pub tolerance: f64,
}

impl Default for PathwiseParams {
    fn default() -> Self {
        Self {
            mu0: MeasureSpec::Gaussian { center: -1.0, width: 0.6 },
            mu1: MeasureSpec::Gaussian { center: 1.0, width: 0.6 },
            times: unit_grid(),
            resolution: 200,
            tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    /// Site counts replacing the space's `n`.
    pub levels: Vec<usize>,
    pub family: FunctionFamily,
    pub tolerance: Option<f64>,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            levels: vec![51, 101, 201],
            family: FunctionFamily::LowEigenfunctions { count: 5 },
            tolerance: None,
        }
    }
}
