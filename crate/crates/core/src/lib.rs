//! Finite metric measure spaces with variable Ricci curvature bounds.
//!
//! The crate builds finite weighted-graph surrogates of metric measure spaces
//! and evaluates the curvature machinery on them: Bochner inequalities and
//! gradient estimates, entropy convexity along Wasserstein geodesics, the
//! evolution-variation inequality, Schrödinger semigroups with a Feynman–Kac
//! estimator, and contracting couplings of random walks.
//!
//! Time convention: the heat semigroup is `T_t = e^{tΔ}` while the random
//! walk has generator `½Δ`, so semigroup time `t` is process time `2t`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod coupling;
pub mod error;
pub mod families;
pub mod rng;
pub mod semigroup;
pub mod space;
pub mod transport;

pub use checks::{Assessment, CheckReport, Verdict};
pub use coupling::{CoupledKernel, CoupledTrajectory};
pub use error::{LabError, Result};
pub use semigroup::{PathSample, SpectralCache};
pub use space::{CurvatureField, DiscreteSpace, Potential, ProbMeasure, SpaceKind, SpaceSpec};
pub use transport::{ConstrainedCoupling, CouplingPlan, GeodesicPlan};
