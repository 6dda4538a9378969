//! Coupled random walks whose distance contracts at rate `K`.
//!
//! [`CoupledKernel`] holds, for every ordered pair of sites `(x, y)`, a
//! coupling of the heat-kernel rows `p_δ(x,·)` and `p_δ(y,·)` supported on
//! `{d(x', y') ≤ λ(x,y) d(x,y)}` with the smallest admissible `λ` on the grid
//! `e^{-Kδ}(1 + jε)`. One kernel step is semigroup time `δ`, which is
//! process time `2δ` for the walk generated by `½Δ`.

mod sample;

pub use sample::{
    finite_dim_distribution, pathwise_contraction_stats, sample_coupled_paths, write_trajectories,
    CoupledTrajectory, FiniteDimDistribution,
};

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{invalid, LabError, Result};
use crate::semigroup::{markov_kernel, SpectralCache};
use crate::space::DiscreteSpace;
use crate::transport::{constrained_coupling_masses, wasserstein_inf_masses, ConstrainedCoupling, CouplingPlan};

/// Relative slack on support thresholds, absorbing rounding in `λ d(x, y)`.
pub(crate) const SUPPORT_SLACK: f64 = 1e-12;

/// Kernel entries below this are treated as round-off and zeroed.
pub const KERNEL_FLOOR: f64 = 1e-15;

/// Default cap on the number of pair states for exact composition.
pub const DEFAULT_PAIR_CAP: usize = 2500;

/// One-step coupling table `q*((x, y), ·)` over all ordered site pairs.
#[derive(Clone, Debug)]
pub struct CoupledKernel {
    step: f64,
    rate: f64,
    epsilon: f64,
    distances: DMatrix<f64>,
    kernel: DMatrix<f64>,
    plans: Vec<CouplingPlan>,
    slack: Vec<f64>,
    /// Cumulative atom masses per pair, for sampling.
    tables: Vec<Vec<(f64, usize)>>,
}

impl CoupledKernel {
    /// Builds `q*` with semigroup step `δ`, rate `K` and grid spacing `ε`.
    pub fn build(space: &DiscreteSpace, rate: f64, step: f64, epsilon: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid("coupling step must be positive"));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("slack grid spacing must be positive"));
        }
        if !rate.is_finite() {
            return Err(invalid("contraction rate must be finite"));
        }
        let n = space.len();
        let cache = SpectralCache::heat(space)?;
        let mut kernel = markov_kernel(&cache, step)?;
        // spectral round-off leaves ~1e-16 noise in the far tails, which would
        // otherwise decide the W∞ threshold
        for mut row in kernel.row_iter_mut() {
            row.apply(|v| {
                if *v < KERNEL_FLOOR {
                    *v = 0.0
                }
            });
            let total = row.sum();
            row /= total;
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|x| kernel.row(x).iter().copied().collect()).collect();
        let base = (-rate * step).exp();
        let diam = space.diameter();

        let upper: Vec<(usize, usize)> = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect();
        let built: Vec<(CouplingPlan, f64)> = upper
            .par_iter()
            .map(|&(x, y)| pair_coupling(space, &rows[x], &rows[y], x, y, base, epsilon, diam))
            .collect::<Result<_>>()?;

        let mut plans = vec![CouplingPlan::new(n, n, Vec::new()); n * n];
        let mut slack = vec![base; n * n];
        for x in 0..n {
            plans[x * n + x] = CouplingPlan::diagonal(&rows[x]);
        }
        for (&(x, y), (plan, lambda)) in upper.iter().zip(built) {
            let transposed = CouplingPlan::new(n, n, plan.atoms().iter().map(|&(i, j, q)| (j, i, q)).collect());
            plans[x * n + y] = plan;
            plans[y * n + x] = transposed;
            slack[x * n + y] = lambda;
            slack[y * n + x] = lambda;
        }
        let tables = plans
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                p.atoms()
                    .iter()
                    .map(|&(i, j, q)| {
                        acc += q;
                        (acc, i * n + j)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            step,
            rate,
            epsilon,
            distances: space.metric().clone(),
            kernel,
            plans,
            slack,
            tables,
        })
    }

    pub fn len(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Semigroup time of one step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Heat-kernel rows `p_δ(x, ·)`.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distances[(x, y)]
    }

    pub fn plan(&self, x: usize, y: usize) -> &CouplingPlan {
        &self.plans[x * self.len() + y]
    }

    /// Threshold multiplier `λ(x, y)`.
    pub fn slack(&self, x: usize, y: usize) -> f64 {
        self.slack[x * self.len() + y]
    }

    /// `max λ(x, y) e^{Kδ}` over pairs of distinct sites (1 when `n = 1`).
    pub fn max_slack_ratio(&self) -> f64 {
        let n = self.len();
        let scale = (self.rate * self.step).exp();
        (0..n)
            .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
            .map(|(x, y)| self.slack(x, y) * scale)
            .fold(1.0, f64::max)
    }

    pub(crate) fn table(&self, pair: usize) -> &[(f64, usize)] {
        &self.tables[pair]
    }

    /// Does the transition `(x, y) → (x', y')` respect the support bound?
    pub fn admissible(&self, x: usize, y: usize, xn: usize, yn: usize) -> bool {
        self.distance(xn, yn) <= self.slack(x, y) * self.distance(x, y) * (1.0 + SUPPORT_SLACK)
    }

    /// Largest marginal error of any stored plan against the kernel rows.
    pub fn marginal_error(&self) -> f64 {
        let n = self.len();
        let row = |x: usize| -> Vec<f64> { self.kernel.row(x).iter().copied().collect() };
        (0..n * n)
            .map(|p| self.plans[p].marginal_error(&row(p / n), &row(p % n)))
            .fold(0.0, f64::max)
    }

    /// Exact composition `q^{(steps)}` as a dense matrix over pair states
    /// `x·n + y`. Refuses when `n²` exceeds `pair_cap`.
    pub fn compose(&self, steps: usize, pair_cap: usize) -> Result<ComposedKernel> {
        if steps == 0 {
            return Err(invalid("composition needs at least one step"));
        }
        let n = self.len();
        if n * n > pair_cap {
            return Err(LabError::CapExceeded {
                what: "pair states for exact composition (sample paths instead)",
                needed: n * n,
                cap: pair_cap,
            });
        }
        let one = self.pair_matrix();
        let mut result: Option<DMatrix<f64>> = None;
        let mut power = one;
        let mut e = steps;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => power.clone(),
                    Some(r) => &r * &power,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            power = &power * &power;
        }
        Ok(ComposedKernel {
            sites: n,
            steps,
            step: self.step,
            matrix: result.expect("steps ≥ 1"),
        })
    }

    fn pair_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n * n, n * n);
        for p in 0..n * n {
            for &(i, j, q) in self.plans[p].atoms() {
                m[(p, i * n + j)] = q;
            }
        }
        m
    }

    /// Pairs reachable from `(x, y)` in `steps` steps, each with the smallest
    /// product of slacks `Π λ` over the paths reaching it.
    pub fn reachable_budgets(&self, x: usize, y: usize, steps: usize) -> BTreeMap<usize, f64> {
        let n = self.len();
        let mut current = BTreeMap::from([(x * n + y, 1.0)]);
        for _ in 0..steps {
            let mut next: BTreeMap<usize, f64> = BTreeMap::new();
            for (&p, &b) in &current {
                let lam = self.slack[p];
                for &(i, j, _) in self.plans[p].atoms() {
                    let e = next.entry(i * n + j).or_insert(f64::INFINITY);
                    *e = e.min(b * lam);
                }
            }
            current = next;
        }
        current
    }

    /// Checks `d(x', y') ≤ (Π λ) d(x, y)` on every pair reachable from
    /// `(x, y)` in `steps` steps; returns the number of violations.
    pub fn support_violations(&self, x: usize, y: usize, steps: usize) -> usize {
        let n = self.len();
        let d0 = self.distance(x, y);
        self.reachable_budgets(x, y, steps)
            .iter()
            .filter(|(&p, &b)| {
                self.distance(p / n, p % n) > b * d0 * (1.0 + steps as f64 * SUPPORT_SLACK)
            })
            .count()
    }

    /// Kernel table with explicit indices.
    pub fn to_json(&self) -> Value {
        let n = self.len();
        let pairs: Vec<Value> = (0..n * n)
            .map(|p| {
                json!({
                    "x": p / n,
                    "y": p % n,
                    "lambda": self.slack[p],
                    "atoms": self.plans[p].atoms(),
                })
            })
            .collect();
        json!({
            "step": self.step,
            "rate": self.rate,
            "epsilon": self.epsilon,
            "sites": n,
            "max_slack_ratio": self.max_slack_ratio(),
            "pairs": pairs,
        })
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer(out, &self.to_json())?;
        Ok(())
    }
}

/// Minimal-grid coupling of two kernel rows.
#[allow(clippy::too_many_arguments)]
fn pair_coupling(
    space: &DiscreteSpace,
    a: &[f64],
    b: &[f64],
    x: usize,
    y: usize,
    base: f64,
    epsilon: f64,
    diam: f64,
) -> Result<(CouplingPlan, f64)> {
    let d = space.distance(x, y);
    // one grid step above the diameter ratio is still "below" it on the grid
    let ratio_cap = diam / d * (1.0 + epsilon) * (1.0 + SUPPORT_SLACK);
    let (w, _) = wasserstein_inf_masses(space, a, b)?;
    // smallest j with base (1 + jε) d ≥ w
    let need = w / (base * d);
    let mut j = if need <= 1.0 { 0 } else { ((need - 1.0) / epsilon).ceil() as u64 };
    while j > 0 && base * (1.0 + (j - 1) as f64 * epsilon) * d >= w {
        j -= 1;
    }
    loop {
        let lambda = base * (1.0 + j as f64 * epsilon);
        if lambda > ratio_cap {
            return Err(LabError::Construction { x, y, ratio: diam / d });
        }
        let threshold = lambda * d * (1.0 + SUPPORT_SLACK);
        match constrained_coupling_masses(space, a, b, |i, k| space.distance(i, k) <= threshold)? {
            ConstrainedCoupling::Feasible { plan } => {
                return Ok((fit_marginals(&plan, a, b), lambda));
            }
            ConstrainedCoupling::Infeasible { .. } => j += 1,
        }
    }
}

/// Rescales the atoms of a quantised plan towards the exact marginals by
/// alternating row and column scaling; the support is unchanged.
fn fit_marginals(plan: &CouplingPlan, a: &[f64], b: &[f64]) -> CouplingPlan {
    let mut atoms: Vec<(usize, usize, f64)> = plan.atoms().to_vec();
    for _ in 0..50 {
        let mut rows = vec![0.0; a.len()];
        for &(i, _, q) in &atoms {
            rows[i] += q;
        }
        for at in atoms.iter_mut() {
            at.2 *= a[at.0] / rows[at.0];
        }
        let mut cols = vec![0.0; b.len()];
        for &(_, j, q) in &atoms {
            cols[j] += q;
        }
        for at in atoms.iter_mut() {
            at.2 *= b[at.1] / cols[at.1];
        }
        let fitted = CouplingPlan::new(plan.source_sites(), plan.target_sites(), atoms.clone());
        if fitted.marginal_error(a, b) < 1e-15 {
            return fitted;
        }
    }
    CouplingPlan::new(plan.source_sites(), plan.target_sites(), atoms)
}

/// `q^{(steps)}` as a dense matrix over pair states.
#[derive(Clone, Debug)]
pub struct ComposedKernel {
    sites: usize,
    steps: usize,
    step: f64,
    matrix: DMatrix<f64>,
}

impl ComposedKernel {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Semigroup time `steps · δ`.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.step
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Law of the pair after `steps` steps from `(x, y)`, as an `n × n` matrix.
    pub fn joint(&self, x: usize, y: usize) -> DMatrix<f64> {
        let n = self.sites;
        DMatrix::from_fn(n, n, |i, j| self.matrix[(x * n + y, i * n + j)])
    }

    /// Push-forward of the row at `(x, y)` by coordinate 0 or 1.
    pub fn marginal(&self, x: usize, y: usize, coordinate: usize) -> Vec<f64> {
        let j = self.joint(x, y);
        if coordinate == 0 {
            j.row_iter().map(|r| r.sum()).collect()
        } else {
            j.column_iter().map(|c| c.sum()).collect()
        }
    }

    /// Largest entrywise deviation of both coordinate marginals from the
    /// heat-kernel rows `p_{steps·δ}` (given as a matrix).
    pub fn marginal_error(&self, kernel: &DMatrix<f64>) -> f64 {
        let n = self.sites;
        let mut err: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                let (m0, m1) = (self.marginal(x, y, 0), self.marginal(x, y, 1));
                for z in 0..n {
                    err = err.max((m0[z] - kernel[(x, z)]).abs()).max((m1[z] - kernel[(y, z)]).abs());
                }
            }
        }
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(n: usize) -> DiscreteSpace {
        DiscreteSpace::interval(n, 3.0, |x| 0.5 * x * x).unwrap()
    }

    #[test]
    fn diagonal_pairs_move_together() {
        let s = ou(9);
        let q = CoupledKernel::build(&s, 1.0, 0.05, 1e-3).unwrap();
        for x in 0..9 {
            assert!(q.plan(x, x).atoms().iter().all(|a| a.0 == a.1));
        }
        assert!(q.marginal_error() < 1e-12, "{}", q.marginal_error());
    }

    #[test]
    fn plans_respect_support_and_grid() {
        let s = ou(11);
        let (k, dt, eps) = (1.0, 2f64.powi(-5), 1e-3);
        let q = CoupledKernel::build(&s, k, dt, eps).unwrap();
        for x in 0..11 {
            for y in 0..11 {
                for &(i, j, _) in q.plan(x, y).atoms() {
                    assert!(q.admissible(x, y, i, j));
                }
                let j = (q.slack(x, y) / (-k * dt).exp() - 1.0) / eps;
                assert!((j - j.round()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn two_site_plan_is_threshold_minimal() {
        let s = DiscreteSpace::graph(2, &[(0, 1, 1.0, 1.0)], None).unwrap();
        let (k, dt, eps) = (0.5, 0.3, 1e-3);
        let q = CoupledKernel::build(&s, k, dt, eps).unwrap();
        let (a, b) = (q.kernel().row(0).clone_owned(), q.kernel().row(1).clone_owned());
        // couplings of two 2-point laws: P(0,0) = r, r in [max(0, a0 - b1), min(a0, b0)]
        let (lo, hi) = ((a[0] - b[1]).max(0.0), a[0].min(b[0]));
        let best = (0..=1000)
            .map(|i| {
                let r = lo + (hi - lo) * i as f64 / 1000.0;
                let off = [a[0] - r, b[0] - r];
                if off.iter().any(|&m| m > 1e-15) { 1.0 } else { 0.0 }
            })
            .fold(f64::INFINITY, f64::min);
        let base = (-k * dt).exp();
        let j = (0..).find(|&j| base * (1.0 + j as f64 * eps) >= best).unwrap();
        assert_eq!(q.slack(0, 1), base * (1.0 + j as f64 * eps));
        assert!(q.marginal_error() < 1e-12);
    }

    #[test]
    fn composition_marginals_and_support() {
        let s = ou(7);
        let dt = 0.05;
        let q = CoupledKernel::build(&s, 1.0, dt, 1e-3).unwrap();
        let c = q.compose(1, DEFAULT_PAIR_CAP).unwrap();
        assert!((c.matrix() - q.pair_matrix()).amax() == 0.0);
        let c = q.compose(8, DEFAULT_PAIR_CAP).unwrap();
        let cache = SpectralCache::heat(&s).unwrap();
        let k8 = markov_kernel(&cache, 8.0 * dt).unwrap();
        assert!(c.marginal_error(&k8) < 1e-10, "{}", c.marginal_error(&k8));
        for (x, y) in [(0, 6), (2, 3), (1, 5)] {
            assert_eq!(q.support_violations(x, y, 8), 0);
            let reach = q.reachable_budgets(x, y, 8);
            let row = c.joint(x, y);
            for i in 0..7 {
                for j in 0..7 {
                    assert_eq!(row[(i, j)] > 0.0, reach.contains_key(&(i * 7 + j)));
                }
            }
        }
        assert!(matches!(q.compose(2, 10), Err(LabError::CapExceeded { .. })));
    }
}
