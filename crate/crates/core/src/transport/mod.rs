//! Exact optimal transport on finite spaces.
//!
//! `W_p` for `p < ∞` is solved as a transportation linear program (or by the
//! monotone quantile coupling on interval spaces, which is optimal there for
//! every convex cost). `W_∞` and support-constrained couplings are decided
//! by integer max-flow on measures quantised to `2^-40` units, so feasibility
//! and support statements are exact.

mod geodesic;
mod green;
pub(crate) mod maxflow;
mod simplex;

pub use geodesic::{displacement_geodesic, GeodesicAtom, GeodesicPlan, Segment};
pub use green::{action_integral, green_function, green_weights, tail_weights, write_action_trace};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::space::{DiscreteSpace, ProbMeasure};

/// Balance tolerance on input masses.
const BALANCE_TOL: f64 = 1e-10;

/// Coupling of two mass vectors, stored sparsely as `(x, y, mass)` atoms in
/// row-major order. Serialises as `{"source_sites", "target_sites", "atoms": [[x, y, q], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    source_sites: usize,
    target_sites: usize,
    atoms: Vec<(usize, usize, f64)>,
}

impl CouplingPlan {
    /// Sorts atoms, merges duplicates and drops nonpositive entries.
    pub fn new(source_sites: usize, target_sites: usize, mut atoms: Vec<(usize, usize, f64)>) -> Self {
        atoms.retain(|a| a.2 > 0.0);
        atoms.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(atoms.len());
        for (i, j, q) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += q,
                _ => merged.push((i, j, q)),
            }
        }
        Self {
            source_sites,
            target_sites,
            atoms: merged,
        }
    }

    pub fn diagonal(masses: &[f64]) -> Self {
        let n = masses.len();
        Self::new(n, n, masses.iter().enumerate().map(|(i, &q)| (i, i, q)).collect())
    }

    pub fn atoms(&self) -> &[(usize, usize, f64)] {
        &self.atoms
    }

    pub fn source_sites(&self) -> usize {
        self.source_sites
    }

    pub fn target_sites(&self) -> usize {
        self.target_sites
    }

    pub fn source_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.source_sites];
        for &(i, _, q) in &self.atoms {
            out[i] += q;
        }
        out
    }

    pub fn target_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.target_sites];
        for &(_, j, q) in &self.atoms {
            out[j] += q;
        }
        out
    }

    /// Largest absolute deviation of either marginal from the given masses.
    pub fn marginal_error(&self, source: &[f64], target: &[f64]) -> f64 {
        let a = self.source_marginal();
        let b = self.target_marginal();
        a.iter()
            .zip(source)
            .chain(b.iter().zip(target))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.source_sites, self.target_sites);
        for &(i, j, v) in &self.atoms {
            q[(i, j)] += v;
        }
        q
    }

    /// `Σ q(x,y) d(x,y)^p`.
    pub fn cost(&self, space: &DiscreteSpace, p: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(i, j, q)| q * space.distance(i, j).powf(p))
            .sum()
    }

    /// `‖d‖_{L∞(q)}`, the largest distance carried by the plan.
    pub fn sup_distance(&self, space: &DiscreteSpace) -> f64 {
        self.atoms
            .iter()
            .map(|&(i, j, _)| space.distance(i, j))
            .fold(0.0, f64::max)
    }
}

/// Outcome of a support-constrained coupling search. Infeasibility is an
/// ordinary answer, carrying the mass that could not be routed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConstrainedCoupling {
    Feasible { plan: CouplingPlan },
    Infeasible { shortfall: f64 },
}

impl ConstrainedCoupling {
    pub fn plan(&self) -> Option<&CouplingPlan> {
        match self {
            ConstrainedCoupling::Feasible { plan } => Some(plan),
            ConstrainedCoupling::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, ConstrainedCoupling::Feasible { .. })
    }
}

fn check_masses(space: &DiscreteSpace, a: &[f64], b: &[f64]) -> Result<()> {
    for (name, v) in [("source", a), ("target", b)] {
        if v.len() != space.len() {
            return Err(invalid(format!(
                "{name} has {} entries for {} sites",
                v.len(),
                space.len()
            )));
        }
        if v.iter().any(|q| !(*q >= 0.0)) {
            return Err(invalid(format!("{name} has a negative or NaN mass")));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > BALANCE_TOL {
            return Err(invalid(format!("unbalanced input: {name} has mass {total}")));
        }
    }
    Ok(())
}

/// One atom of the monotone coupling of two mass vectors on an ordered set:
/// source cell `i`, target cell `j`, and the quantile levels `[lo, hi)` it covers.
#[derive(Clone, Copy, Debug)]
pub(crate) struct QuantilePiece {
    pub i: usize,
    pub j: usize,
    pub lo: f64,
    pub hi: f64,
    /// cumulative source mass below cell `i` and target mass below cell `j`
    pub base_a: f64,
    pub base_b: f64,
}

/// North-west corner rule on sorted supports, driven by the merged cumulative
/// distribution functions so that rounding does not accumulate.
pub(crate) fn monotone_pieces(a: &[f64], b: &[f64]) -> Vec<QuantilePiece> {
    let n = a.len();
    let cum = |v: &[f64]| {
        let total: f64 = v.iter().sum();
        let mut c = Vec::with_capacity(v.len() + 1);
        let mut acc = 0.0;
        c.push(0.0);
        for &q in v {
            acc += q / total;
            c.push(acc);
        }
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let (fa, fb) = (cum(a), cum(b));
    let mut out = Vec::with_capacity(2 * n);
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    while i < n && j < b.len() {
        let (na, nb) = (fa[i + 1], fb[j + 1]);
        let next = na.min(nb);
        if next > u {
            out.push(QuantilePiece {
                i,
                j,
                lo: u,
                hi: next,
                base_a: fa[i],
                base_b: fb[j],
            });
            u = next;
        }
        if na <= u {
            i += 1;
        }
        if nb <= u {
            j += 1;
        }
    }
    out
}

/// Integer version of the monotone coupling on quantised masses.
fn monotone_integer(a: &[u64], b: &[u64]) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().copied().unwrap_or(0), b.first().copied().unwrap_or(0));
    while i < a.len() && j < b.len() {
        let q = ra.min(rb);
        if q > 0 {
            out.push((i, j, q));
        }
        ra -= q;
        rb -= q;
        if ra == 0 {
            i += 1;
            if i < a.len() {
                ra = a[i];
            }
        }
        if rb == 0 {
            j += 1;
            if j < b.len() {
                rb = b[j];
            }
        }
    }
    out
}

fn plan_from_units(n: usize, atoms: Vec<(usize, usize, u64)>) -> CouplingPlan {
    let unit = maxflow::UNITS as f64;
    CouplingPlan::new(
        n,
        n,
        atoms.into_iter().map(|(i, j, q)| (i, j, q as f64 / unit)).collect(),
    )
}

/// `W_p(μ, ν)` with an optimal plan, for `1 ≤ p < ∞`.
pub fn wasserstein_p(
    space: &DiscreteSpace,
    mu: &ProbMeasure,
    nu: &ProbMeasure,
    p: f64,
) -> Result<(f64, CouplingPlan)> {
    wasserstein_p_masses(space, &mu.masses(space), &nu.masses(space), p)
}

/// [`wasserstein_p`] on raw mass vectors (e.g. Markov kernel rows).
pub fn wasserstein_p_masses(
    space: &DiscreteSpace,
    a: &[f64],
    b: &[f64],
    p: f64,
) -> Result<(f64, CouplingPlan)> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("W_p needs 1 ≤ p < ∞, got {p}")));
    }
    check_masses(space, a, b)?;
    let n = space.len();
    if space.is_interval() {
        let atoms = monotone_pieces(a, b)
            .into_iter()
            .map(|pc| (pc.i, pc.j, pc.hi - pc.lo))
            .collect();
        let plan = CouplingPlan::new(n, n, atoms);
        return Ok((plan_value(space, &plan, p, space.diameter()), plan));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    // Very high powers are scaled by W_∞ so that costs near the optimum are
    // O(1); the cap only affects cells that no optimal vertex can use.
    let scale = if p > 8.0 {
        let w = wasserstein_inf_masses(space, a, b)?.0;
        if w > 0.0 {
            w
        } else {
            return Ok((0.0, CouplingPlan::diagonal(a)));
        }
    } else {
        space.diameter().max(f64::MIN_POSITIVE)
    };
    let cost: Vec<f64> = rows
        .iter()
        .flat_map(|&i| {
            cols.iter()
                .map(move |&j| (space.distance(i, j) / scale).powf(p).min(1e12))
        })
        .collect();
    let supply: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    let demand: Vec<f64> = demand.iter().map(|q| q * total_a / total_b).collect();
    let basic = simplex::solve(&supply, &demand, &cost)?;
    let plan = CouplingPlan::new(
        n,
        n,
        basic.into_iter().map(|(r, c, q)| (rows[r], cols[c], q)).collect(),
    );
    Ok((plan_value(space, &plan, p, scale), plan))
}

fn plan_value(space: &DiscreteSpace, plan: &CouplingPlan, p: f64, scale: f64) -> f64 {
    if scale <= 0.0 {
        return 0.0;
    }
    let s: f64 = plan
        .atoms()
        .iter()
        .map(|&(i, j, q)| q * (space.distance(i, j) / scale).powf(p))
        .sum();
    scale * s.powf(1.0 / p)
}

/// `W_∞(μ, ν)`: the smallest `c` admitting a coupling supported on `{d ≤ c}`.
pub fn wasserstein_inf(
    space: &DiscreteSpace,
    mu: &ProbMeasure,
    nu: &ProbMeasure,
) -> Result<(f64, CouplingPlan)> {
    wasserstein_inf_masses(space, &mu.masses(space), &nu.masses(space))
}

/// [`wasserstein_inf`] on raw mass vectors.
pub fn wasserstein_inf_masses(space: &DiscreteSpace, a: &[f64], b: &[f64]) -> Result<(f64, CouplingPlan)> {
    check_masses(space, a, b)?;
    let n = space.len();
    let qa = maxflow::quantize(a);
    let qb = maxflow::quantize(b);
    if space.is_interval() {
        let plan = plan_from_units(n, monotone_integer(&qa, &qb));
        return Ok((plan.sup_distance(space), plan));
    }
    let mut candidates: Vec<f64> = Vec::new();
    for i in (0..n).filter(|&i| qa[i] > 0) {
        for j in (0..n).filter(|&j| qb[j] > 0) {
            candidates.push(space.distance(i, j));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // The largest candidate is always feasible (any coupling qualifies).
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    let mut best = None;
    while lo <= hi {
        let mid = (lo + hi) / 2;
        let c = candidates[mid];
        match maxflow::bipartite(&qa, &qb, |i, j| space.distance(i, j) <= c) {
            Ok(atoms) => {
                best = Some((c, atoms));
                if mid == 0 {
                    break;
                }
                hi = mid - 1;
            }
            Err(_) => lo = mid + 1,
        }
    }
    let (c, atoms) = best.expect("the diameter threshold is always feasible");
    Ok((c, plan_from_units(n, atoms)))
}

/// A coupling of `μ` and `ν` supported on `{(x, y): d(x, y) ≤ c(x, y)}`.
pub fn constrained_coupling(
    space: &DiscreteSpace,
    mu: &ProbMeasure,
    nu: &ProbMeasure,
    threshold: &DMatrix<f64>,
) -> Result<ConstrainedCoupling> {
    let n = space.len();
    if threshold.nrows() != n || threshold.ncols() != n {
        return Err(invalid("threshold matrix does not match the space"));
    }
    if threshold.iter().any(|c| !(*c >= 0.0)) {
        return Err(invalid("threshold must be nonnegative"));
    }
    constrained_coupling_masses(space, &mu.masses(space), &nu.masses(space), |i, j| {
        space.distance(i, j) <= threshold[(i, j)]
    })
}

/// [`constrained_coupling`] on mass vectors with a support predicate.
pub fn constrained_coupling_masses(
    space: &DiscreteSpace,
    a: &[f64],
    b: &[f64],
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<ConstrainedCoupling> {
    check_masses(space, a, b)?;
    let qa = maxflow::quantize(a);
    let qb = maxflow::quantize(b);
    Ok(match maxflow::bipartite(&qa, &qb, allowed) {
        Ok(atoms) => ConstrainedCoupling::Feasible {
            plan: plan_from_units(space.len(), atoms),
        },
        Err(short) => ConstrainedCoupling::Infeasible {
            shortfall: short as f64 / maxflow::UNITS as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> DiscreteSpace {
        DiscreteSpace::graph(2, &[(0, 1, 1.0, 1.0)], None).unwrap()
    }

    fn path3() -> DiscreteSpace {
        DiscreteSpace::graph(3, &[(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0)], None).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let s = DiscreteSpace::circle(9, 1.0, f64::cos).unwrap();
        let mu = ProbMeasure::normalized(&s, &[1., 2., 3., 4., 5., 4., 3., 2., 1.]).unwrap();
        let (w, plan) = wasserstein_p(&s, &mu, &mu, 2.0).unwrap();
        assert_abs_diff_eq!(w, 0.0, epsilon = 1e-14);
        assert!(plan.atoms().iter().all(|a| a.0 == a.1));
        assert_eq!(wasserstein_inf(&s, &mu, &mu).unwrap().0, 0.0);
    }

    #[test]
    fn point_masses_cost_their_distance() {
        let s = DiscreteSpace::circle(10, 2.0, |_| 0.0).unwrap();
        let (x, y) = (ProbMeasure::dirac(&s, 1), ProbMeasure::dirac(&s, 7));
        for p in [1.0, 2.0, 5.0, 32.0] {
            let (w, _) = wasserstein_p(&s, &x, &y, p).unwrap();
            assert_abs_diff_eq!(w, s.distance(1, 7), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(wasserstein_inf(&s, &x, &y).unwrap().0, s.distance(1, 7), epsilon = 0.0);
    }

    #[test]
    fn two_site_example() {
        let s = two_point();
        let mu = ProbMeasure::from_masses(&s, &[0.5, 0.5]).unwrap();
        let nu = ProbMeasure::from_masses(&s, &[1.0, 0.0]).unwrap();
        // the only coupling moves 0.5 across distance 1
        let (w2, plan) = wasserstein_p(&s, &mu, &nu, 2.0).unwrap();
        assert_abs_diff_eq!(w2, 0.5f64.sqrt(), epsilon = 1e-14);
        assert!(plan.marginal_error(&[0.5, 0.5], &[1.0, 0.0]) < 1e-15);
        assert_eq!(wasserstein_inf(&s, &mu, &nu).unwrap().0, 1.0);
    }

    #[test]
    fn unbalanced_input_is_rejected() {
        let s = two_point();
        assert!(wasserstein_p_masses(&s, &[0.5, 0.6], &[1.0, 0.0], 2.0).is_err());
        assert!(wasserstein_p_masses(&s, &[0.5, 0.5], &[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn constrained_coupling_cases() {
        let s = path3();
        let mu = ProbMeasure::dirac(&s, 0);
        let nu = ProbMeasure::dirac(&s, 2);
        let ones = DMatrix::from_element(3, 3, 1.0);
        match constrained_coupling(&s, &mu, &nu, &ones).unwrap() {
            ConstrainedCoupling::Infeasible { shortfall } => assert_abs_diff_eq!(shortfall, 1.0),
            other => panic!("expected infeasible, got {other:?}"),
        }
        let diam = DMatrix::from_element(3, 3, s.diameter());
        assert!(constrained_coupling(&s, &mu, &nu, &diam).unwrap().is_feasible());
        let uni = ProbMeasure::uniform(&s);
        let zero = DMatrix::zeros(3, 3);
        let plan = constrained_coupling(&s, &uni, &uni, &zero).unwrap();
        let plan = plan.plan().unwrap();
        assert!(plan.atoms().iter().all(|a| a.0 == a.1));
    }

    #[test]
    fn interval_fast_path_agrees_with_simplex() {
        let s = DiscreteSpace::interval(12, 1.0, |x| x * x).unwrap();
        let g = DiscreteSpace::from_metric(s.metric().clone(), Some(s.measure()), None).unwrap();
        let a: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) + 1) as f64).collect();
        let b: Vec<f64> = (0..12).map(|i| (i * 3 % 4) as f64 + 0.5).collect();
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let a: Vec<f64> = a.iter().map(|v| v / sa).collect();
        let b: Vec<f64> = b.iter().map(|v| v / sb).collect();
        for p in [1.0, 2.0, 3.0] {
            let line = wasserstein_p_masses(&s, &a, &b, p).unwrap().0;
            let lp = wasserstein_p_masses(&g, &a, &b, p).unwrap().0;
            assert_abs_diff_eq!(line, lp, epsilon = 1e-12);
        }
        let line = wasserstein_inf_masses(&s, &a, &b).unwrap().0;
        let flow = wasserstein_inf_masses(&g, &a, &b).unwrap().0;
        assert_abs_diff_eq!(line, flow, epsilon = 1e-15);
    }
}
