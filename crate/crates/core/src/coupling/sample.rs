use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::CoupledKernel;
use crate::checks::CheckReport;
use crate::error::{invalid, LabError, Result};
use crate::rng::stream;
use crate::transport::CouplingPlan;

/// One coupled path on the dyadic grid `0, 2δ, 4δ, …` (process time).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub path: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<(usize, usize)>,
}

/// Number of kernel steps covering a process-time span.
fn steps_for(qk: &CoupledKernel, span: f64) -> Result<usize> {
    let unit = 2.0 * qk.step();
    let steps = (span / unit).round();
    if !(span >= 0.0) || (steps * unit - span).abs() > 1e-9 * unit.max(span) {
        return Err(invalid(format!(
            "time {span} is not a multiple of the process step {unit}"
        )));
    }
    Ok(steps as usize)
}

fn draw(table: &[(f64, usize)], u: f64) -> usize {
    let total = table.last().map_or(0.0, |t| t.0);
    let target = u * total;
    let i = table.partition_point(|&(c, _)| c <= target);
    table[i.min(table.len() - 1)].1
}

/// Samples `n_paths` coupled trajectories up to `horizon` (process time),
/// the initial pair drawn from `alpha`. Path `i` uses stream `(seed, i)`.
/// Every transition is checked against the support bound.
pub fn sample_coupled_paths(
    qk: &CoupledKernel,
    alpha: &CouplingPlan,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<CoupledTrajectory>> {
    let n = qk.len();
    if alpha.source_sites() != n || alpha.target_sites() != n {
        return Err(invalid("initial pair law does not match the kernel"));
    }
    if alpha.atoms().is_empty() {
        return Err(invalid("initial pair law is empty"));
    }
    let steps = steps_for(qk, horizon)?;
    let mut acc = 0.0;
    let start: Vec<(f64, usize)> = alpha
        .atoms()
        .iter()
        .map(|&(x, y, q)| {
            acc += q;
            (acc, x * n + y)
        })
        .collect();
    let unit = 2.0 * qk.step();
    (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream(seed, path as u64);
            let mut p = draw(&start, rng.random());
            let mut states = Vec::with_capacity(steps + 1);
            states.push((p / n, p % n));
            for _ in 0..steps {
                let next = draw(qk.table(p), rng.random());
                let (x, y, xn, yn) = (p / n, p % n, next / n, next % n);
                if !qk.admissible(x, y, xn, yn) {
                    return Err(LabError::SupportViolation(format!(
                        "path {path}: ({x}, {y}) -> ({xn}, {yn}) exceeds λ d"
                    )));
                }
                p = next;
                states.push((xn, yn));
            }
            Ok(CoupledTrajectory {
                path,
                seed,
                times: (0..=steps).map(|i| i as f64 * unit).collect(),
                states,
            })
        })
        .collect()
}

/// Checks `d(B¹_{s+t}, B²_{s+t}) ≤ e^{-Kt/2} d(B¹_s, B²_s) · Π(λ e^{K₀δ})`
/// over all grid pairs `s < s + t`, where `K₀` is the kernel's rate and the
/// product runs over the steps in between. Residuals are the per-path
/// minimum margins; coalesced pairs that separate count as violations.
pub fn pathwise_contraction_stats(
    qk: &CoupledKernel,
    trajectories: &[CoupledTrajectory],
    rate: f64,
) -> Result<CheckReport> {
    let scale = (qk.rate() * qk.step()).exp();
    let tol = SLACK_TOL * qk.distance_scale();
    let per_path: Vec<(f64, usize, usize, usize, f64, f64, usize)> = trajectories
        .par_iter()
        .map(|tr| {
            let d: Vec<f64> = tr.states.iter().map(|&(x, y)| qk.distance(x, y)).collect();
            let steps = tr.states.len();
            let mut min_margin = f64::INFINITY;
            let (mut violations, mut checked, mut separations) = (0, 0, 0);
            let (mut ratio_max, mut ratio_sum, mut ratio_count) = (0.0f64, 0.0, 0);
            let mut met = false;
            for &(x, y) in &tr.states {
                if met && x != y {
                    separations += 1;
                }
                met |= x == y;
            }
            for s in 0..steps {
                let mut budget = 1.0;
                for u in s + 1..steps {
                    let (x, y) = tr.states[u - 1];
                    budget *= qk.slack(x, y) * scale;
                    let t = tr.times[u] - tr.times[s];
                    let bound = (-rate * t / 2.0).exp() * d[s];
                    let margin = bound * budget - d[u];
                    checked += 1;
                    if margin < -tol {
                        violations += 1;
                    }
                    min_margin = min_margin.min(margin);
                    if bound > 0.0 {
                        let r = d[u] / bound;
                        ratio_max = ratio_max.max(r);
                        ratio_sum += r;
                        ratio_count += 1;
                    }
                }
            }
            if !min_margin.is_finite() {
                min_margin = 0.0;
            }
            (min_margin, violations, checked, separations, ratio_max, ratio_sum, ratio_count)
        })
        .collect();
    let residuals: Vec<f64> = per_path.iter().map(|r| r.0).collect();
    let violations: usize = per_path.iter().map(|r| r.1).sum();
    let checked: usize = per_path.iter().map(|r| r.2).sum();
    let separations: usize = per_path.iter().map(|r| r.3).sum();
    let ratio_max = per_path.iter().map(|r| r.4).fold(0.0, f64::max);
    let ratio_count: usize = per_path.iter().map(|r| r.6).sum();
    let ratio_mean = if ratio_count > 0 {
        per_path.iter().map(|r| r.5).sum::<f64>() / ratio_count as f64
    } else {
        0.0
    };
    let mut report = CheckReport::from_residuals("pathwise-contraction", residuals, tol, trajectories.len(), |i| {
        let tr = &trajectories[i];
        json!({"path": tr.path, "seed": tr.seed, "start": tr.states.first()})
    });
    if separations > 0 {
        report = CheckReport {
            verdict: crate::checks::Verdict::Fail,
            assessment: crate::checks::Assessment::Fail,
            ..report
        };
    }
    Ok(report
        .with_parameter("K", rate)
        .with_parameter("kernel_rate", qk.rate())
        .with_parameter("step", qk.step())
        .with_parameter("seed", trajectories.first().map(|t| t.seed))
        .with_diagnostic("violations", violations as f64)
        .with_diagnostic("pairs_checked", checked as f64)
        .with_diagnostic("separations", separations as f64)
        .with_diagnostic("ratio_max", ratio_max)
        .with_diagnostic("ratio_mean", ratio_mean)
        .with_diagnostic("max_slack_ratio", qk.max_slack_ratio()))
}

/// Rounding allowance for the margins, relative to the largest distance.
const SLACK_TOL: f64 = 1e-9;

impl CoupledKernel {
    fn distance_scale(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .map(|(x, y)| self.distance(x, y))
            .fold(0.0, f64::max)
    }
}

/// CSV `path,time,x,y,distance`.
pub fn write_trajectories(qk: &CoupledKernel, trajectories: &[CoupledTrajectory], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "time", "x", "y", "distance"])?;
    for tr in trajectories {
        for (t, &(x, y)) in tr.times.iter().zip(&tr.states) {
            w.write_record([
                tr.path.to_string(),
                t.to_string(),
                x.to_string(),
                y.to_string(),
                qk.distance(x, y).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Exact law of the pair at process times `J`, as a sparse table keyed by
/// the pair states `x·n + y` at each time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDimDistribution {
    pub sites: usize,
    pub times: Vec<f64>,
    pub table: BTreeMap<Vec<usize>, f64>,
}

impl FiniteDimDistribution {
    /// Sums out time index `i`.
    pub fn marginalize(&self, i: usize) -> Result<Self> {
        if i >= self.times.len() {
            return Err(invalid("no such time index"));
        }
        let mut table = BTreeMap::new();
        for (k, &v) in &self.table {
            let mut key = k.clone();
            key.remove(i);
            *table.entry(key).or_insert(0.0) += v;
        }
        let mut times = self.times.clone();
        times.remove(i);
        Ok(Self {
            sites: self.sites,
            times,
            table,
        })
    }

    /// Law of one coordinate (0 or 1) at all times, keyed by sites.
    pub fn project(&self, coordinate: usize) -> BTreeMap<Vec<usize>, f64> {
        let n = self.sites;
        let mut out = BTreeMap::new();
        for (k, &v) in &self.table {
            let key: Vec<usize> = k.iter().map(|&p| if coordinate == 0 { p / n } else { p % n }).collect();
            *out.entry(key).or_insert(0.0) += v;
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.table.values().sum()
    }
}

/// Iterates the kernel from `alpha` and records the pair at each process
/// time in `times` (nondecreasing multiples of `2δ`). Refuses when the table
/// would exceed `cap` entries.
pub fn finite_dim_distribution(
    qk: &CoupledKernel,
    alpha: &CouplingPlan,
    times: &[f64],
    cap: usize,
) -> Result<FiniteDimDistribution> {
    let n = qk.len();
    if alpha.source_sites() != n || alpha.target_sites() != n {
        return Err(invalid("initial pair law does not match the kernel"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times must be nondecreasing"));
    }
    let steps: Vec<usize> = times.iter().map(|&t| steps_for(qk, t)).collect::<Result<_>>()?;
    // state: (recorded history, current pair)
    let mut current: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
    for &(x, y, q) in alpha.atoms() {
        *current.entry((Vec::new(), x * n + y)).or_insert(0.0) += q;
    }
    let mut clock = 0;
    for &target in &steps {
        while clock < target {
            let mut next = BTreeMap::new();
            for ((hist, p), &v) in &current {
                for &(i, j, q) in qk.plan(p / n, p % n).atoms() {
                    *next.entry((hist.clone(), i * n + j)).or_insert(0.0) += v * q;
                }
            }
            current = next;
            clock += 1;
        }
        current = current
            .into_iter()
            .map(|((mut hist, p), v)| {
                hist.push(p);
                ((hist, p), v)
            })
            .collect();
        if current.len() > cap {
            return Err(LabError::CapExceeded {
                what: "finite-dimensional distribution entries",
                needed: current.len(),
                cap,
            });
        }
    }
    let mut table = BTreeMap::new();
    for ((hist, _), v) in current {
        *table.entry(hist).or_insert(0.0) += v;
    }
    Ok(FiniteDimDistribution {
        sites: n,
        times: times.to_vec(),
        table,
    })
}
