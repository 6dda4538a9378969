//! Monte Carlo evaluation of `T^{2k}_t u(x) = E_x[e^{-∫₀^{2t} k(B_s) ds} u(B_{2t})]`
//! with exact continuous-time simulation of the walk generated by `½Δ`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::substream;
use crate::space::{CurvatureField, DiscreteSpace};

/// One simulated path: strictly increasing jump times, the visited sites
/// (one more than jumps), the accumulated `∫ k(B_s) ds` and its seed lineage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub seed: u64,
    pub start: usize,
    pub index: u64,
    pub jump_times: Vec<f64>,
    pub sites: Vec<usize>,
    pub k_integral: f64,
    pub terminal: usize,
}

/// Per-site estimate and standard error, with the inputs that reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    pub seed: u64,
    pub n_paths: usize,
    pub t: f64,
    pub estimate: Vec<f64>,
    pub standard_error: Vec<f64>,
}

/// Jump tables: per site, the total jump rate of `½Δ` and cumulative
/// neighbour weights.
struct Walk {
    rate: Vec<f64>,
    cumulative: Vec<Vec<(usize, f64)>>,
}

impl Walk {
    fn new(space: &DiscreteSpace) -> Self {
        let mut rate = Vec::with_capacity(space.len());
        let mut cumulative = Vec::with_capacity(space.len());
        for x in 0..space.len() {
            let mut acc = 0.0;
            let table: Vec<(usize, f64)> = space
                .neighbors(x)
                .iter()
                .map(|&(y, w)| {
                    acc += w;
                    (y, acc)
                })
                .collect();
            rate.push(0.5 * acc / space.measure()[x]);
            cumulative.push(table);
        }
        Self { rate, cumulative }
    }

    /// Runs one path from `x` for process time `horizon`; returns the
    /// terminal site and `∫ k`. Records jumps into `record` if given.
    fn run(
        &self,
        k: &[f64],
        x: usize,
        horizon: f64,
        rng: &mut impl Rng,
        mut record: Option<&mut PathSample>,
    ) -> (usize, f64) {
        let mut site = x;
        let mut now = 0.0;
        let mut integral = 0.0;
        loop {
            let rate = self.rate[site];
            let hold = if rate > 0.0 {
                rng.sample::<f64, _>(Exp1) / rate
            } else {
                f64::INFINITY
            };
            if now + hold >= horizon {
                integral += (horizon - now) * k[site];
                return (site, integral);
            }
            integral += hold * k[site];
            now += hold;
            let table = &self.cumulative[site];
            let target = rng.random::<f64>() * table.last().unwrap().1;
            site = table
                .iter()
                .find(|&&(_, c)| target < c)
                .unwrap_or(table.last().unwrap())
                .0;
            if let Some(rec) = record.as_deref_mut() {
                rec.jump_times.push(now);
                rec.sites.push(site);
            }
        }
    }
}

/// Simulates path `index` from `start` up to process time `2t`.
pub fn sample_path(
    space: &DiscreteSpace,
    k: &CurvatureField,
    start: usize,
    t: f64,
    seed: u64,
    index: u64,
) -> Result<PathSample> {
    k.check_len(space)?;
    if start >= space.len() || !(t >= 0.0) {
        return Err(invalid("bad start site or time"));
    }
    let walk = Walk::new(space);
    let mut rng = substream(seed, start as u64, index);
    let mut rec = PathSample {
        seed,
        start,
        index,
        jump_times: Vec::new(),
        sites: vec![start],
        k_integral: 0.0,
        terminal: start,
    };
    let (terminal, integral) = walk.run(k.values(), start, 2.0 * t, &mut rng, Some(&mut rec));
    rec.terminal = terminal;
    rec.k_integral = integral;
    Ok(rec)
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Unbiased estimator of `T^{2k}_t u` at every site with `n_paths` paths per
/// site; path `j` from `x` uses random substream `(seed, x, j)`.
pub fn feynman_kac_mc(
    space: &DiscreteSpace,
    k: &CurvatureField,
    u: &[f64],
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    if n_paths < 1 {
        return Err(invalid("feynman-kac needs at least one path"));
    }
    k.check_len(space)?;
    if u.len() != space.len() {
        return Err(invalid("function length does not match the space"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be finite and ≥ 0, got {t}")));
    }
    let walk = Walk::new(space);
    let horizon = 2.0 * t;
    let stats: Vec<(f64, f64)> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let (mut s1, mut s2) = (Compensated::default(), Compensated::default());
            for j in 0..n_paths {
                let mut rng = substream(seed, x as u64, j as u64);
                let (end, integral) = walk.run(k.values(), x, horizon, &mut rng, None);
                let v = (-integral).exp() * u[end];
                s1.add(v);
                s2.add(v * v);
            }
            let n = n_paths as f64;
            let mean = s1.value() / n;
            let var = if n_paths > 1 {
                ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        })
        .collect();
    Ok(FeynmanKacEstimate {
        seed,
        n_paths,
        t,
        estimate: stats.iter().map(|s| s.0).collect(),
        standard_error: stats.iter().map(|s| s.1).collect(),
    })
}
