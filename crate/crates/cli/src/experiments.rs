//! One runner per catalog entry. Runners are pure: they return reports and
//! plot files, and the caller writes everything after they finish.

use rayon::prelude::*;
use ricci_lab::checks::{
    be_point_margins, be_scan, be_scan_functions, cd_check, change_of_measure, evi_check, gradient_estimate_check,
    lambda_convexity_check, pathwise_convexity_check, tensor_curvature, wp_contraction_check,
};
use ricci_lab::coupling::{pathwise_contraction_stats, sample_coupled_paths, write_trajectories};
use ricci_lab::families::FunctionFamily;
use ricci_lab::semigroup::{duhamel_residual, feynman_kac_mc, markov_kernel, schrodinger_apply, write_sweep};
use ricci_lab::transport::{displacement_geodesic, write_action_trace};
use ricci_lab::{CheckReport, CoupledKernel, CouplingPlan, CurvatureField, DiscreteSpace, SpectralCache};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;

/// A file under `plotdata/`.
pub struct PlotFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    /// Parameters with every default filled in.
    pub params: Value,
    pub reports: Vec<CheckReport>,
    pub plots: Vec<PlotFile>,
    /// Whether the top-level `k` was read.
    pub uses_k: bool,
}

impl Outcome {
    fn new(params: &impl Serialize, reports: Vec<CheckReport>) -> Self {
        Self {
            params: serde_json::to_value(params).unwrap_or(Value::Null),
            reports,
            plots: Vec::new(),
            uses_k: true,
        }
    }

    fn plot(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.plots.push(PlotFile {
            name: name.to_string(),
            bytes,
        });
        self
    }
}

type Run = Result<Outcome, CliError>;

pub fn run(cfg: &ExperimentConfig) -> Run {
    let space = cfg.space.build()?;
    match cfg.experiment.as_str() {
        "be" => be(cfg, &space),
        "grad" => grad(cfg, &space),
        "cd" => cd(cfg, &space),
        "evi" => evi(cfg, &space),
        "contraction-wp" => contraction(cfg, &space),
        "duhamel" => duhamel(cfg, &space),
        "feynman-kac" => feynman_kac(cfg, &space),
        "couple" => couple(cfg, &space),
        "tensor" => tensor(cfg),
        "change-of-measure" => change(cfg, &space),
        "pathwise" => pathwise(cfg, &space),
        "refine-study" => refine(cfg),
        other => Err(CliError::Config(format!(
            "unknown experiment {other:?}; run `ricci-lab list` for the catalog"
        ))),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Output(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.into_error()))
}

fn functions(family: &FunctionFamily, space: &DiscreteSpace, cache: &SpectralCache) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(family.generate(space, cache)?)
}

fn be_sites_plot(space: &DiscreteSpace, k: &CurvatureField, functions: &[Vec<f64>]) -> Result<Vec<u8>, CliError> {
    let mut rows = Vec::new();
    for (ui, u) in functions.iter().enumerate() {
        for (x, m) in be_point_margins(space, k, u)?.into_iter().enumerate() {
            rows.push(vec![
                ui.to_string(),
                x.to_string(),
                space.sites()[x].coords[0].to_string(),
                m.to_string(),
            ]);
        }
    }
    csv_bytes(&["u_index", "site", "coord", "margin"], rows)
}

fn be(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: BeParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let family = reseed(&p.family, cfg.seed);
    let cache = SpectralCache::heat(space)?;
    let fs = functions(&family, space, &cache)?;
    let report = be_scan_functions(space, &k, &fs, p.tolerance)?.with_parameter("family", &family);
    let plot = be_sites_plot(space, &k, &fs)?;
    Ok(Outcome::new(&p, vec![report]).plot("be_sites.csv", plot))
}

fn grad(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: GradParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let family = reseed(&p.family, cfg.seed);
    let cache = SpectralCache::heat(space)?;
    let fs = functions(&family, space, &cache)?;
    let report = gradient_estimate_check(space, &k, &fs, &p.times, p.tolerance)?.with_parameter("family", &family);
    let mut sweep = Vec::new();
    write_sweep(&cache, &fs[0], &p.times, &mut sweep)?;
    Ok(Outcome::new(&p, vec![report]).plot("heat_sweep.csv", sweep))
}

fn cd(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: CdParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let (mu0, mu1) = (p.mu0.build(space)?, p.mu1.build(space)?);
    let report = cd_check(space, &k, &mu0, &mu1, &p.times, p.resolution, p.geo_coeff)?;
    let plan = displacement_geodesic(space, &mu0, &mu1, p.resolution)?;
    let mut trace = Vec::new();
    write_action_trace(&plan, &k, 0.5, &mut trace)?;
    Ok(Outcome::new(&p, vec![report]).plot("action_midpoint.csv", trace))
}

fn evi(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: EviParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let (mu0, nu) = (p.mu0.build(space)?, p.nu.build(space)?);
    let report = evi_check(space, &k, &mu0, &nu, &p.times, p.resolution, p.eta, p.geo_coeff)?;
    Ok(Outcome::new(&p, vec![report]))
}

fn contraction(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: WpParams = cfg.params()?;
    let rate = match p.rate {
        Some(r) => r,
        None => cfg.curvature(space)?.lower_bound(),
    };
    if p.pairs == 0 || p.exponents.is_empty() {
        return Err(CliError::Config("contraction-wp needs pairs ≥ 1 and at least one exponent".into()));
    }
    let measures = p.bumps.sample_many(space, 2 * p.pairs, cfg.seed)?;
    let pairs: Vec<_> = measures.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    let reports = p
        .exponents
        .par_iter()
        .map(|e| {
            let mut r = wp_contraction_check(space, rate, &pairs, &p.times, *e, p.tolerance)?
                .with_parameter("rate", rate)
                .with_parameter("seed", cfg.seed);
            r.name = format!("contraction-wp[p={}]", e.label());
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = Outcome::new(&p, reports);
    out.uses_k = p.rate.is_none();
    Ok(out)
}

fn duhamel(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: DuhamelParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let residuals = p
        .times
        .par_iter()
        .map(|&t| duhamel_residual(space, &k, t, p.nodes).map(|r| -r))
        .collect::<Result<Vec<_>, _>>()?;
    if residuals.is_empty() {
        return Err(CliError::Config("duhamel needs at least one time".into()));
    }
    let times = p.times.clone();
    let report = CheckReport::from_residuals("duhamel", residuals, p.tolerance, times.len(), |i| json!({"t": times[i]}))
        .with_parameter("nodes", p.nodes);
    Ok(Outcome::new(&p, vec![report]))
}

fn feynman_kac(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: FeynmanKacParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let cache = SpectralCache::heat(space)?;
    let u = p.function.build(space, &cache)?;
    let est = feynman_kac_mc(space, &k, &u, p.t, p.n_paths, cfg.seed)?;
    let exact = schrodinger_apply(space, &k, &u, p.t)?;
    let residuals: Vec<f64> = (0..space.len())
        .map(|x| p.z * est.standard_error[x] - (est.estimate[x] - exact[x]).abs())
        .collect();
    let report = CheckReport::from_residuals("feynman-kac", residuals, 1e-12, space.len(), |x| {
        json!({"site": x, "estimate": est.estimate[x], "exact": exact[x], "standard_error": est.standard_error[x]})
    })
    .with_parameter("seed", cfg.seed)
    .with_parameter("n_paths", p.n_paths);
    let rows = (0..space.len()).map(|x| {
        vec![
            x.to_string(),
            est.estimate[x].to_string(),
            est.standard_error[x].to_string(),
            exact[x].to_string(),
        ]
    });
    let table = csv_bytes(&["site", "estimate", "standard_error", "exact"], rows)?;
    let summary = json!({
        "seed": est.seed,
        "n_paths": est.n_paths,
        "t": est.t,
        "substreams": "path j from site x uses substream (seed, x, j)",
        "estimate": est.estimate,
        "standard_error": est.standard_error,
        "exact": exact,
    });
    Ok(Outcome::new(&p, vec![report])
        .plot("feynman_kac.csv", table)
        .plot("feynman_kac_summary.json", pretty(&summary)))
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).unwrap_or_default();
    b.push(b'\n');
    b
}

fn couple(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: CoupleParams = cfg.params()?;
    let rate = match p.rate {
        Some(r) => r,
        None => cfg.curvature(space)?.lower_bound(),
    };
    let n = space.len();
    let (x, y) = p.start.unwrap_or((0, n - 1));
    if x >= n || y >= n {
        return Err(CliError::Config(format!("start pair ({x}, {y}) out of range")));
    }
    let qk = CoupledKernel::build(space, rate, p.step, p.epsilon)?;
    let alpha = CouplingPlan::new(n, n, vec![(x, y, 1.0)]);
    let paths = sample_coupled_paths(&qk, &alpha, p.horizon, p.n_paths, cfg.seed)?;
    let steps = (p.horizon / (2.0 * p.step)).round() as usize;
    let stats = pathwise_contraction_stats(&qk, &paths, rate)?
        .with_parameter("start", [x, y])
        .with_diagnostic("support_violations_from_start", qk.support_violations(x, y, steps) as f64);
    let marg = CheckReport::from_residuals("couple-kernel-marginals", vec![-qk.marginal_error()], p.marginal_tolerance, 1, |_| {
        json!({"step": p.step})
    });
    let mut reports = vec![stats, marg];
    if n * n <= p.pair_cap {
        let composed = qk.compose(steps, p.pair_cap)?;
        let kernel = markov_kernel(&SpectralCache::heat(space)?, steps as f64 * p.step)?;
        let err = composed.marginal_error(&kernel);
        reports.push(
            CheckReport::from_residuals("couple-composition", vec![-err], p.marginal_tolerance, 1, |_| {
                json!({"steps": steps})
            })
            .with_parameter("process_time", composed.time()),
        );
    }
    let mut traj = Vec::new();
    write_trajectories(&qk, &paths, &mut traj)?;
    let mut kernel_json = Vec::new();
    qk.write_json(&mut kernel_json)?;
    let summary = json!({
        "seed": cfg.seed,
        "streams": "path i uses stream (seed, i)",
        "n_paths": p.n_paths,
        "horizon": p.horizon,
        "start": [x, y],
        "rate": rate,
        "final_distance_mean": paths.iter().map(|t| {
            let (a, b) = *t.states.last().unwrap_or(&(x, y));
            space.distance(a, b)
        }).sum::<f64>() / p.n_paths.max(1) as f64,
        "contraction_bound": (-rate * p.horizon / 2.0).exp() * space.distance(x, y),
    });
    let mut out = Outcome::new(&p, reports)
        .plot("trajectories.csv", traj)
        .plot("kernel.json", kernel_json)
        .plot("couple_summary.json", pretty(&summary));
    out.uses_k = p.rate.is_none();
    Ok(out)
}

fn tensor(cfg: &ExperimentConfig) -> Run {
    cfg.reject_k()?;
    let p: TensorParams = cfg.params()?;
    if cfg.space.kind != "product" {
        return Err(CliError::Config("tensor needs a product space".into()));
    }
    let factors = &cfg.space.factors;
    if factors.len() < 2 || p.k_factors.len() > factors.len() {
        return Err(CliError::Config(format!(
            "tensor needs at least two factors and at most one curvature per factor ({} given for {})",
            p.k_factors.len(),
            factors.len()
        )));
    }
    let field = |i: usize, s: &DiscreteSpace| p.k_factors.get(i).cloned().unwrap_or_default().resolve(&factors[i], s);
    let mut space = factors[0].build()?;
    let mut k = field(0, &space)?;
    for (i, spec) in factors.iter().enumerate().skip(1) {
        let f = spec.build()?;
        let kf = field(i, &f)?;
        let prod = DiscreteSpace::product(&space, &f)?;
        k = tensor_curvature(&[k, kf], &prod)?;
        space = prod;
    }
    let family = reseed(&p.family, cfg.seed);
    let mut report = be_scan(&space, &k, &family, p.tolerance)?;
    report.name = "tensor".into();
    let report = report.with_parameter("k_min", k.lower_bound());
    let mut out = Outcome::new(&p, vec![report]);
    out.uses_k = false;
    Ok(out)
}

fn change(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: ChangeOfMeasureParams = cfg.params()?;
    p.potential.validate()?;
    let k = cfg.curvature(space)?;
    let lambda = p.lambda.resolve(&cfg.space, space)?;
    let v = |c: &[f64]| p.potential.value(c[0]);
    let (tilted, kk) = change_of_measure(space, &k, &v, &lambda)?;
    let family = reseed(&p.family, cfg.seed);
    let mut be = be_scan(&tilted, &kk, &family, p.tolerance)?;
    be.name = "change-of-measure[be]".into();
    let mut reports = vec![be];
    if space.is_interval() {
        let n = space.len();
        let paths = if p.paths.is_empty() {
            vec![(0, n - 1), (n / 4, 3 * n / 4)]
        } else {
            p.paths.clone()
        };
        let values: Vec<f64> = space.sites().iter().map(|s| v(&s.coords)).collect();
        reports.push(lambda_convexity_check(space, &values, &lambda, &paths, p.convexity_tolerance)?);
    }
    Ok(Outcome::new(&p, reports))
}

fn pathwise(cfg: &ExperimentConfig, space: &DiscreteSpace) -> Run {
    let p: PathwiseParams = cfg.params()?;
    let k = cfg.curvature(space)?;
    let (mu0, mu1) = (p.mu0.build(space)?, p.mu1.build(space)?);
    let plan = displacement_geodesic(space, &mu0, &mu1, p.resolution)?;
    let report = pathwise_convexity_check(space, &k, &plan, &p.times, p.tolerance)?;
    Ok(Outcome::new(&p, vec![report]))
}

fn refine(cfg: &ExperimentConfig) -> Run {
    let p: RefineParams = cfg.params()?;
    if !matches!(cfg.space.kind.as_str(), "interval" | "circle") {
        return Err(CliError::Config("refine-study needs an interval or circle space".into()));
    }
    if p.levels.is_empty() {
        return Err(CliError::Config("refine-study needs at least one level".into()));
    }
    let family = reseed(&p.family, cfg.seed);
    let k_spec = cfg.k.clone().unwrap_or_default();
    let levels = p
        .levels
        .par_iter()
        .map(|&n| {
            let mut spec = cfg.space.clone();
            spec.n = Some(n);
            let space = spec.build()?;
            let k = k_spec.resolve(&spec, &space)?;
            let mut r = be_scan(&space, &k, &family, p.tolerance)?.with_parameter("n", n);
            r.name = format!("be[n={n}]");
            Ok((n, space.mesh(), r))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = levels.iter().map(|(n, h, r)| {
        vec![
            n.to_string(),
            h.to_string(),
            r.min_margin.to_string(),
            r.tolerance.to_string(),
        ]
    });
    let table = csv_bytes(&["n", "mesh", "min_margin", "tolerance"], rows)?;
    let reports = levels.into_iter().map(|(_, _, r)| r).collect();
    Ok(Outcome::new(&p, reports).plot("refine.csv", table))
}
