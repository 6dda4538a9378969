use ricci_lab::checks::{be_scan, cd_check, change_of_measure, ent_slope_check, evi_check, pathwise_convexity_check};
use ricci_lab::coupling::finite_dim_distribution;
use ricci_lab::families::FunctionFamily;
use ricci_lab::semigroup::{feynman_kac_mc, heat_apply, heat_flow_measure, markov_kernel};
use ricci_lab::transport::{displacement_geodesic, tail_weights};
use ricci_lab::{CoupledKernel, CouplingPlan, CurvatureField, DiscreteSpace, ProbMeasure, SpectralCache};

fn ou(n: usize, half_width: f64) -> DiscreteSpace {
    DiscreteSpace::interval(n, half_width, |x| 0.5 * x * x).unwrap()
}

fn gaussian(s: &DiscreteSpace, center: f64, width: f64) -> ProbMeasure {
    let w: Vec<f64> = s
        .sites()
        .iter()
        .map(|p| (-(p.coords[0] - center).powi(2) / (2.0 * width * width)).exp())
        .collect();
    ProbMeasure::normalized(s, &w).unwrap()
}

/// Quantile function of the cell-uniform histogram with masses `a` on
/// cells of width `h` centred at `xs`.
fn quantile(xs: &[f64], h: f64, a: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &m) in a.iter().enumerate() {
        if m > 0.0 && acc + m >= u {
            return xs[i] - h / 2.0 + h * (u - acc) / m;
        }
        acc += m;
    }
    xs[xs.len() - 1] + h / 2.0
}

#[test]
fn geodesic_midpoint_matches_quantile_interpolation() {
    let s = DiscreteSpace::interval(101, 5.0, |_| 0.0).unwrap();
    let h = s.mesh();
    let xs: Vec<f64> = (0..101).map(|i| s.line_coord(i).unwrap()).collect();
    let mu0 = gaussian(&s, -1.0, 0.5);
    let mu1 = gaussian(&s, -0.75, 0.5);
    let (a, b) = (mu0.masses(&s), mu1.masses(&s));
    let plan = displacement_geodesic(&s, &mu0, &mu1, 100).unwrap();
    let mid = plan.evaluate_masses(&s, 0.5);
    // W1 between the evaluated midpoint and the oracle's quantile midpoint
    let levels = 20_000;
    let mut oracle_cdf = vec![0.0; 101];
    for l in 0..levels {
        let u = (l as f64 + 0.5) / levels as f64;
        let q = 0.5 * (quantile(&xs, h, &a, u) + quantile(&xs, h, &b, u));
        let cell = (((q - xs[0]) / h).round().max(0.0) as usize).min(100);
        oracle_cdf[cell] += 1.0 / levels as f64;
    }
    let (mut f, mut g, mut w1) = (0.0, 0.0, 0.0);
    for i in 0..101 {
        f += mid[i];
        g += oracle_cdf[i];
        w1 += (f - g).abs() * h;
    }
    assert!(w1 <= h, "W1 {w1} vs h {h}");
}

#[test]
fn heat_flow_dissipates_entropy_and_equilibrates() {
    let s = ou(61, 4.0);
    let cache = SpectralCache::heat(&s).unwrap();
    let mu = gaussian(&s, 1.5, 0.3);
    let mut last = s.entropy(&mu);
    for t in [0.01, 0.05, 0.2, 1.0, 3.0] {
        let e = s.entropy(&heat_flow_measure(&cache, &s, &mu, t).unwrap());
        assert!(e <= last + 1e-12);
        last = e;
    }
    let long = heat_flow_measure(&cache, &s, &mu, 50.0 / cache.gap()).unwrap();
    assert!(long.density().iter().all(|r| (r - 1.0).abs() < 1e-8));
}

#[test]
fn feynman_kac_without_potential_estimates_the_heat_semigroup() {
    let s = ou(21, 2.0);
    let k = CurvatureField::constant(21, 0.0);
    let u: Vec<f64> = (0..21).map(|i| (0.3 * i as f64).sin()).collect();
    let exact = heat_apply(&s, &u, 0.2).unwrap();
    let est = feynman_kac_mc(&s, &k, &u, 0.2, 10_000, 3).unwrap();
    for x in 0..21 {
        assert!((est.estimate[x] - exact[x]).abs() <= 3.0 * est.standard_error[x] + 1e-12, "site {x}");
    }
}

#[test]
fn constant_curvature_reductions() {
    let s = ou(201, 5.0);
    let n = s.len();
    let (mu0, mu1) = (gaussian(&s, -1.0, 0.6), gaussian(&s, 1.2, 0.9));
    let t_grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let plan = displacement_geodesic(&s, &mu0, &mu1, 200).unwrap();
    let w2 = plan.transport_cost();
    let big_k = 0.8;
    let k = CurvatureField::constant(n, big_k);
    let zero = CurvatureField::constant(n, 0.0);
    // CD: margins differ from the k ≡ 0 margins by exactly K t(1-t)/2 W₂²
    let a = cd_check(&s, &zero, &mu0, &mu1, &t_grid, 200, None).unwrap();
    let b = cd_check(&s, &k, &mu0, &mu1, &t_grid, 200, None).unwrap();
    for (i, t) in t_grid.iter().enumerate() {
        let shift = a.residuals[i] - b.residuals[i];
        assert!((shift - big_k * t * (1.0 - t) / 2.0 * w2).abs() < 1e-9 * w2);
    }
    // OU with k ≡ 1 passes at the default geodesic budget
    assert!(cd_check(&s, &k.shifted(0.2), &mu0, &mu1, &t_grid, 200, None).unwrap().passed());
    // entropy slope: the curvature term is K W₂²/2, via tail weights ∫(1-s)
    let tail: f64 = tail_weights(200).iter().sum();
    assert!((tail - 0.5).abs() < 1e-12);
    let (m0, _) = ent_slope_check(&s, &zero, &plan, 1e-3).unwrap();
    let (mk, _) = ent_slope_check(&s, &k, &plan, 1e-3).unwrap();
    assert!(((m0 - mk) - big_k * w2 / 2.0).abs() < 1e-9 * w2);
    // EVI: the k-term is (K/2) W₂²(μ_t, ν) at each t
    let nu = gaussian(&s, 0.5, 1.0);
    let a = evi_check(&s, &zero, &mu0, &nu, &[0.1, 0.3, 1.0], 200, 1e-3, None).unwrap();
    let b = evi_check(&s, &k, &mu0, &nu, &[0.1, 0.3, 1.0], 200, 1e-3, None).unwrap();
    let cache = SpectralCache::heat(&s).unwrap();
    for (i, t) in [0.1, 0.3, 1.0].iter().enumerate() {
        let mt = heat_flow_measure(&cache, &s, &mu0, *t).unwrap();
        let w = displacement_geodesic(&s, &mt, &nu, 200).unwrap().transport_cost();
        assert!(((a.residuals[i] - b.residuals[i]) - big_k * w / 2.0).abs() < 1e-9 * w);
    }
    assert!(b.passed(), "{}", b.min_margin);
}

#[test]
fn flat_convexity_along_ou_translates() {
    // k ≡ 0 is below the true curvature 1, so translates have slack
    let s = ou(201, 5.0);
    let zero = CurvatureField::constant(201, 0.0);
    let (mu0, mu1) = (gaussian(&s, -0.8, 0.7), gaussian(&s, 0.7, 0.7));
    let plan = displacement_geodesic(&s, &mu0, &mu1, 200).unwrap();
    let (margin, slope) = ent_slope_check(&s, &zero, &plan, 1e-3).unwrap();
    assert!(margin >= -slope.residual - 1e-6, "{margin}");
    let r = pathwise_convexity_check(&s, &zero, &plan, &[0.25, 0.5, 0.75], 1e-3).unwrap();
    assert!(r.passed(), "{}", r.min_margin);
}

#[test]
fn tilting_the_flat_interval_gives_the_ou_space() {
    let n = 101;
    let flat = DiscreteSpace::interval(n, 5.0, |_| 0.0).unwrap();
    let zero = CurvatureField::constant(n, 0.0);
    assert!(be_scan(&flat, &zero, &FunctionFamily::LowEigenfunctions { count: 5 }, None).unwrap().passed());
    let (tilted, k) = change_of_measure(&flat, &zero, &|c: &[f64]| 0.5 * c[0] * c[0], &CurvatureField::constant(n, 1.0)).unwrap();
    let direct = ou(n, 5.0);
    for (a, b) in tilted.measure().iter().zip(direct.measure()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((tilted.laplacian() - direct.laplacian()).amax() < 1e-9 * direct.laplacian().amax());
    let fam = FunctionFamily::RandomSmooth {
        count: 10,
        mollify_time: 0.01,
        seed: 1,
    };
    assert!(be_scan(&tilted, &k, &fam, None).unwrap().passed());
}

#[test]
fn coupled_finite_dimensional_laws_project_to_the_single_chain() {
    let s = ou(6, 2.0);
    let delta = 0.0625;
    let q = CoupledKernel::build(&s, 1.0, delta, 1e-3).unwrap();
    let alpha = CouplingPlan::new(6, 6, vec![(0, 5, 0.6), (2, 2, 0.4)]);
    let times = [0.125, 0.375];
    let fdd = finite_dim_distribution(&q, &alpha, &times, 1 << 22).unwrap();
    let first = fdd.project(0);
    let cache = SpectralCache::heat(&s).unwrap();
    // process time t is semigroup time t/2
    let k1 = markov_kernel(&cache, times[0] / 2.0).unwrap();
    let k2 = markov_kernel(&cache, (times[1] - times[0]) / 2.0).unwrap();
    let alpha1 = alpha.source_marginal();
    for a in 0..6 {
        for b in 0..6 {
            let exact: f64 = (0..6).map(|x| alpha1[x] * k1[(x, a)] * k2[(a, b)]).sum();
            let got = first.get(&vec![a, b]).copied().unwrap_or(0.0);
            assert!((got - exact).abs() < 1e-10, "({a},{b}): {got} vs {exact}");
        }
    }
    // a single time is α integrated against the composed kernel
    let single = finite_dim_distribution(&q, &alpha, &[0.25], 1 << 22).unwrap();
    let composed = q.compose(2, 100).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let exact: f64 = alpha
                .atoms()
                .iter()
                .map(|&(x, y, w)| w * composed.joint(x, y)[(i, j)])
                .sum();
            let got = single.table.get(&vec![i * 6 + j]).copied().unwrap_or(0.0);
            assert!((got - exact).abs() < 1e-12);
        }
    }
}
