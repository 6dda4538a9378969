//! The experiment catalog and the config schema shown by `--help`.

/// Experiment names in sorted order, paired with a one-line summary.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("be", "Bochner inequality with variable k over a test-function family"),
    ("cd", "entropy convexity along a displacement geodesic, Green-weighted k"),
    ("change-of-measure", "tilt the measure by e^{-V} and check curvature k + λ"),
    ("contraction-wp", "W_p contraction of the heat flow over random measure pairs"),
    ("couple", "pathwise-contracting coupled walks from the dyadic kernel"),
    ("duhamel", "Duhamel identity between the heat and Schrödinger semigroups"),
    ("evi", "evolution-variation inequality along the heat flow"),
    ("feynman-kac", "Monte Carlo Feynman-Kac against the spectral Schrödinger semigroup"),
    ("grad", "gradient estimate Γ(T_t u) ≤ T^{2k}_t Γ(u)"),
    ("pathwise", "per-atom entropy convexity along a geodesic plan"),
    ("refine-study", "Bochner margins under mesh refinement"),
    ("tensor", "Bochner inequality on a product with the tensorized curvature"),
];

pub const CONFIG_HELP: &str = r#"CONFIG
  One JSON object; unknown keys are rejected at every level.
    experiment  name from the catalog below
    space       {"kind": "interval", "n": 101, "L": 5.0, "potential": {"name": "quadratic", "params": {"a": 1.0}}}
                kinds: interval (L), circle (R), product (factors), graph (n, edges [i, j, length, weight], measure)
                potentials: quadratic {a, center}, double_well {a, b}, cosine {a}, table {lo, hi, values}
    k           curvature field: {"constant": c} | {"values": [...]} | {"potential_hessian": {"shift": c}}
                (default {"constant": 0})
    seed        run seed, default 0; --seed overrides it
    out         output directory, default "ricci-lab-out"; --out overrides it
    params      experiment parameters, all optional; defaults are recorded in report.json

  Shared parameter types:
    family      {"family": "random_smooth", "count": 16, "mollify_time": 0.01, "seed": 0}
                | {"family": "low_eigenfunctions", "count": 5} | {"family": "polynomial", "degree": 3}
                random families draw from the run seed plus their own seed offset
    measure     {"gaussian": {"center": c, "width": w}} | {"masses": [...]} | "uniform" | {"dirac": site}
    function    {"eigenfunction": j} | {"values": [...]} | {"coordinate_power": d}

EXPERIMENTS
  be
    params: family, tolerance (default 10 h²)
  cd
    params: mu0, mu1 (measures), times (default 0.1..0.9), resolution (200), geo_coeff
  change-of-measure
    uses k as the curvature of the untilted space
    params: potential (default quadratic a=1), lambda (curvature spec, default {"constant": 1}),
            family, tolerance, paths ([[i, j], ...], intervals only), convexity_tolerance
  contraction-wp
    params: rate (default min k), pairs (4), bumps {center_range, width_range, weight_range, max_bumps},
            times ([0.1, 0.5, 1]), exponents ([1, 2, "inf"]), tolerance (relative, default 1e-3)
  couple
    params: rate (default min k), step (2^-6), epsilon (1e-3), horizon (process time, 0.5),
            n_paths (256), start ([x, y], default the two end sites), pair_cap (2500),
            marginal_tolerance (1e-10)
  duhamel
    params: times ([0.1, 0.5, 1]), nodes (64), tolerance (1e-8)
  evi
    params: mu0, nu (measures), times ([0.05, 0.1, 0.3, 1]), resolution (200), eta (1e-3), geo_coeff
  feynman-kac
    params: function (default {"eigenfunction": 1}), t (0.2), n_paths (2000), z (4 standard errors)
  grad
    params: family, times ([0.01, 0.1, 0.5]), tolerance (default 5e-3 relative)
  pathwise
    params: mu0, mu1 (measures), times (0.1..0.9), resolution (200), tolerance (1e-3)
  refine-study
    space must be an interval or circle; its n is replaced by each level
    params: levels ([51, 101, 201]), family (default low_eigenfunctions 5), tolerance
  tensor
    space must be a product; the top-level k is rejected
    params: k_factors (one curvature spec per factor, default {"constant": 0}), family, tolerance

OUTPUT
  report.json, margins.csv (check, margin, tolerance) and plotdata/.
  Exit codes: 0 all checks pass, 1 some check fails, 2 input or config error, 3 internal numeric error.
  RICCI_LAB_THREADS sets the worker count."#;
