//! Heat and Schrödinger semigroups on a finite space.
//!
//! The generator `A = Δ - 2 diag(k)` is self-adjoint in `L²(m)`, so
//! `S = M^{1/2} A M^{-1/2}` is symmetric and `e^{tA}` is evaluated from one
//! dense symmetric eigendecomposition of `S`. Caching the decomposition makes
//! sweeps over many times cheap and keeps `T_t` exactly `m`-symmetric.

mod feynman_kac;

pub use feynman_kac::{feynman_kac_mc, sample_path, FeynmanKacEstimate, PathSample};

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, LabError, Result};
use crate::space::{CurvatureField, DiscreteSpace, ProbMeasure};

/// Eigendecomposition of `Δ - 2k` in the symmetric frame.
#[derive(Clone, Debug)]
pub struct SpectralCache {
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors of the symmetrised generator (columns).
    vectors: DMatrix<f64>,
    sqrt_m: DVector<f64>,
}

impl SpectralCache {
    /// Cache for the heat semigroup `e^{tΔ}`.
    pub fn heat(space: &DiscreteSpace) -> Result<Self> {
        Self::build(space, None)
    }

    /// Cache for the Schrödinger semigroup `e^{t(Δ - 2k)}`.
    pub fn schrodinger(space: &DiscreteSpace, k: &CurvatureField) -> Result<Self> {
        k.check_len(space)?;
        Self::build(space, Some(k.values()))
    }

    fn build(space: &DiscreteSpace, k: Option<&[f64]>) -> Result<Self> {
        let n = space.len();
        let m = space.measure();
        let sqrt_m = DVector::from_iterator(n, m.iter().map(|v| v.sqrt()));
        let mut sym = DMatrix::zeros(n, n);
        for x in 0..n {
            let mut diag = 0.0;
            for &(y, w) in space.neighbors(x) {
                sym[(x, y)] = w / (sqrt_m[x] * sqrt_m[y]);
                diag += w / m[x];
            }
            sym[(x, x)] = -diag - k.map_or(0.0, |k| 2.0 * k[x]);
        }
        let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 0)
            .ok_or_else(|| LabError::Numeric("symmetric eigensolver did not converge".into()))?;
        let cache = Self {
            eigenvalues: eig.eigenvalues,
            vectors: eig.eigenvectors,
            sqrt_m,
        };
        let scale = sym.norm().max(1.0);
        let err = (cache.symmetric_matrix(|l| l) - &sym).norm();
        if !(err <= 1e-9 * scale) {
            return Err(LabError::Numeric(format!(
                "eigendecomposition reconstruction error {err:.3e} exceeds tolerance"
            )));
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues of the generator, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `L²(m)`-orthonormal eigenfunctions as `(eigenvalue, φ)`, with the
    /// eigenvalues in descending order (the constant comes first for `Δ`).
    pub fn eigenpairs(&self) -> Vec<(f64, Vec<f64>)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.eigenvalues[b].total_cmp(&self.eigenvalues[a]));
        idx.into_iter()
            .map(|i| {
                let phi = (0..self.len())
                    .map(|x| self.vectors[(x, i)] / self.sqrt_m[x])
                    .collect();
                (self.eigenvalues[i], phi)
            })
            .collect()
    }

    /// Spectral gap `-λ₂` of the heat generator.
    pub fn gap(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev.len() < 2 {
            return 0.0;
        }
        -ev[ev.len() - 2]
    }

    /// `U f(Λ) Uᵀ` in the symmetric frame.
    pub(crate) fn symmetric_matrix(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.len(), self.len(), |i, j| {
            self.vectors[(i, j)] * f(self.eigenvalues[j])
        });
        scaled * self.vectors.transpose()
    }

    /// `e^{tA}` as a matrix acting on functions.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        let sym = self.symmetric_matrix(|l| (l * t).exp());
        let n = self.len();
        Ok(DMatrix::from_fn(n, n, |x, y| sym[(x, y)] * self.sqrt_m[y] / self.sqrt_m[x]))
    }

    /// `e^{tA} u`; `t = 0` returns `u` unchanged.
    pub fn apply(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        if u.len() != self.len() {
            return Err(invalid(format!("function has {} values for {} sites", u.len(), self.len())));
        }
        if t == 0.0 {
            return Ok(u.to_vec());
        }
        let v = DVector::from_iterator(self.len(), u.iter().zip(self.sqrt_m.iter()).map(|(a, s)| a * s));
        let mut coeff = self.vectors.tr_mul(&v);
        for (c, l) in coeff.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= (l * t).exp();
        }
        let out = &self.vectors * coeff;
        Ok(out.iter().zip(self.sqrt_m.iter()).map(|(a, s)| a / s).collect())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("semigroup time must be finite and ≥ 0, got {t}")));
    }
    Ok(())
}

/// `T_t u = e^{tΔ} u`.
pub fn heat_apply(space: &DiscreteSpace, u: &[f64], t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    SpectralCache::heat(space)?.apply(u, t)
}

/// `P_t μ`, whose density is `T_t ρ`.
pub fn heat_flow_measure(cache: &SpectralCache, space: &DiscreteSpace, mu: &ProbMeasure, t: f64) -> Result<ProbMeasure> {
    let rho = cache.apply(mu.density(), t)?;
    // Tiny negative values are eigensolver roundoff in far tails.
    let rho: Vec<f64> = rho.into_iter().map(|r| r.max(0.0)).collect();
    let mass = space.integrate(&rho);
    ProbMeasure::from_density(space, rho.into_iter().map(|r| r / mass).collect())
}

/// Transition probabilities `p_t(x, ·) = P_t δ_x` as rows of mass vectors.
/// Entries are clamped at zero against roundoff and rows renormalised.
pub fn markov_kernel(cache: &SpectralCache, t: f64) -> Result<DMatrix<f64>> {
    let mut p = cache.propagator(t)?;
    for mut row in p.row_iter_mut() {
        row.iter_mut().for_each(|v| *v = v.max(0.0));
        let s = row.sum();
        row /= s;
    }
    Ok(p)
}

/// `T^{2k}_t u = e^{t(Δ - 2k)} u`.
pub fn schrodinger_apply(space: &DiscreteSpace, k: &CurvatureField, u: &[f64], t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    SpectralCache::schrodinger(space, k)?.apply(u, t)
}

/// `L²(m)` operator norm of
/// `T_t - T^{2k}_t - ∫₀ᵗ T_r (2k) T^{2k}_{t-r} dr` with composite Simpson
/// quadrature on `nodes` subintervals (rounded up to even).
pub fn duhamel_residual(space: &DiscreteSpace, k: &CurvatureField, t: f64, nodes: usize) -> Result<f64> {
    check_time(t)?;
    if nodes < 2 {
        return Err(invalid("Duhamel quadrature needs at least 2 nodes"));
    }
    let heat = SpectralCache::heat(space)?;
    let schr = SpectralCache::schrodinger(space, k)?;
    let intervals = nodes + nodes % 2;
    let dr = t / intervals as f64;
    let two_k = DMatrix::from_diagonal(&DVector::from_iterator(
        space.len(),
        k.values().iter().map(|v| 2.0 * v),
    ));
    let mut integral = DMatrix::zeros(space.len(), space.len());
    for i in 0..=intervals {
        let r = i as f64 * dr;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let left = heat.symmetric_matrix(|l| (l * r).exp());
        let right = schr.symmetric_matrix(|l| (l * (t - r)).exp());
        integral += (left * &two_k * right) * (w * dr / 3.0);
    }
    let lhs = heat.symmetric_matrix(|l| (l * t).exp()) - schr.symmetric_matrix(|l| (l * t).exp());
    let diff = lhs - integral;
    Ok(diff.singular_values().max())
}

/// Writes `(site, t, value)` rows of `T_t u` for every requested time.
pub fn write_sweep(cache: &SpectralCache, u: &[f64], times: &[f64], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["site", "t", "value"])?;
    for &t in times {
        for (x, v) in cache.apply(u, t)?.iter().enumerate() {
            w.write_record([x.to_string(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> DiscreteSpace {
        // unit weights and equal masses 1/2: the weight is stored relative to m
        DiscreteSpace::graph(2, &[(0, 1, 1.0, 0.5)], None).unwrap()
    }

    #[test]
    fn two_site_closed_form() {
        let s = two_point();
        let cache = SpectralCache::heat(&s).unwrap();
        let lambda = 2.0; // Δ = [[-1, 1], [1, -1]]
        assert_abs_diff_eq!(cache.gap(), lambda, epsilon = 1e-14);
        for &t in &[0.1, 0.7, 3.0] {
            let v = cache.apply(&[1.0, 0.0], t).unwrap();
            let e = (-lambda * t).exp();
            assert_abs_diff_eq!(v[0], 0.5 * (1.0 + e), epsilon = 1e-14);
            assert_abs_diff_eq!(v[1], 0.5 * (1.0 - e), epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_time_is_identity_and_negative_time_fails() {
        let s = DiscreteSpace::interval(9, 1.0, |x| x).unwrap();
        let u: Vec<f64> = (0..9).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(heat_apply(&s, &u, 0.0).unwrap(), u);
        assert!(heat_apply(&s, &u, -0.1).is_err());
        let c = SpectralCache::heat(&s).unwrap();
        assert!(markov_kernel(&c, -1.0).is_err());
    }

    #[test]
    fn constant_eigenvector_and_nonpositive_spectrum() {
        let s = DiscreteSpace::circle(16, 1.0, f64::cos).unwrap();
        let c = SpectralCache::heat(&s).unwrap();
        let pairs = c.eigenpairs();
        assert_abs_diff_eq!(pairs[0].0, 0.0, epsilon = 1e-10);
        let phi0 = &pairs[0].1;
        assert!(phi0.iter().all(|v| (v.abs() - 1.0).abs() < 1e-10));
        assert!(c.eigenvalues().iter().all(|&l| l <= 1e-10));
    }

    #[test]
    fn constant_potential_scales() {
        let s = DiscreteSpace::interval(15, 2.0, |x| 0.5 * x * x).unwrap();
        let u: Vec<f64> = (0..15).map(|i| (i as f64 * 0.4).cos()).collect();
        let k = CurvatureField::constant(15, 0.7);
        let a = schrodinger_apply(&s, &k, &u, 0.3).unwrap();
        let b = heat_apply(&s, &u, 0.3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, y * (-2.0 * 0.7 * 0.3f64).exp(), epsilon = 1e-12);
        }
        let zero = CurvatureField::constant(15, 0.0);
        let a = schrodinger_apply(&s, &zero, &u, 0.3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-13);
        }
    }

    #[test]
    fn schrodinger_matches_runge_kutta() {
        let s = two_point();
        let k = CurvatureField::new(vec![0.0, 1.0]).unwrap();
        let got = schrodinger_apply(&s, &k, &[1.0, -0.5], 0.3).unwrap();
        // classical RK4 on du/dt = (Δ - 2k) u
        let f = |u: [f64; 2]| [u[1] - u[0], u[0] - u[1] - 2.0 * u[1]];
        let mut u = [1.0, -0.5];
        let steps = 20_000;
        let h = 0.3 / steps as f64;
        for _ in 0..steps {
            let k1 = f(u);
            let k2 = f([u[0] + 0.5 * h * k1[0], u[1] + 0.5 * h * k1[1]]);
            let k3 = f([u[0] + 0.5 * h * k2[0], u[1] + 0.5 * h * k2[1]]);
            let k4 = f([u[0] + h * k3[0], u[1] + h * k3[1]]);
            for i in 0..2 {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        assert_abs_diff_eq!(got[0], u[0], epsilon = 1e-9);
        assert_abs_diff_eq!(got[1], u[1], epsilon = 1e-9);
    }

    #[test]
    fn markov_kernel_rows_and_detailed_balance() {
        let s = DiscreteSpace::interval(25, 2.0, |x| x.powi(4) / 4.0 - x * x / 2.0).unwrap();
        let c = SpectralCache::heat(&s).unwrap();
        let id = markov_kernel(&c, 0.0).unwrap();
        assert!((id - DMatrix::identity(25, 25)).abs().max() < 1e-12);
        let p = markov_kernel(&c, 0.2).unwrap();
        let m = s.measure();
        for x in 0..25 {
            assert_abs_diff_eq!(p.row(x).sum(), 1.0, epsilon = 1e-12);
            for y in 0..25 {
                assert!(p[(x, y)] > 0.0);
                assert_abs_diff_eq!(m[x] * p[(x, y)], m[y] * p[(y, x)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn duhamel_constant_and_zero_potential() {
        let s = DiscreteSpace::interval(21, 4.0, |x| 0.5 * x * x).unwrap();
        let zero = CurvatureField::constant(21, 0.0);
        assert!(duhamel_residual(&s, &zero, 0.5, 64).unwrap() < 1e-13);
        let k = CurvatureField::constant(21, 0.8);
        assert!(duhamel_residual(&s, &k, 0.5, 64).unwrap() < 1e-8);
    }

    #[test]
    fn sweep_csv_has_one_row_per_site_and_time() {
        let s = DiscreteSpace::interval(5, 1.0, |_| 0.0).unwrap();
        let c = SpectralCache::heat(&s).unwrap();
        let mut buf = Vec::new();
        write_sweep(&c, &[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.1], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("site,t,value"));
    }
}
