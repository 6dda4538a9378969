//! Displacement interpolation between two measures.
//!
//! Interval spaces use the histogram model: a measure is the cell-uniform
//! density that puts mass `μ({x_i})` uniformly on `[x_i - h/2, x_i + h/2]`.
//! Its quantile function is piecewise linear, so the optimal map between two
//! such measures moves each piece of the monotone coupling as a uniformly
//! loaded segment whose endpoints travel at constant speed. Evaluating the
//! interpolation integrates those segments back into cells, which keeps the
//! entropy of `μ_t` accurate to the grid. Each atom also carries its centre
//! path rounded to sites.
//!
//! Circle and product spaces use the point-mass optimal plan; each atom is a
//! site-to-site geodesic rounded to the grid.

use serde::{Deserialize, Serialize};

use super::{monotone_pieces, wasserstein_p_masses};
use crate::error::{invalid, LabError, Result};
use crate::space::{CurvatureField, DiscreteSpace, ProbMeasure, SpaceKind};

/// Endpoints of a uniformly loaded segment at `s = 0` and `s = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Segment {
    pub fn at(&self, t: f64) -> [f64; 2] {
        [
            (1.0 - t) * self.start[0] + t * self.end[0],
            (1.0 - t) * self.start[1] + t * self.end[1],
        ]
    }
}

/// One weighted path of a geodesic plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicAtom {
    pub weight: f64,
    pub from: usize,
    pub to: usize,
    /// Sites at `s = j/S`, `j = 0..=S`.
    pub path: Vec<usize>,
    /// Root-mean-square speed `|γ̇|`; the distance `d(from, to)` for site atoms.
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<Segment>,
}

/// Weighted family of discrete geodesics `Θ` with `μ_t = (e_t)_* Θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPlan {
    resolution: usize,
    atoms: Vec<GeodesicAtom>,
    /// `(left edge of cell 0, cell width, number of cells)` for histogram plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cells: Option<(f64, f64, usize)>,
}

impl GeodesicPlan {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn atoms(&self) -> &[GeodesicAtom] {
        &self.atoms
    }

    /// `Σ θ |γ̇|²`, the squared `W₂` distance realised by this plan.
    pub fn transport_cost(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.speed * a.speed).sum()
    }

    /// Cells occupied by atom `idx` at time `t` with the fraction of the
    /// atom's mass in each.
    pub fn atom_cells(&self, space: &DiscreteSpace, idx: usize, t: f64) -> Vec<(usize, f64)> {
        let atom = &self.atoms[idx];
        match (atom.segment, self.cells) {
            (Some(seg), Some((left, h, n))) => {
                let [lo, hi] = seg.at(t);
                let width = hi - lo;
                let cell = |x: f64| (((x - left) / h).floor().max(0.0) as usize).min(n - 1);
                let (c0, c1) = (cell(lo), cell(hi));
                if c0 == c1 || width <= 0.0 {
                    return vec![(c0, 1.0)];
                }
                let mut out = Vec::with_capacity(c1 - c0 + 1);
                for c in c0..=c1 {
                    let a = if c == c0 { lo } else { left + c as f64 * h };
                    let b = if c == c1 { hi } else { left + (c + 1) as f64 * h };
                    if b > a {
                        out.push((c, (b - a) / width));
                    }
                }
                out
            }
            _ => vec![(interpolate_site(space, atom.from, atom.to, t), 1.0)],
        }
    }

    /// Masses of `(e_t)_* Θ` on the sites.
    pub fn evaluate_masses(&self, space: &DiscreteSpace, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; space.len()];
        for idx in 0..self.atoms.len() {
            let w = self.atoms[idx].weight;
            for (c, f) in self.atom_cells(space, idx, t) {
                out[c] += w * f;
            }
        }
        out
    }

    /// `(e_t)_* Θ` as a probability measure.
    pub fn evaluate(&self, space: &DiscreteSpace, t: f64) -> Result<ProbMeasure> {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(format!("evaluation time {t} outside [0, 1]")));
        }
        ProbMeasure::normalized(space, &self.evaluate_masses(space, t))
    }

    /// `Σ θ |γ̇|² Σ_j w_j k(γ(s_j))` for a weight vector over the s-grid.
    pub(crate) fn weighted_path_integral(&self, k: &CurvatureField, weights: &[f64]) -> Result<f64> {
        self.atoms
            .iter()
            .map(|a| {
                let inner = a
                    .path
                    .iter()
                    .zip(weights)
                    .map(|(&x, w)| {
                        k.values().get(x).map(|kx| w * kx).ok_or_else(|| {
                            invalid(format!("curvature field has no value at site {x}"))
                        })
                    })
                    .sum::<Result<f64>>()?;
                Ok(a.weight * a.speed * a.speed * inner)
            })
            .sum()
    }

    /// Per-atom version of [`Self::weighted_path_integral`].
    pub(crate) fn atom_path_integral(&self, idx: usize, k: &CurvatureField, weights: &[f64]) -> f64 {
        let a = &self.atoms[idx];
        let inner: f64 = a.path.iter().zip(weights).map(|(&x, w)| w * k.values()[x]).sum();
        a.speed * a.speed * inner
    }

    pub(crate) fn from_atoms(resolution: usize, atoms: Vec<GeodesicAtom>) -> Self {
        Self {
            resolution,
            atoms,
            cells: None,
        }
    }
}

/// Grid site on the geodesic from `x` to `y` at fraction `t`.
fn interpolate_site(space: &DiscreteSpace, x: usize, y: usize, t: f64) -> usize {
    match space.kind() {
        SpaceKind::Circle { .. } => {
            let n = space.len() as i64;
            let mut k = (y as i64 - x as i64).rem_euclid(n);
            if 2 * k > n {
                k -= n;
            }
            (x as i64 + (t * k as f64).round() as i64).rem_euclid(n) as usize
        }
        SpaceKind::Product { factors } => {
            let (px, py) = (space.factor_indices(x), space.factor_indices(y));
            let parts: Vec<usize> = factors
                .iter()
                .zip(px.iter().zip(&py))
                .map(|(f, (&a, &b))| interpolate_site(f, a, b, t))
                .collect();
            space.product_index(&parts)
        }
        _ => {
            let (a, b) = (x as f64, y as f64);
            (a + t * (b - a)).round() as usize
        }
    }
}

/// Optimal displacement interpolation between `μ0` and `μ1` with paths
/// sampled at `S + 1` parameter values.
pub fn displacement_geodesic(
    space: &DiscreteSpace,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    resolution: usize,
) -> Result<GeodesicPlan> {
    displacement_geodesic_masses(space, &mu0.masses(space), &mu1.masses(space), resolution)
}

pub(crate) fn displacement_geodesic_masses(
    space: &DiscreteSpace,
    a: &[f64],
    b: &[f64],
    resolution: usize,
) -> Result<GeodesicPlan> {
    if resolution == 0 {
        return Err(invalid("geodesic resolution must be at least 1"));
    }
    match space.kind() {
        SpaceKind::Interval { .. } => Ok(histogram_geodesic(space, a, b, resolution)),
        SpaceKind::Circle { .. } | SpaceKind::Product { .. } => {
            if let SpaceKind::Product { factors } = space.kind() {
                if factors.iter().any(|f| matches!(f.kind(), SpaceKind::Graph)) {
                    return Err(LabError::UnsupportedGeometry(
                        "geodesics on products with graph factors".into(),
                    ));
                }
            }
            let (_, plan) = wasserstein_p_masses(space, a, b, 2.0)?;
            let atoms = plan
                .atoms()
                .iter()
                .map(|&(x, y, q)| GeodesicAtom {
                    weight: q,
                    from: x,
                    to: y,
                    path: (0..=resolution)
                        .map(|j| interpolate_site(space, x, y, j as f64 / resolution as f64))
                        .collect(),
                    speed: space.distance(x, y),
                    segment: None,
                })
                .collect();
            Ok(GeodesicPlan::from_atoms(resolution, atoms))
        }
        SpaceKind::Graph => Err(LabError::UnsupportedGeometry(
            "displacement geodesics need an interval, circle or product space".into(),
        )),
    }
}

fn histogram_geodesic(space: &DiscreteSpace, a: &[f64], b: &[f64], resolution: usize) -> GeodesicPlan {
    let n = space.len();
    let h = space.mesh();
    let x0 = space.line_coord(0).expect("interval space");
    let left = x0 - 0.5 * h;
    let site_of = |x: f64| (((x - x0) / h).round().max(0.0) as usize).min(n - 1);
    let atoms = monotone_pieces(a, b)
        .into_iter()
        .map(|pc| {
            let ea = left + pc.i as f64 * h;
            let eb = left + pc.j as f64 * h;
            let pos = |edge: f64, base: f64, mass: f64, u: f64| {
                if mass > 0.0 {
                    edge + ((u - base) / mass).clamp(0.0, 1.0) * h
                } else {
                    edge + 0.5 * h
                }
            };
            let start = [
                pos(ea, pc.base_a, a[pc.i], pc.lo),
                pos(ea, pc.base_a, a[pc.i], pc.hi),
            ];
            let end = [
                pos(eb, pc.base_b, b[pc.j], pc.lo),
                pos(eb, pc.base_b, b[pc.j], pc.hi),
            ];
            let (d0, d1) = (end[0] - start[0], end[1] - start[1]);
            let speed = ((d0 * d0 + d0 * d1 + d1 * d1) / 3.0).sqrt();
            let (c0, c1) = (0.5 * (start[0] + start[1]), 0.5 * (end[0] + end[1]));
            GeodesicAtom {
                weight: pc.hi - pc.lo,
                from: pc.i,
                to: pc.j,
                path: (0..=resolution)
                    .map(|j| {
                        let s = j as f64 / resolution as f64;
                        site_of((1.0 - s) * c0 + s * c1)
                    })
                    .collect(),
                speed,
                segment: Some(Segment { start, end }),
            }
        })
        .collect();
    GeodesicPlan {
        resolution,
        atoms,
        cells: Some((left, h, n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_geodesic() {
        let s = DiscreteSpace::interval(31, 2.0, |x| x * x).unwrap();
        let w: Vec<f64> = (0..31).map(|i| 1.0 + (i as f64 * 0.7).sin().abs()).collect();
        let mu = ProbMeasure::normalized(&s, &w).unwrap();
        let plan = displacement_geodesic(&s, &mu, &mu, 20).unwrap();
        for &t in &[0.0, 0.3, 0.77, 1.0] {
            let mt = plan.evaluate_masses(&s, t);
            for (x, y) in mt.iter().zip(mu.masses(&s)) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
            }
        }
        assert!(plan.transport_cost() < 1e-28);
    }

    #[test]
    fn point_masses_march_monotonically() {
        let s = DiscreteSpace::interval(21, 1.0, |_| 0.0).unwrap();
        let plan =
            displacement_geodesic(&s, &ProbMeasure::dirac(&s, 3), &ProbMeasure::dirac(&s, 15), 50)
                .unwrap();
        assert_eq!(plan.atoms().len(), 1);
        let path = &plan.atoms()[0].path;
        assert_eq!((path[0], path[50]), (3, 15));
        assert!(path.windows(2).all(|w| w[1] >= w[0]));
        assert_abs_diff_eq!(plan.atoms()[0].speed, s.distance(3, 15), epsilon = 1e-12);
    }

    #[test]
    fn circle_paths_take_the_short_way() {
        let s = DiscreteSpace::circle(12, 1.0, |_| 0.0).unwrap();
        let plan =
            displacement_geodesic(&s, &ProbMeasure::dirac(&s, 1), &ProbMeasure::dirac(&s, 10), 6)
                .unwrap();
        let path = &plan.atoms()[0].path;
        assert_eq!(path, &vec![1, 0, 0, 11, 11, 10, 10]);
    }

    #[test]
    fn graph_spaces_are_unsupported() {
        let g = DiscreteSpace::graph(2, &[(0, 1, 1.0, 1.0)], None).unwrap();
        let mu = ProbMeasure::uniform(&g);
        assert!(matches!(
            displacement_geodesic(&g, &mu, &mu, 4),
            Err(LabError::UnsupportedGeometry(_))
        ));
    }
}
