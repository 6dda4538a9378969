//! Finite metric measure spaces.
//!
//! A [`DiscreteSpace`] is a finite set of sites with a metric, a strictly
//! positive reference measure of total mass one and a symmetric edge-weight
//! matrix. The edge weights define the Dirichlet form
//!
//! ```text
//! E(u) = ½ Σ_{x,y} w(x,y) (u(y) - u(x))²
//! ```
//!
//! whose generator is the Laplacian `(Δu)(x) = (1/m(x)) Σ_y w(x,y)(u(y)-u(x))`.
//! One-dimensional spaces use midpoint-weighted finite differences, which are
//! second-order accurate and exactly self-adjoint in `L²(m)`.

mod measure;
mod potential;
mod spec;

pub use measure::{CurvatureField, ProbMeasure, DENSITY_FLOOR};
pub use potential::Potential;
pub use spec::{GraphEdgeSpec, PotentialSpec, SpaceSpec};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A labeled site with its coordinates (dimensionless).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub label: String,
    pub coords: Vec<f64>,
}

/// Geometry tag of a space. Products keep their factors so that geodesics and
/// curvature fields can be handled factor by factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Interval { half_width: f64 },
    Circle { radius: f64 },
    Product { factors: Vec<DiscreteSpace> },
    Graph,
}

/// Finite surrogate of a metric measure space `(X, d, m)` with a Dirichlet form.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "SpaceDocument", try_from = "SpaceDocument")]
pub struct DiscreteSpace {
    kind: SpaceKind,
    sites: Vec<Site>,
    metric: DMatrix<f64>,
    measure: Vec<f64>,
    weights: DMatrix<f64>,
    mesh: f64,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl DiscreteSpace {
    fn assemble(
        kind: SpaceKind,
        sites: Vec<Site>,
        metric: DMatrix<f64>,
        measure: Vec<f64>,
        weights: DMatrix<f64>,
        mesh: f64,
    ) -> Self {
        let n = measure.len();
        let neighbors = (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| y != x && weights[(x, y)] > 0.0)
                    .map(|y| (y, weights[(x, y)]))
                    .collect()
            })
            .collect();
        Self {
            kind,
            sites,
            metric,
            measure,
            weights,
            mesh,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.metric[(x, y)]
    }

    /// Reference measure `m`, a probability vector with full support.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Nonzero edge weights of `x` as `(neighbor, w(x, y))`, in index order.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.neighbors[x]
    }

    /// Grid spacing `h` of one-dimensional spaces, the largest factor spacing
    /// of products and the shortest edge length of graphs.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn diameter(&self) -> f64 {
        self.metric.iter().cloned().fold(0.0, f64::max)
    }

    /// Coordinate of site `i` on the line, for interval spaces.
    pub fn line_coord(&self, i: usize) -> Option<f64> {
        match self.kind {
            SpaceKind::Interval { .. } => Some(self.sites[i].coords[0]),
            _ => None,
        }
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.kind, SpaceKind::Interval { .. })
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, SpaceKind::Circle { .. })
    }

    pub fn factors(&self) -> Option<&[DiscreteSpace]> {
        match &self.kind {
            SpaceKind::Product { factors } => Some(factors),
            _ => None,
        }
    }

    /// Midpoint of the edge `x`–`y` in coordinates; on the circle the
    /// midpoint of the shorter arc.
    pub fn edge_midpoint(&self, x: usize, y: usize) -> Vec<f64> {
        let (a, b) = (&self.sites[x].coords, &self.sites[y].coords);
        match &self.kind {
            SpaceKind::Circle { .. } => {
                let (ta, tb) = (a[0], b[0]);
                let mut diff = tb - ta;
                if diff > PI {
                    diff -= 2.0 * PI;
                } else if diff < -PI {
                    diff += 2.0 * PI;
                }
                vec![(ta + 0.5 * diff).rem_euclid(2.0 * PI)]
            }
            SpaceKind::Product { factors } => {
                // Edges only move one factor; midpoint is taken factor by factor.
                let idx_a = self.factor_indices(x);
                let idx_b = self.factor_indices(y);
                factors
                    .iter()
                    .zip(idx_a.iter().zip(idx_b.iter()))
                    .flat_map(|(f, (&i, &j))| {
                        if i == j {
                            f.sites[i].coords.clone()
                        } else {
                            f.edge_midpoint(i, j)
                        }
                    })
                    .collect()
            }
            _ => a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect(),
        }
    }

    /// Factor site indices of a product site (row-major, last factor fastest).
    pub fn factor_indices(&self, x: usize) -> Vec<usize> {
        match &self.kind {
            SpaceKind::Product { factors } => {
                let mut rest = x;
                let mut out = vec![0; factors.len()];
                for (slot, f) in out.iter_mut().zip(factors.iter()).rev() {
                    *slot = rest % f.len();
                    rest /= f.len();
                }
                out
            }
            _ => vec![x],
        }
    }

    /// Inverse of [`Self::factor_indices`].
    pub fn product_index(&self, parts: &[usize]) -> usize {
        match &self.kind {
            SpaceKind::Product { factors } => factors
                .iter()
                .zip(parts)
                .fold(0, |acc, (f, &i)| acc * f.len() + i),
            _ => parts[0],
        }
    }

    /// Integral of `f` against the reference measure.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.measure.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    /// Checks every structural invariant, including the exhaustive triangle
    /// inequality scan (cubic in the number of sites).
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.metric.nrows() != n || self.weights.nrows() != n || self.sites.len() != n {
            return Err(invalid("inconsistent space dimensions"));
        }
        for x in 0..n {
            if !(self.measure[x] > 0.0) {
                return Err(invalid(format!("reference measure vanishes at site {x}")));
            }
            if self.metric[(x, x)] != 0.0 || self.weights[(x, x)] != 0.0 {
                return Err(invalid(format!("nonzero diagonal at site {x}")));
            }
            for y in 0..n {
                let d = self.metric[(x, y)];
                if d < 0.0 || d != self.metric[(y, x)] {
                    return Err(invalid(format!("metric not symmetric at ({x}, {y})")));
                }
                let w = self.weights[(x, y)];
                if w < 0.0 || w != self.weights[(y, x)] {
                    return Err(invalid(format!("weights not symmetric at ({x}, {y})")));
                }
            }
        }
        let tol = 1e-12 * self.diameter().max(1.0);
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if self.metric[(x, y)] > self.metric[(x, z)] + self.metric[(z, y)] + tol {
                        return Err(invalid(format!(
                            "triangle inequality fails for ({x}, {y}) via {z}"
                        )));
                    }
                }
            }
        }
        let total: f64 = self.measure.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("reference measure has mass {total}")));
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Builders
    // ------------------------------------------------------------------

    /// Uniform grid on `[-L, L]` with reference measure `∝ e^{-V}` and
    /// midpoint-weighted nearest-neighbour edges.
    pub fn interval(n: usize, half_width: f64, potential: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("interval needs at least 3 sites, got {n}")));
        }
        if !(half_width > 0.0) {
            return Err(invalid(format!("half width must be positive, got {half_width}")));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| -half_width + h * i as f64).collect();
        let raw: Vec<f64> = xs.iter().map(|&x| (-potential(x)).exp() * h).collect();
        let z: f64 = raw.iter().sum();
        let measure = raw.iter().map(|r| r / z).collect();
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let w = (-potential(0.5 * (xs[i] + xs[i + 1]))).exp() / (h * z);
            weights[(i, i + 1)] = w;
            weights[(i + 1, i)] = w;
        }
        let metric = DMatrix::from_fn(n, n, |i, j| (xs[i] - xs[j]).abs());
        let sites = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Site {
                label: format!("x{i}"),
                coords: vec![x],
            })
            .collect();
        Ok(Self::assemble(
            SpaceKind::Interval { half_width },
            sites,
            metric,
            measure,
            weights,
            h,
        ))
    }

    /// `n` equispaced sites on a circle of radius `R` with arc-length metric;
    /// the potential is evaluated at the angle in `[0, 2π)`.
    pub fn circle(n: usize, radius: f64, potential: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("circle needs at least 3 sites, got {n}")));
        }
        if !(radius > 0.0) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        let step = 2.0 * PI / n as f64;
        let h = radius * step;
        let thetas: Vec<f64> = (0..n).map(|i| step * i as f64).collect();
        let raw: Vec<f64> = thetas.iter().map(|&t| (-potential(t)).exp() * h).collect();
        let z: f64 = raw.iter().sum();
        let measure = raw.iter().map(|r| r / z).collect();
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            let mid = thetas[i] + 0.5 * step;
            let w = (-potential(mid.rem_euclid(2.0 * PI))).exp() / (h * z);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        let metric = DMatrix::from_fn(n, n, |i, j| {
            let k = i.abs_diff(j);
            radius * step * k.min(n - k) as f64
        });
        let sites = thetas
            .iter()
            .enumerate()
            .map(|(i, &t)| Site {
                label: format!("θ{i}"),
                coords: vec![t],
            })
            .collect();
        Ok(Self::assemble(
            SpaceKind::Circle { radius },
            sites,
            metric,
            measure,
            weights,
            h,
        ))
    }

    /// Cartesian product with the `ℓ²` product metric, product measure and the
    /// Kronecker-sum Laplacian.
    pub fn product(a: &DiscreteSpace, b: &DiscreteSpace) -> Result<Self> {
        let mut factors = Vec::new();
        for s in [a, b] {
            match &s.kind {
                SpaceKind::Product { factors: inner } => factors.extend(inner.iter().cloned()),
                _ => factors.push(s.clone()),
            }
        }
        let (na, nb) = (a.len(), b.len());
        let n = na * nb;
        let mut sites = Vec::with_capacity(n);
        for i in 0..na {
            for j in 0..nb {
                let mut coords = a.sites[i].coords.clone();
                coords.extend_from_slice(&b.sites[j].coords);
                sites.push(Site {
                    label: format!("({},{})", a.sites[i].label, b.sites[j].label),
                    coords,
                });
            }
        }
        let metric = DMatrix::from_fn(n, n, |p, q| {
            let (i, j) = (p / nb, p % nb);
            let (k, l) = (q / nb, q % nb);
            (a.metric[(i, k)].powi(2) + b.metric[(j, l)].powi(2)).sqrt()
        });
        let measure = (0..n).map(|p| a.measure[p / nb] * b.measure[p % nb]).collect();
        let mut weights = DMatrix::zeros(n, n);
        for p in 0..n {
            let (i, j) = (p / nb, p % nb);
            for &(k, w) in &a.neighbors[i] {
                weights[(p, k * nb + j)] = w * b.measure[j];
            }
            for &(l, w) in &b.neighbors[j] {
                weights[(p, i * nb + l)] = a.measure[i] * w;
            }
        }
        Ok(Self::assemble(
            SpaceKind::Product { factors },
            sites,
            metric,
            measure,
            weights,
            a.mesh.max(b.mesh),
        ))
    }

    /// Weighted graph: edges carry a length (for the metric, closed under
    /// shortest paths) and a Dirichlet weight. `measure` defaults to uniform
    /// and is normalized to mass one.
    pub fn graph(
        n: usize,
        edges: &[(usize, usize, f64, f64)],
        measure: Option<&[f64]>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one site"));
        }
        let mut metric = DMatrix::from_element(n, n, f64::INFINITY);
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            metric[(i, i)] = 0.0;
        }
        let mut mesh = f64::INFINITY;
        for &(i, j, length, weight) in edges {
            if i >= n || j >= n || i == j {
                return Err(invalid(format!("bad edge ({i}, {j})")));
            }
            if !(length > 0.0) || weight < 0.0 {
                return Err(invalid(format!("edge ({i}, {j}) needs length > 0, weight ≥ 0")));
            }
            metric[(i, j)] = metric[(i, j)].min(length);
            metric[(j, i)] = metric[(i, j)];
            weights[(i, j)] += weight;
            weights[(j, i)] = weights[(i, j)];
            mesh = mesh.min(length);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = metric[(i, k)] + metric[(k, j)];
                    if via < metric[(i, j)] {
                        metric[(i, j)] = via;
                    }
                }
            }
        }
        if n > 1 && metric.iter().any(|d| !d.is_finite()) {
            return Err(invalid("graph is disconnected"));
        }
        let raw: Vec<f64> = match measure {
            Some(m) if m.len() == n => m.to_vec(),
            Some(m) => return Err(invalid(format!("measure has {} entries for {n} sites", m.len()))),
            None => vec![1.0; n],
        };
        if raw.iter().any(|&v| !(v > 0.0)) {
            return Err(invalid("graph measure must be strictly positive"));
        }
        let z: f64 = raw.iter().sum();
        let sites = (0..n)
            .map(|i| Site {
                label: format!("v{i}"),
                coords: vec![i as f64],
            })
            .collect();
        Ok(Self::assemble(
            SpaceKind::Graph,
            sites,
            metric,
            raw.iter().map(|v| v / z).collect(),
            weights,
            if mesh.is_finite() { mesh } else { 1.0 },
        ))
    }

    /// Space with an explicit metric (checked), e.g. random point clouds for
    /// transport experiments. Edge weights are optional.
    pub fn from_metric(
        metric: DMatrix<f64>,
        measure: Option<&[f64]>,
        weights: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = metric.nrows();
        if n == 0 || metric.ncols() != n {
            return Err(invalid("metric must be a nonempty square matrix"));
        }
        let raw = measure.map(|m| m.to_vec()).unwrap_or_else(|| vec![1.0; n]);
        let z: f64 = raw.iter().sum();
        let weights = weights.unwrap_or_else(|| DMatrix::zeros(n, n));
        let mesh = metric
            .iter()
            .cloned()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let sites = (0..n)
            .map(|i| Site {
                label: format!("v{i}"),
                coords: vec![i as f64],
            })
            .collect();
        let space = Self::assemble(
            SpaceKind::Graph,
            sites,
            metric,
            raw.iter().map(|v| v / z).collect(),
            weights,
            if mesh.is_finite() { mesh } else { 1.0 },
        );
        space.validate()?;
        Ok(space)
    }

    /// Reweights the space by `e^{-V}`: measure `∝ e^{-V(x)} m(x)` and edge
    /// weights `∝ e^{-V(mid)} w(x,y)` with the same normalizer, which is the
    /// rule the one-dimensional builders use.
    pub fn tilted(&self, potential: &dyn Fn(&[f64]) -> f64) -> Self {
        let n = self.len();
        let raw: Vec<f64> = (0..n)
            .map(|x| self.measure[x] * (-potential(&self.sites[x].coords)).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        let mut weights = DMatrix::zeros(n, n);
        for x in 0..n {
            for &(y, w) in &self.neighbors[x] {
                if y > x {
                    let v = w * (-potential(&self.edge_midpoint(x, y))).exp() / z;
                    weights[(x, y)] = v;
                    weights[(y, x)] = v;
                }
            }
        }
        let kind = match &self.kind {
            SpaceKind::Product { factors } => SpaceKind::Product {
                factors: factors.clone(),
            },
            k => k.clone(),
        };
        Self::assemble(
            kind,
            self.sites.clone(),
            self.metric.clone(),
            raw.iter().map(|r| r / z).collect(),
            weights,
            self.mesh,
        )
    }

    // ------------------------------------------------------------------
    // Calculus
    // ------------------------------------------------------------------

    /// Full generator matrix `(Δ)_{xy} = w(x,y)/m(x)`, diagonal `-Σ_y w(x,y)/m(x)`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut lap = DMatrix::zeros(n, n);
        for x in 0..n {
            let mut diag = 0.0;
            for &(y, w) in &self.neighbors[x] {
                let v = w / self.measure[x];
                lap[(x, y)] = v;
                diag += v;
            }
            lap[(x, x)] = -diag;
        }
        lap
    }

    /// `Δu` without forming the matrix.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| {
                let s: f64 = self.neighbors[x]
                    .iter()
                    .map(|&(y, w)| w * (u[y] - u[x]))
                    .sum();
                s / self.measure[x]
            })
            .collect()
    }

    /// Carré du champ `Γ(u,v)(x) = (1/2m(x)) Σ_y w(x,y)(u(y)-u(x))(v(y)-v(x))`.
    pub fn gamma(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| {
                let s: f64 = self.neighbors[x]
                    .iter()
                    .map(|&(y, w)| w * (u[y] - u[x]) * (v[y] - v[x]))
                    .sum();
                0.5 * s / self.measure[x]
            })
            .collect()
    }

    /// `Γ(u) = Γ(u,u)`.
    pub fn gamma_sq(&self, u: &[f64]) -> Vec<f64> {
        self.gamma(u, u)
    }

    /// Boltzmann entropy `Σ ρ log ρ m` with `0 log 0 = 0`.
    pub fn entropy(&self, mu: &ProbMeasure) -> f64 {
        entropy_of_density(&self.measure, mu.density())
    }

    /// Entropy of a mass vector (not necessarily validated as a measure).
    pub fn entropy_of_masses(&self, masses: &[f64]) -> f64 {
        masses
            .iter()
            .zip(&self.measure)
            .map(|(&q, &m)| {
                let rho = q / m;
                if rho < DENSITY_FLOOR {
                    0.0
                } else {
                    q * rho.ln()
                }
            })
            .sum()
    }
}

pub(crate) fn entropy_of_density(measure: &[f64], density: &[f64]) -> f64 {
    density
        .iter()
        .zip(measure)
        .map(|(&rho, &m)| {
            if rho < DENSITY_FLOOR {
                0.0
            } else {
                rho * rho.ln() * m
            }
        })
        .sum()
}

/// Builds the one-dimensional space named by `kind` with a potential handle;
/// used by the JSON spec and by `change_of_measure`.
pub(crate) fn build_from_parts(
    kind: &str,
    n: usize,
    extent: f64,
    potential: &dyn Fn(f64) -> f64,
) -> Result<DiscreteSpace> {
    match kind {
        "interval" => DiscreteSpace::interval(n, extent, potential),
        "circle" => DiscreteSpace::circle(n, extent, potential),
        other => Err(invalid(format!("unknown one-dimensional kind {other:?}"))),
    }
}

// ----------------------------------------------------------------------
// JSON form: sites, dense metric rows, measure and a sparse edge list.
// ----------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpaceDocument {
    #[serde(flatten)]
    kind: SpaceKind,
    mesh: f64,
    sites: Vec<Site>,
    measure: Vec<f64>,
    metric: Vec<Vec<f64>>,
    /// `[x, y, w(x,y)]` for `x < y`.
    edges: Vec<(usize, usize, f64)>,
}

impl From<DiscreteSpace> for SpaceDocument {
    fn from(s: DiscreteSpace) -> Self {
        let n = s.len();
        let metric = (0..n)
            .map(|i| (0..n).map(|j| s.metric[(i, j)]).collect())
            .collect();
        let mut edges = Vec::new();
        for x in 0..n {
            for &(y, w) in &s.neighbors[x] {
                if y > x {
                    edges.push((x, y, w));
                }
            }
        }
        SpaceDocument {
            kind: s.kind,
            mesh: s.mesh,
            sites: s.sites,
            measure: s.measure,
            metric,
            edges,
        }
    }
}

impl TryFrom<SpaceDocument> for DiscreteSpace {
    type Error = crate::error::LabError;

    fn try_from(doc: SpaceDocument) -> Result<Self> {
        let n = doc.measure.len();
        if doc.metric.len() != n || doc.metric.iter().any(|r| r.len() != n) || doc.sites.len() != n
        {
            return Err(invalid("space document has inconsistent sizes"));
        }
        let metric = DMatrix::from_fn(n, n, |i, j| doc.metric[i][j]);
        let mut weights = DMatrix::zeros(n, n);
        for &(x, y, w) in &doc.edges {
            if x >= n || y >= n {
                return Err(invalid("edge index out of range"));
            }
            weights[(x, y)] = w;
            weights[(y, x)] = w;
        }
        Ok(DiscreteSpace::assemble(
            doc.kind,
            doc.sites,
            metric,
            doc.measure,
            weights,
            doc.mesh,
        ))
    }
}
