//! Laguerre diagrams, cell masses, and their Jacobian for the quadratic cost
//! on one- and two-dimensional boxes.
//!
//! Two backends share one interface. [`Backend::Exact`] integrates the
//! continuous density over exact cells (intervals in 1-D, clipped power
//! cells in 2-D), so masses are smooth in ψ. [`Backend::Grid`] assigns each
//! midpoint quadrature node to its cell and sums, which is piecewise
//! constant in ψ but independent of any geometry code.

pub mod density;
mod grid;
mod line;
mod plane;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

pub use density::{LineDensity, PlaneDensity};

/// A point of the box. One-dimensional problems keep the second coordinate at 0.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    bounds: Vec<[f64; 2]>,
    resolution: Vec<usize>,
}

impl DomainSpec {
    pub fn new(bounds: Vec<[f64; 2]>, resolution: Vec<usize>) -> Result<Self> {
        if !(1..=2).contains(&bounds.len()) {
            return Err(Error::invalid(
                "domain.bounds",
                format!("dimension must be 1 or 2, got {}", bounds.len()),
            ));
        }
        if resolution.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                what: "domain.resolution",
                expected: bounds.len(),
                got: resolution.len(),
            });
        }
        for b in &bounds {
            if !(b[0].is_finite() && b[1].is_finite() && b[1] > b[0]) {
                return Err(Error::invalid(
                    "domain.bounds",
                    format!("axis [{}, {}] must have positive finite length", b[0], b[1]),
                ));
            }
        }
        if let Some(&r) = resolution.iter().find(|&&r| r < 2) {
            return Err(Error::invalid(
                "domain.resolution",
                format!("need at least 2 nodes per axis, got {r}"),
            ));
        }
        Ok(Self { bounds, resolution })
    }

    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![[lo, hi]], vec![n])
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Self::new(vec![x, y], vec![nx, ny])
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle([0.0, 1.0], [0.0, 1.0], n, n)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let [lo, hi] = self.bounds[axis];
        (hi - lo) / self.resolution[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|b| b[1] - b[0]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Midpoint node with row-major index `iy·nx + ix`.
    pub fn node(&self, index: usize) -> Point {
        let nx = self.resolution[0];
        let (ix, iy) = (index % nx, index / nx);
        let x = self.bounds[0][0] + (ix as f64 + 0.5) * self.spacing(0);
        let y = if self.dim() == 2 {
            self.bounds[1][0] + (iy as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    pub fn corners(&self) -> Vec<Point> {
        let [x0, x1] = self.bounds[0];
        if self.dim() == 1 {
            return vec![[x0, 0.0], [x1, 0.0]];
        }
        let [y0, y1] = self.bounds[1];
        vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    pub fn contains(&self, p: Point) -> bool {
        let inside = |axis: usize, v: f64| {
            let [lo, hi] = self.bounds[axis];
            (lo..=hi).contains(&v)
        };
        inside(0, p[0]) && (self.dim() == 1 || inside(1, p[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Uniform,
    Tabulated,
}

/// Probability density given by its values at the midpoint nodes, scaled so
/// that the midpoint sum is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    kind: DensityKind,
    values: Vec<f64>,
    holder_alpha: f64,
}

impl DensityField {
    pub fn uniform(domain: &DomainSpec) -> Self {
        Self {
            kind: DensityKind::Uniform,
            values: vec![1.0 / domain.volume(); domain.node_count()],
            holder_alpha: 1.0,
        }
    }

    pub fn tabulated(domain: &DomainSpec, values: Vec<f64>, holder_alpha: f64) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::DimensionMismatch {
                what: "density.values",
                expected: domain.node_count(),
                got: values.len(),
            });
        }
        check_finite("density.values", &values)?;
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(
                "density.values",
                format!("entry {i} is negative ({})", values[i]),
            ));
        }
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
            return Err(Error::invalid(
                "density.holder_alpha",
                format!("must lie in (0, 1], got {holder_alpha}"),
            ));
        }
        let total: f64 = values.iter().sum::<f64>() * domain.cell_volume();
        if total <= 0.0 {
            return Err(Error::invalid("density.values", "total mass is zero"));
        }
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(Self {
            kind: DensityKind::Tabulated,
            values,
            holder_alpha,
        })
    }

    /// Tabulates `f` at the midpoint nodes.
    pub fn from_fn(
        domain: &DomainSpec,
        holder_alpha: f64,
        f: impl Fn(Point) -> f64,
    ) -> Result<Self> {
        let values = (0..domain.node_count()).map(|k| f(domain.node(k))).collect();
        Self::tabulated(domain, values, holder_alpha)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn holder_alpha(&self) -> f64 {
        self.holder_alpha
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    points: Vec<Point>,
}

impl SiteSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("sites", "need at least one site"));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::NonFinite {
                    what: "sites",
                    index: i,
                });
            }
            if let Some(j) = points[..i].iter().position(|q| q == p) {
                return Err(Error::invalid(
                    "sites",
                    format!("sites {j} and {i} coincide"),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn on_line(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| [x, 0.0]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// c(x, y) = scale·|x − y|².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub scale: f64,
}

impl Default for QuadraticCost {
    fn default() -> Self {
        Self { scale: 0.5 }
    }
}

impl QuadraticCost {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(
                "cost_scale",
                format!("must be positive, got {scale}"),
            ));
        }
        Ok(Self { scale })
    }

    #[inline]
    pub fn eval(&self, x: Point, y: Point) -> f64 {
        let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
        self.scale * (dx * dx + dy * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Exact,
    Grid,
}

/// Everything about an instance except the storage fee.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    domain: DomainSpec,
    density: DensityField,
    sites: SiteSet,
    cost: QuadraticCost,
    backend: Backend,
}

impl TransportProblem {
    pub fn new(
        domain: DomainSpec,
        density: DensityField,
        sites: SiteSet,
        cost: QuadraticCost,
        backend: Backend,
    ) -> Result<Self> {
        if density.values().len() != domain.node_count() {
            return Err(Error::DimensionMismatch {
                what: "density.values",
                expected: domain.node_count(),
                got: density.values().len(),
            });
        }
        for (i, &p) in sites.points().iter().enumerate() {
            if domain.dim() == 1 && p[1] != 0.0 {
                return Err(Error::invalid(
                    "sites",
                    format!("site {i} has a second coordinate in a 1-D problem"),
                ));
            }
            if !domain.contains(p) {
                return Err(Error::invalid(
                    "sites",
                    format!("site {i} lies outside the domain"),
                ));
            }
        }
        Ok(Self {
            domain,
            density,
            sites,
            cost,
            backend,
        })
    }

    /// Uniform density on [0, 1] with sites on the line.
    pub fn unit_interval(xs: &[f64], scale: f64, resolution: usize) -> Result<Self> {
        let domain = DomainSpec::interval(0.0, 1.0, resolution)?;
        let density = DensityField::uniform(&domain);
        Self::new(
            domain,
            density,
            SiteSet::on_line(xs)?,
            QuadraticCost::new(scale)?,
            Backend::Exact,
        )
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn density(&self) -> &DensityField {
        &self.density
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn cost(&self) -> QuadraticCost {
        self.cost
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Index minimising c(x, y_i) + ψ^i, lowest index on ties.
    #[inline]
    pub fn assign(&self, x: Point, psi: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (i, (&y, &p)) in self.sites.points().iter().zip(psi).enumerate() {
            let v = self.cost.eval(x, y) + p;
            if v < best_val {
                best_val = v;
                best = i;
            }
        }
        best
    }

    fn check_psi(&self, psi: &[f64]) -> Result<()> {
        if psi.len() != self.n_sites() {
            return Err(Error::DimensionMismatch {
                what: "psi",
                expected: self.n_sites(),
                got: psi.len(),
            });
        }
        check_finite("psi", psi)
    }
}

/// How cells are described alongside their masses.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// Exact 1-D cells: `intervals[i]` is cell i, `None` when empty.
    Intervals(Vec<Option<(f64, f64)>>),
    /// Exact 2-D cells: vertex lists of the clipped power cells.
    Polygons(Vec<Vec<Point>>),
    /// Site index of every midpoint node, row-major.
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreDiagram {
    pub masses: Vec<f64>,
    pub assignment: Assignment,
    pub psi: Vec<f64>,
}

impl LaguerreDiagram {
    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn laguerre_masses(problem: &TransportProblem, psi: &[f64]) -> Result<LaguerreDiagram> {
    problem.check_psi(psi)?;
    let (masses, assignment) = match (problem.backend, problem.dim()) {
        (Backend::Grid, _) => {
            let (masses, nodes) = grid::masses(problem, psi);
            (masses, Assignment::Nodes(nodes))
        }
        (Backend::Exact, 1) => {
            let cells = line::cells(problem, psi);
            let line_density = LineDensity::new(&problem.domain, &problem.density);
            (cells.masses(&line_density), Assignment::Intervals(cells.intervals))
        }
        (Backend::Exact, _) => {
            let plane_density = PlaneDensity::new(&problem.domain, &problem.density);
            let cells = plane::cells(problem, psi);
            let masses = cells
                .par_iter()
                .map(|cell| plane::integrate(&plane_density, &cell.vertices, |_| 1.0))
                .collect();
            let polys = cells.into_iter().map(|c| c.vertices).collect();
            (masses, Assignment::Polygons(polys))
        }
    };
    Ok(LaguerreDiagram {
        masses,
        assignment,
        psi: psi.to_vec(),
    })
}

/// Masses only; skips building the cell description where possible.
pub fn cell_masses(problem: &TransportProblem, psi: &[f64]) -> Result<Vec<f64>> {
    if problem.backend == Backend::Exact && problem.dim() == 1 {
        problem.check_psi(psi)?;
        let line_density = LineDensity::new(&problem.domain, &problem.density);
        return Ok(line::cells(problem, psi).masses(&line_density));
    }
    Ok(laguerre_masses(problem, psi)?.masses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    /// Central differences of the masses.
    FiniteDiff,
    /// Closed-form boundary terms of the 1-D interval cells.
    Exact1d,
    /// Density integrated along the shared facets of exact cells (1-D or 2-D).
    Facet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianOptions {
    pub method: JacobianMethod,
    /// Every cell must carry mass strictly above this floor.
    pub mass_floor: f64,
    /// Finite-difference step; defaults to max(1e−6, h²).
    pub step: Option<f64>,
}

impl JacobianOptions {
    pub fn new(method: JacobianMethod) -> Self {
        Self {
            method,
            mass_floor: 0.0,
            step: None,
        }
    }

    /// Facet terms on the exact backend, finite differences on the grid.
    pub fn default_for(problem: &TransportProblem) -> Self {
        match problem.backend {
            Backend::Exact => Self::new(JacobianMethod::Facet),
            Backend::Grid => Self::new(JacobianMethod::FiniteDiff),
        }
    }
}

/// DG(ψ) with ∂G^i/∂ψ^j ≥ 0 off the diagonal and zero row sums.
pub fn laguerre_jacobian(
    problem: &TransportProblem,
    psi: &[f64],
    options: &JacobianOptions,
) -> Result<DMatrix<f64>> {
    let masses = cell_masses(problem, psi)?;
    if let Some((index, &mass)) = masses
        .iter()
        .enumerate()
        .find(|(_, &m)| m <= options.mass_floor)
    {
        return Err(Error::Conditioning {
            index,
            mass,
            floor: options.mass_floor,
        });
    }
    let n = problem.n_sites();
    let scale = problem.cost.scale;
    match options.method {
        JacobianMethod::FiniteDiff => {
            let step = options
                .step
                .unwrap_or_else(|| 1e-6f64.max(problem.domain.max_spacing().powi(2)));
            let columns: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut plus = psi.to_vec();
                    let mut minus = psi.to_vec();
                    plus[j] += step;
                    minus[j] -= step;
                    let gp = cell_masses(problem, &plus)?;
                    let gm = cell_masses(problem, &minus)?;
                    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
                })
                .collect::<Result<_>>()?;
            Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
        }
        JacobianMethod::Exact1d => {
            if problem.dim() != 1 {
                return Err(Error::JacobianUnavailable {
                    method: "exact-1d",
                    reason: "the problem is two-dimensional",
                });
            }
            let line_density = LineDensity::new(&problem.domain, &problem.density);
            Ok(line::jacobian(problem, psi, &line_density))
        }
        JacobianMethod::Facet => {
            if problem.backend != Backend::Exact {
                return Err(Error::JacobianUnavailable {
                    method: "facet",
                    reason: "grid masses are piecewise constant in psi",
                });
            }
            if problem.dim() == 1 {
                let line_density = LineDensity::new(&problem.domain, &problem.density);
                return Ok(line::jacobian(problem, psi, &line_density));
            }
            let plane_density = PlaneDensity::new(&problem.domain, &problem.density);
            let cells = plane::cells(problem, psi);
            let points = problem.sites.points();
            let rows: Vec<Vec<(usize, f64)>> = cells
                .par_iter()
                .enumerate()
                .map(|(i, cell)| {
                    cell.facets()
                        .map(|(j, a, b)| {
                            let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
                            let gap = (dx * dx + dy * dy).sqrt();
                            let flux = plane::integrate_segment(&plane_density, a, b);
                            (j, flux / (2.0 * scale * gap))
                        })
                        .collect()
                })
                .collect();
            let mut dg = DMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                for &(j, v) in row {
                    dg[(i, j)] += v;
                }
            }
            // both sides of a facet see it; average to get exact symmetry
            let sym = (&dg + dg.transpose()) * 0.5;
            let mut dg = sym;
            for i in 0..n {
                dg[(i, i)] = 0.0;
                let row_sum: f64 = dg.row(i).sum();
                dg[(i, i)] = -row_sum;
            }
            Ok(dg)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSummary {
    pub diagram: LaguerreDiagram,
    pub weights: Vec<f64>,
    pub cost: f64,
}

/// Laguerre masses together with ∫ c(x, y_T(x)) dμ for the Laguerre map T.
pub fn transport_summary(problem: &TransportProblem, psi: &[f64]) -> Result<TransportSummary> {
    let diagram = laguerre_masses(problem, psi)?;
    let points = problem.sites.points();
    let scale = problem.cost.scale;
    let cost = match &diagram.assignment {
        Assignment::Nodes(nodes) => grid::cost(problem, nodes),
        Assignment::Intervals(intervals) => {
            let line_density = LineDensity::new(&problem.domain, &problem.density);
            intervals
                .iter()
                .zip(points)
                .map(|(iv, y)| match iv {
                    Some((a, b)) => line_density.second_moment(*a, *b, y[0], scale),
                    None => 0.0,
                })
                .sum()
        }
        Assignment::Polygons(polys) => {
            let plane_density = PlaneDensity::new(&problem.domain, &problem.density);
            let parts: Vec<f64> = polys
                .par_iter()
                .zip(points)
                .map(|(poly, &y)| {
                    plane::integrate(&plane_density, poly, |x| problem.cost.eval(x, y))
                })
                .collect();
            parts.iter().sum()
        }
    };
    Ok(TransportSummary {
        weights: diagram.masses.clone(),
        diagram,
        cost,
    })
}

/// sup over the box and the sites of c(x, y_i); attained at a box corner.
pub fn cost_sup_norm(problem: &TransportProblem) -> f64 {
    let corners = problem.domain.corners();
    problem
        .sites
        .points()
        .iter()
        .flat_map(|&y| corners.iter().map(move |&x| problem.cost.eval(x, y)))
        .fold(0.0, f64::max)
}

/// Sites that carry mass yet violate ψ^j − min ψ ≤ 2‖c‖∞ + 1e−9.
pub fn psi_spread_violations(psi: &[f64], masses: &[f64], cost_sup: f64) -> Vec<usize> {
    let min_psi = psi.iter().copied().fold(f64::INFINITY, f64::min);
    psi.iter()
        .zip(masses)
        .enumerate()
        .filter(|(_, (&p, &m))| m > 0.0 && p - min_psi > 2.0 * cost_sup + 1e-9)
        .map(|(j, _)| j)
        .collect()
}
