//! Power cells in a rectangle by successive half-plane clipping.

use super::{PlaneDensity, Point, TransportProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeLabel {
    Boundary,
    Site(usize),
}

/// Convex polygon; edge k joins vertex k to vertex k+1 and carries `labels[k]`.
#[derive(Debug, Clone)]
pub(crate) struct Cell {
    pub vertices: Vec<Point>,
    pub labels: Vec<EdgeLabel>,
}

impl Cell {
    /// Edges shared with another site's cell: (site, start, end).
    pub fn facets(&self) -> impl Iterator<Item = (usize, Point, Point)> + '_ {
        let n = self.vertices.len();
        self.labels.iter().enumerate().filter_map(move |(k, l)| match l {
            EdgeLabel::Site(j) => Some((*j, self.vertices[k], self.vertices[(k + 1) % n])),
            EdgeLabel::Boundary => None,
        })
    }
}

/// Keeps the part of `cell` where a·x ≤ b; the new edge gets `label`.
fn clip(cell: &Cell, a: Point, b: f64, label: EdgeLabel) -> Cell {
    let n = cell.vertices.len();
    let mut vertices = Vec::with_capacity(n + 1);
    let mut labels = Vec::with_capacity(n + 1);
    if n == 0 {
        return Cell { vertices, labels };
    }
    let side = |p: Point| a[0] * p[0] + a[1] * p[1] - b;
    for k in 0..n {
        let p = cell.vertices[k];
        let q = cell.vertices[(k + 1) % n];
        let (fp, fq) = (side(p), side(q));
        let p_in = fp <= 0.0;
        let q_in = fq <= 0.0;
        if p_in {
            vertices.push(p);
            labels.push(cell.labels[k]);
        }
        if p_in != q_in {
            let t = fp / (fp - fq);
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            vertices.push(x);
            // leaving the half-plane starts the new edge; entering resumes edge k
            labels.push(if p_in { label } else { cell.labels[k] });
        }
    }
    if vertices.len() < 3 {
        vertices.clear();
        labels.clear();
    }
    Cell { vertices, labels }
}

fn rectangle(x: [f64; 2], y: [f64; 2]) -> Cell {
    Cell {
        vertices: vec![[x[0], y[0]], [x[1], y[0]], [x[1], y[1]], [x[0], y[1]]],
        labels: vec![EdgeLabel::Boundary; 4],
    }
}

pub(crate) fn cell_of(problem: &TransportProblem, psi: &[f64], i: usize) -> Cell {
    let domain = problem.domain();
    let points = problem.sites().points();
    let scale = problem.cost().scale;
    let yi = points[i];
    let mut cell = rectangle(domain.bounds()[0], domain.bounds()[1]);
    for (j, &yj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        // scale|x−y_i|² + ψ_i ≤ scale|x−y_j|² + ψ_j
        let a = [yj[0] - yi[0], yj[1] - yi[1]];
        let b = 0.5 * ((yj[0] * yj[0] + yj[1] * yj[1]) - (yi[0] * yi[0] + yi[1] * yi[1]))
            + (psi[j] - psi[i]) / (2.0 * scale);
        cell = clip(&cell, a, b, EdgeLabel::Site(j));
        if cell.vertices.is_empty() {
            break;
        }
    }
    cell
}

pub(crate) fn cells(problem: &TransportProblem, psi: &[f64]) -> Vec<Cell> {
    use rayon::prelude::*;
    (0..problem.n_sites())
        .into_par_iter()
        .map(|i| cell_of(problem, psi, i))
        .collect()
}

const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_35;
const W0: f64 = 0.225;
const W1: f64 = 0.132_394_152_788_506_17;
const W2: f64 = 0.125_939_180_544_827_15;

/// Seven-point rule, exact for polynomials of degree 5 on a triangle.
#[inline]
fn triangle_rule(p0: Point, p1: Point, p2: Point, f: &impl Fn(Point) -> f64) -> f64 {
    let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    if area == 0.0 {
        return 0.0;
    }
    let at = |l0: f64, l1: f64, l2: f64| {
        f([
            l0 * p0[0] + l1 * p1[0] + l2 * p2[0],
            l0 * p0[1] + l1 * p1[1] + l2 * p2[1],
        ])
    };
    let third = 1.0 / 3.0;
    let s = W0 * at(third, third, third)
        + W1 * (at(A1, B1, B1) + at(B1, A1, B1) + at(B1, B1, A1))
        + W2 * (at(A2, B2, B2) + at(B2, A2, B2) + at(B2, B2, A2));
    area * s
}

fn fan(poly: &[Point], f: &impl Fn(Point) -> f64) -> f64 {
    (1..poly.len().saturating_sub(1))
        .map(|k| triangle_rule(poly[0], poly[k], poly[k + 1], f))
        .sum()
}

fn polygon(vertices: &[Point]) -> Cell {
    Cell {
        vertices: vertices.to_vec(),
        labels: vec![EdgeLabel::Boundary; vertices.len()],
    }
}

/// ∫_poly g(x) ρ(x) dx for polynomial g of degree ≤ 2; exact up to rounding
/// because the density is bilinear on every patch.
pub(crate) fn integrate(density: &PlaneDensity, poly: &[Point], g: impl Fn(Point) -> f64) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    if let Some(rho) = density.uniform {
        return rho * fan(poly, &g);
    }
    let weighted = |x: Point| g(x) * density.value_at(x);
    let (ymin, ymax) = poly
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    let (row_lo, row_hi) = (density.row_of(ymin), density.row_of(ymax));
    let whole = polygon(poly);
    let mut total = 0.0;
    for r in row_lo..=row_hi {
        let mut strip = whole.clone();
        if r > row_lo {
            strip = clip(&strip, [0.0, -1.0], -density.ybreaks[r], EdgeLabel::Boundary);
        }
        if r < row_hi {
            strip = clip(&strip, [0.0, 1.0], density.ybreaks[r + 1], EdgeLabel::Boundary);
        }
        if strip.vertices.is_empty() {
            continue;
        }
        let (xmin, xmax) = strip
            .vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        let (col_lo, col_hi) = (density.column_of(xmin), density.column_of(xmax));
        for c in col_lo..=col_hi {
            let mut piece = strip.clone();
            if c > col_lo {
                piece = clip(&piece, [-1.0, 0.0], -density.xbreaks[c], EdgeLabel::Boundary);
            }
            if c < col_hi {
                piece = clip(&piece, [1.0, 0.0], density.xbreaks[c + 1], EdgeLabel::Boundary);
            }
            total += fan(&piece.vertices, &weighted);
        }
    }
    total
}

/// ∫ ρ ds along the segment [a, b], Simpson on each patch piece (exact for
/// the bilinear interpolant, which is quadratic along a line).
pub(crate) fn integrate_segment(density: &PlaneDensity, a: Point, b: Point) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    if let Some(rho) = density.uniform {
        return rho * len;
    }
    let mut ts = vec![0.0, 1.0];
    let mut crossings = |start: f64, end: f64, breaks: &[f64]| {
        if start == end {
            return;
        }
        let (lo, hi) = (start.min(end), start.max(end));
        for &v in breaks {
            if v > lo && v < hi {
                ts.push((v - start) / (end - start));
            }
        }
    };
    crossings(a[0], b[0], &density.xbreaks);
    crossings(a[1], b[1], &density.ybreaks);
    ts.sort_by(f64::total_cmp);
    let at = |t: f64| density.value_at([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    let mut total = 0.0;
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 > t0 {
            total += (t1 - t0) / 6.0 * (at(t0) + 4.0 * at(0.5 * (t0 + t1)) + at(t1));
        }
    }
    total * len
}
