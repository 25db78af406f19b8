use nalgebra::DMatrix;

use super::{LineDensity, TransportProblem};

pub(crate) struct LineCells {
    pub intervals: Vec<Option<(f64, f64)>>,
    /// Site whose cell borders cell i on the right, when that border is interior.
    right: Vec<Option<usize>>,
}

impl LineCells {
    pub fn masses(&self, density: &LineDensity) -> Vec<f64> {
        self.intervals
            .iter()
            .map(|iv| match iv {
                Some((a, b)) => (density.cdf(*b) - density.cdf(*a)).max(0.0),
                None => 0.0,
            })
            .collect()
    }
}

/// Point where c(x, y_i) + ψ_i = c(x, y_j) + ψ_j.
#[inline]
pub(crate) fn breakpoint(yi: f64, yj: f64, pi: f64, pj: f64, scale: f64) -> f64 {
    0.5 * (yi + yj) + (pj - pi) / (2.0 * scale * (yj - yi))
}

pub(crate) fn cells(problem: &TransportProblem, psi: &[f64]) -> LineCells {
    let [x0, x1] = problem.domain().bounds()[0];
    let ys: Vec<f64> = problem.sites().points().iter().map(|p| p[0]).collect();
    let scale = problem.cost().scale;
    let n = ys.len();
    let mut intervals = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let (mut lo, mut hi) = (x0, x1);
        let mut hi_nb = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            let bp = breakpoint(ys[i], ys[j], psi[i], psi[j], scale);
            if ys[j] > ys[i] {
                if bp < hi {
                    hi = bp;
                    hi_nb = Some(j);
                }
            } else if bp > lo {
                lo = bp;
            }
        }
        if hi > lo {
            intervals.push(Some((lo, hi)));
            right.push(hi_nb.filter(|_| hi < x1));
        } else {
            intervals.push(None);
            right.push(None);
        }
    }
    LineCells { intervals, right }
}

/// ∂G^i/∂ψ^j = ρ(x*)/(2·scale·|y_i − y_j|) for neighbouring cells.
pub(crate) fn jacobian(problem: &TransportProblem, psi: &[f64], density: &LineDensity) -> DMatrix<f64> {
    let ys: Vec<f64> = problem.sites().points().iter().map(|p| p[0]).collect();
    let scale = problem.cost().scale;
    let n = ys.len();
    let cells = cells(problem, psi);
    let mut dg = DMatrix::zeros(n, n);
    for i in 0..n {
        if let (Some((_, x)), Some(j)) = (cells.intervals[i], cells.right[i]) {
            let v = density.value_at(x) / (2.0 * scale * (ys[j] - ys[i]).abs());
            dg[(i, j)] += v;
            dg[(j, i)] += v;
            dg[(i, i)] -= v;
            dg[(j, j)] -= v;
        }
    }
    dg
}
