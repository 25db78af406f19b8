//! Ground truth that does not go through the Newton iteration: the optimal
//! transport cost C(w) for a prescribed marginal, brute-force minimisation
//! of C + F on a simplex grid, box Hausdorff distances, and stability runs.

mod hausdorff;
mod stability;

use rayon::prelude::*;

use crate::error::{check_finite, Error, Result};
use crate::fees::{SplittingFee, SIMPLEX_TOL};
use crate::geometry::{transport_summary, LineDensity, TransportProblem};
use crate::solver::{damped_newton, SolveStatus, SolverConfig};

pub use hausdorff::{box_simplex_hausdorff, box_simplex_vertices, hypercube_hausdorff_bound};
pub use stability::{
    fee_sup_distance, modulus_of_continuity, stability_experiment, stability_ladder,
    BoundForm, LadderReport, MinimizerMethod, StabilityOptions, StabilityReport,
};

/// Largest N the brute-force grid search accepts.
pub const BRUTE_FORCE_MAX_SITES: usize = 4;

fn check_simplex(n: usize, w: &[f64]) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "w",
            expected: n,
            got: w.len(),
        });
    }
    check_finite("w", w)?;
    let sum: f64 = w.iter().sum();
    if w.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(
            "w",
            format!("must be a nonnegative vector summing to 1, sum is {sum}"),
        ));
    }
    Ok(())
}

/// Sites in increasing order with their original indices, for the monotone map.
struct MonotoneLine {
    density: LineDensity,
    order: Vec<usize>,
    ys: Vec<f64>,
    scale: f64,
}

impl MonotoneLine {
    fn new(problem: &TransportProblem) -> Self {
        let points = problem.sites().points();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
        Self {
            density: LineDensity::new(problem.domain(), problem.density()),
            ys: order.iter().map(|&i| points[i][0]).collect(),
            order,
            scale: problem.cost().scale,
        }
    }

    fn cost(&self, w: &[f64]) -> f64 {
        let (lo, _) = self.density.bounds();
        let mut cumulative = 0.0;
        let mut left = lo;
        let mut total = 0.0;
        for (&i, &y) in self.order.iter().zip(&self.ys) {
            cumulative += w[i];
            let right = self.density.quantile(cumulative);
            total += self.density.second_moment(left, right, y, self.scale);
            left = right;
        }
        total
    }

    /// Raw moments of μ up to the quantile of each multiple of 1/k_total.
    fn quantile_moments(&self, k_total: usize) -> Vec<[f64; 3]> {
        (0..=k_total)
            .map(|j| {
                let x = self.density.quantile(j as f64 / k_total as f64);
                self.density.moments_to(x)
            })
            .collect()
    }

    /// C(k/k_total) from the table built by `quantile_moments`.
    fn grid_cost(&self, table: &[[f64; 3]], ks: &[usize]) -> f64 {
        let (lo, _) = self.density.bounds();
        let mut j = 0;
        let mut total = 0.0;
        for (&i, &y) in self.order.iter().zip(&self.ys) {
            let [a0, a1, a2] = table[j];
            j += ks[i];
            let [b0, b1, b2] = table[j];
            let c = y - lo;
            let value = (b2 - a2) - 2.0 * c * (b1 - a1) + c * c * (b0 - a0);
            total += self.scale * value.max(0.0);
        }
        total
    }
}

/// C(w): minimal transport cost onto the sites with masses w.
/// One-dimensional problems use the monotone rearrangement; planar ones
/// solve the dual with the point fee at w.
pub fn kantorovich_cost(problem: &TransportProblem, w: &[f64]) -> Result<f64> {
    check_simplex(problem.n_sites(), w)?;
    if problem.dim() == 1 {
        Ok(MonotoneLine::new(problem).cost(w))
    } else {
        kantorovich_cost_by_solve(problem, w)
    }
}

/// C(w) through the damped Newton iteration with fee δ_{w}; needs w > 0.
pub fn kantorovich_cost_by_solve(problem: &TransportProblem, w: &[f64]) -> Result<f64> {
    check_simplex(problem.n_sites(), w)?;
    let eps = w.iter().copied().fold(f64::INFINITY, f64::min);
    if eps <= 0.0 {
        return Err(Error::invalid(
            "w",
            "the dual route needs every mass strictly positive",
        ));
    }
    let sum: f64 = w.iter().sum();
    let normalised: Vec<f64> = w.iter().map(|x| x / sum).collect();
    let fee = SplittingFee::point(&normalised)?;
    let config = SolverConfig::new(eps).with_eps0(0.15 * eps).with_zeta(1e-11);
    let outcome = damped_newton(problem, &fee, &vec![0.0; w.len()], &config)?;
    if outcome.status != SolveStatus::Converged {
        let residual = outcome.trace.records.last().map_or(f64::NAN, |r| r.err_l2);
        return Err(Error::NotConverged {
            iterations: outcome.trace.newton_steps(),
            residual,
        });
    }
    Ok(transport_summary(problem, &outcome.psi)?.cost)
}

/// C(w) + F(w), +inf off the fee's domain.
pub fn objective(problem: &TransportProblem, fee: &SplittingFee, w: &[f64]) -> Result<f64> {
    fee.check_len(problem.n_sites())?;
    let f: f64 = fee.parts().iter().zip(w).map(|(p, &x)| p.eval(x)).sum();
    if !f.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(kantorovich_cost(problem, w)? + f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub w: Vec<f64>,
    pub objective: f64,
    /// Grid points where the objective was finite.
    pub feasible_points: usize,
}

/// Minimises C + F over {w ∈ Δ : w = k/K} with K = round(1/grid_step) on a
/// one-dimensional problem. Ties go to the lexicographically smallest w.
pub fn brute_force_minimize(
    problem: &TransportProblem,
    fee: &SplittingFee,
    grid_step: f64,
) -> Result<BruteForceResult> {
    let n = problem.n_sites();
    fee.check_len(n)?;
    if n > BRUTE_FORCE_MAX_SITES {
        return Err(Error::TooManySites {
            max: BRUTE_FORCE_MAX_SITES,
            got: n,
        });
    }
    if problem.dim() != 1 {
        return Err(Error::invalid(
            "problem.domain",
            "brute force needs a one-dimensional problem",
        ));
    }
    if !(grid_step.is_finite() && grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::invalid(
            "grid_step",
            format!("must lie in (0, 1], got {grid_step}"),
        ));
    }
    let k_total = (1.0 / grid_step).round() as usize;
    let at = |k: usize| k as f64 / k_total as f64;
    // fee values per part and grid index
    let table: Vec<Vec<f64>> = fee
        .parts()
        .iter()
        .map(|p| (0..=k_total).map(|k| p.eval(at(k))).collect())
        .collect();
    let line = MonotoneLine::new(problem);
    let moments = line.quantile_moments(k_total);

    struct Best {
        objective: f64,
        index: Vec<usize>,
        feasible: usize,
    }
    let search_first = |k0: usize| -> Best {
        let mut best = Best {
            objective: f64::INFINITY,
            index: Vec::new(),
            feasible: 0,
        };
        let mut ks = vec![0usize; n];
        ks[0] = k0;
        visit(1, k_total - k0, &mut ks, &mut |ks: &[usize]| {
            let f: f64 = ks.iter().enumerate().map(|(i, &k)| table[i][k]).sum();
            if !f.is_finite() {
                return;
            }
            let value = line.grid_cost(&moments, ks) + f;
            best.feasible += 1;
            if value < best.objective {
                best.objective = value;
                best.index = ks.to_vec();
            }
        });
        best
    };
    let per_first: Vec<Best> = (0..=k_total).into_par_iter().map(search_first).collect();
    let feasible_points = per_first.iter().map(|b| b.feasible).sum();
    let best = per_first
        .into_iter()
        .fold(None::<Best>, |acc, b| match acc {
            Some(a) if a.objective <= b.objective => Some(a),
            _ if b.objective.is_finite() => Some(b),
            acc => acc,
        })
        .ok_or(Error::EmptyFeasibleGrid)?;
    Ok(BruteForceResult {
        w: best.index.iter().map(|&k| at(k)).collect(),
        objective: best.objective,
        feasible_points,
    })
}

/// Calls `f` on every completion of ks[..depth] whose entries sum to the
/// original total, in lexicographic order.
fn visit(depth: usize, remaining: usize, ks: &mut [usize], f: &mut impl FnMut(&[usize])) {
    let n = ks.len();
    if depth == n {
        if remaining == 0 {
            f(ks);
        }
        return;
    }
    if depth == n - 1 {
        ks[depth] = remaining;
        f(ks);
        return;
    }
    for k in 0..=remaining {
        ks[depth] = k;
        visit(depth + 1, remaining - k, ks, f);
    }
}
