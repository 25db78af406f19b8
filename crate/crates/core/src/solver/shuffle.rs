//! Lowers individual coordinates of ψ until every Laguerre cell carries more
//! than the tolerance, placing each repaired cell's mass in [2ε, 3ε].

use crate::error::{check_finite, Error, Result};
use crate::geometry::{cell_masses, cost_sup_norm, TransportProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleOptions {
    /// Relative bracket width below which the search for r gives up.
    pub bisect_tol: f64,
    /// Cap on the number of coordinate moves.
    pub max_steps: usize,
}

impl Default for ShuffleOptions {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-13,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleOutcome {
    pub psi: Vec<f64>,
    /// Number of coordinate moves performed.
    pub steps: usize,
    /// Largest secant slope of r ↦ G^i(ψ − r e_i) seen during the search.
    pub lipschitz_estimate: f64,
}

pub fn parameter_shuffle(
    problem: &TransportProblem,
    psi: &[f64],
    eps: f64,
    options: &ShuffleOptions,
) -> Result<ShuffleOutcome> {
    let n = problem.n_sites();
    if psi.len() != n {
        return Err(Error::DimensionMismatch {
            what: "psi",
            expected: n,
            got: psi.len(),
        });
    }
    check_finite("psi", psi)?;
    if !(eps > 0.0 && eps < 1.0 / (3.0 * n as f64)) {
        return Err(Error::invalid(
            "eps",
            format!("shuffle tolerance must lie in (0, 1/(3N)) = (0, {}), got {eps}", 1.0 / (3.0 * n as f64)),
        ));
    }
    let mut psi = psi.to_vec();
    let mut masses = cell_masses(problem, &psi)?;
    let mut steps = 0;
    let mut lipschitz = 1.0_f64;
    let min = |m: &[f64]| m.iter().copied().fold(f64::INFINITY, f64::min);
    if min(&masses) <= eps && problem.density().min_value() <= 0.0 {
        return Err(Error::invalid(
            "density",
            "the shuffle needs a strictly positive density",
        ));
    }
    let cost_sup = cost_sup_norm(problem);
    while min(&masses) <= eps {
        for i in 0..n {
            if masses[i] > eps {
                continue;
            }
            let r = find_shift(problem, &psi, i, eps, cost_sup, &mut lipschitz, masses[i], options)?;
            psi[i] -= r;
            steps += 1;
            if steps > options.max_steps {
                return Err(Error::ShuffleIterationCap {
                    cap: options.max_steps,
                });
            }
            masses = cell_masses(problem, &psi)?;
        }
    }
    Ok(ShuffleOutcome {
        psi,
        steps,
        lipschitz_estimate: lipschitz,
    })
}

/// r > 0 with G^i(ψ − r e_i) ∈ [2ε, 3ε].
#[allow(clippy::too_many_arguments)]
fn find_shift(
    problem: &TransportProblem,
    psi: &[f64],
    i: usize,
    eps: f64,
    cost_sup: f64,
    lipschitz: &mut f64,
    g0: f64,
    options: &ShuffleOptions,
) -> Result<f64> {
    let mut trial = psi.to_vec();
    let mut mass_at = |r: f64| -> Result<f64> {
        trial[i] = psi[i] - r;
        Ok(cell_masses(problem, &trial)?[i])
    };
    let others_min = psi
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &p)| p)
        .fold(f64::INFINITY, f64::min);
    // past this shift every other cell is empty, so G^i = 1
    let r_max = (psi[i] - others_min + 2.0 * cost_sup).max(0.0) * (1.0 + 1e-12) + 1e-9;
    let (lo_target, hi_target) = (2.0 * eps, 3.0 * eps);

    let mut lo = 0.0;
    let mut hi = (eps / *lipschitz).min(r_max);
    let mut g_hi;
    loop {
        g_hi = mass_at(hi)?;
        if hi > 0.0 {
            *lipschitz = lipschitz.max((g_hi - g0) / hi);
        }
        if g_hi >= lo_target || hi >= r_max {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(r_max);
    }
    if g_hi <= hi_target {
        return Ok(hi);
    }
    let width = options.bisect_tol * r_max.max(1.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let g = mass_at(mid)?;
        if mid > 0.0 {
            *lipschitz = lipschitz.max((g - g0) / mid);
        }
        if g < lo_target {
            lo = mid;
        } else if g > hi_target {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    Err(Error::ShuffleBisection {
        index: i,
        lo: lo_target,
        hi: hi_target,
    })
}
