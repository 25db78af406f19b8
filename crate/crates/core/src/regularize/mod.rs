//! Turns an arbitrary feasible splitting fee into one the damped Newton
//! solver accepts: truncate to a sublevel set, widen singleton domains, pull
//! domains off zero (or open up a point fee), smooth, and add a square-root
//! barrier that makes every part strongly convex and essentially smooth.

mod smooth;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fees::{bisect_floats, conjugate_solve, ScalarConvexFn, SplittingFee};

pub use smooth::{
    convexify_scalar, smooth_scalar, smooth_scalar_detailed, Smoothing, SMOOTHING_SEGMENTS,
};

/// Σa or Σb within this distance of 1 counts as a single feasible point.
const POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Σa < 1 < Σb after widening; lower ends are floored at a small ε.
    Floor,
    /// Σa = 1: the only feasible allocation is the vector of lower ends.
    PointAtLower,
    /// Σb = 1: the only feasible allocation is the vector of upper ends.
    PointAtUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: u8,
    pub tag: &'static str,
    pub domains: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationReport {
    pub eta: f64,
    pub cost_sup: f64,
    /// min over the simplex of the input fee.
    pub min_fee: f64,
    /// Sublevel used to truncate each part.
    pub levels: Vec<f64>,
    pub branch: Branch,
    /// ε used by the floor branch.
    pub floor: Option<f64>,
    pub stages: Vec<StageRecord>,
    pub kernel_widths: Vec<f64>,
    pub smoothing_errors: Vec<f64>,
    /// 2η/(d_i − c_i).
    pub strong_convexity: Vec<f64>,
    /// min_i c_i, a valid lower bound on ∇F* for the output fee.
    pub eps_for_solver: f64,
}

impl RegularizationReport {
    pub fn final_domains(&self) -> &[[f64; 2]] {
        &self.stages.last().expect("pipeline records every stage").domains
    }
}

fn domains(parts: &[ScalarConvexFn]) -> Vec<[f64; 2]> {
    parts.iter().map(|p| p.domain()).collect()
}

pub fn regularize(
    fee: &SplittingFee,
    eta: f64,
    cost_sup: f64,
) -> Result<(SplittingFee, RegularizationReport)> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    if !(cost_sup.is_finite() && cost_sup >= 0.0) {
        return Err(Error::invalid(
            "cost_sup",
            format!("must be finite and nonnegative, got {cost_sup}"),
        ));
    }
    fee.check_feasible()?;
    let n = fee.len();
    let mut stages = Vec::with_capacity(5);

    let min_fee = -conjugate_solve(fee, &vec![0.0; n])?.fstar;
    let (truncated, levels) = truncate(fee, min_fee, cost_sup)?;
    stages.push(StageRecord {
        stage: 2,
        tag: "truncate",
        domains: domains(&truncated),
    });

    let lower: f64 = truncated.iter().map(|p| p.domain()[0]).sum();
    let upper: f64 = truncated.iter().map(|p| p.domain()[1]).sum();
    let branch = if (lower - 1.0).abs() <= POINT_TOL {
        Branch::PointAtLower
    } else if (upper - 1.0).abs() <= POINT_TOL {
        Branch::PointAtUpper
    } else {
        Branch::Floor
    };

    let widened: Vec<ScalarConvexFn> = if branch == Branch::Floor {
        truncated
            .iter()
            .map(|p| widen(p, eta))
            .collect::<Result<_>>()?
    } else {
        truncated.clone()
    };
    stages.push(StageRecord {
        stage: 3,
        tag: "widen",
        domains: domains(&widened),
    });

    let (boxed, floor) = match branch {
        Branch::Floor => {
            let a: Vec<f64> = widened.iter().map(|p| p.domain()[0]).collect();
            let min_b = widened.iter().map(|p| p.domain()[1]).fold(f64::INFINITY, f64::min);
            let slack = (1.0 - a.iter().sum::<f64>()) / (2.0 * n as f64);
            let eps = 0.5 * slack.min(eta).min(min_b);
            let parts = widened
                .iter()
                .map(|p| {
                    let [a, b] = p.domain();
                    p.restrict([a.max(eps), b])
                })
                .collect::<Result<Vec<_>>>()?;
            (parts, Some(eps))
        }
        Branch::PointAtLower | Branch::PointAtUpper => {
            let point = if branch == Branch::PointAtLower {
                widened.iter().map(|p| p.domain()[0]).collect::<Vec<_>>()
            } else {
                widened.iter().map(|p| p.domain()[1]).collect()
            };
            let shift = eta / n as f64;
            let parts = point
                .iter()
                .map(|&p| {
                    let c = (p + shift) / (1.0 + 2.0 * eta);
                    let d = (p + shift).min(1.0);
                    ScalarConvexFn::indicator([c, d])
                })
                .collect::<Result<Vec<_>>>()?;
            (parts, None)
        }
    };
    stages.push(StageRecord {
        stage: 4,
        tag: if floor.is_some() { "floor" } else { "open_point" },
        domains: domains(&boxed),
    });

    let smoothed = boxed
        .iter()
        .map(|p| smooth_scalar_detailed(p, eta))
        .collect::<Result<Vec<_>>>()?;
    let kernel_widths = smoothed.iter().map(|s| s.kernel_width).collect();
    let smoothing_errors = smoothed.iter().map(|s| s.sup_error).collect();
    let smoothed: Vec<ScalarConvexFn> = smoothed.into_iter().map(|s| s.function).collect();
    stages.push(StageRecord {
        stage: 5,
        tag: "smooth",
        domains: domains(&smoothed),
    });

    let convexified = smoothed
        .iter()
        .map(|p| convexify_scalar(p, eta))
        .collect::<Result<Vec<_>>>()?;
    let final_domains = domains(&convexified);
    stages.push(StageRecord {
        stage: 6,
        tag: "convexify",
        domains: final_domains.clone(),
    });

    let strong_convexity = final_domains.iter().map(|[c, d]| 2.0 * eta / (d - c)).collect();
    let eps_for_solver = final_domains.iter().map(|d| d[0]).fold(f64::INFINITY, f64::min);
    let report = RegularizationReport {
        eta,
        cost_sup,
        min_fee,
        levels,
        branch,
        floor,
        stages,
        kernel_widths,
        smoothing_errors,
        strong_convexity,
        eps_for_solver,
    };
    Ok((SplittingFee::new(convexified)?, report))
}

/// Restricts each part to {f_i ≤ 2‖c‖∞ + min F − Σ_{j≠i} min f_j}; this
/// does not move the minimiser of any transport problem with that cost.
pub fn truncate(
    fee: &SplittingFee,
    min_fee: f64,
    cost_sup: f64,
) -> Result<(Vec<ScalarConvexFn>, Vec<f64>)> {
    let minimisers: Vec<f64> = fee.parts().iter().map(|p| p.response(0.0).0).collect();
    let minima: Vec<f64> = fee.parts().iter().zip(&minimisers).map(|(p, &x)| p.eval(x)).collect();
    let total: f64 = minima.iter().sum();
    let mut parts = Vec::with_capacity(fee.len());
    let mut levels = Vec::with_capacity(fee.len());
    for (i, part) in fee.parts().iter().enumerate() {
        let level = 2.0 * cost_sup + min_fee - (total - minima[i]);
        let [a, b] = part.domain();
        let x = minimisers[i];
        let below = |t: f64| part.eval(t) <= level;
        let lo = if below(a) { a } else { bisect_floats(a, x, below) };
        let hi = if below(b) {
            b
        } else {
            let first_above = bisect_floats(x, b, |t| !below(t));
            if first_above > x {
                f64::from_bits(first_above.to_bits() - 1).max(x)
            } else {
                x
            }
        };
        parts.push(part.restrict([lo, hi])?);
        levels.push(level);
    }
    Ok((parts, levels))
}

/// A singleton domain {y} with value K becomes K on [y−η, y+η] ∩ [0, 1].
fn widen(part: &ScalarConvexFn, eta: f64) -> Result<ScalarConvexFn> {
    let [a, b] = part.domain();
    if a < b {
        return Ok(part.clone());
    }
    let value = part.eval(a);
    Ok(ScalarConvexFn::indicator([(a - eta).max(0.0), (a + eta).min(1.0)])?.with_offset(value))
}
