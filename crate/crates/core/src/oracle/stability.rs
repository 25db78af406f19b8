//! How far the optimal allocation moves when the fee is perturbed, compared
//! against the square-root laws ‖w₁ − w₂‖² ≲ N·‖F₁ − F₂‖∞ (same domains) and
//! ‖w₁ − w₂‖² ≲ N·(2‖c‖∞√N·d_H + ω(d_H)) (nested domains, equal values).
//! The Lipschitz constant in those laws is not known, so it is fitted.

use serde::Serialize;

use super::{box_simplex_hausdorff, brute_force_minimize, hypercube_hausdorff_bound};
use crate::error::{Error, Result};
use crate::fees::{check_assumptions, ScalarConvexFn, SplittingFee};
use crate::geometry::{cost_sup_norm, TransportProblem};
use crate::solver::{damped_newton, SolveStatus, SolverConfig};

const SUP_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerMethod {
    Newton,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Equal domains, perturbation measured by the sup distance of the fees.
    Uniform,
    /// Different domains, perturbation measured by their Hausdorff distance.
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    /// Grid step for brute-force minimisation.
    pub grid_step: f64,
    pub zeta: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            grid_step: 1e-3,
            zeta: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub label: String,
    pub bound_form: BoundForm,
    /// ‖F₁ − F₂‖∞ or d_H(dom F₁, dom F₂).
    pub perturbation: f64,
    /// ω(d_H) of the second fee, for the domain form.
    pub modulus: Option<f64>,
    /// 4·Σ max(|a−c|, |b−d|) for the domain form.
    pub hypercube_bound: Option<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub method1: MinimizerMethod,
    pub method2: MinimizerMethod,
    pub distance: f64,
    /// The bound with the Lipschitz constant set to 1.
    pub unit_bound: f64,
    /// distance² / unit_bound: the smallest constant making the bound hold.
    pub fitted_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub runs: Vec<StabilityReport>,
    /// distance_k / distance_{k+1}.
    pub ratios: Vec<f64>,
    /// √(perturbation_k / perturbation_{k+1}).
    pub expected_ratios: Vec<f64>,
    /// Largest fitted constant over the ladder.
    pub fitted_constant: Option<f64>,
    /// Rungs where the distance shrank more than a factor 2 slower than √.
    pub flags: Vec<String>,
    pub pass: bool,
}

fn minimizer(
    problem: &TransportProblem,
    fee: &SplittingFee,
    options: &StabilityOptions,
) -> Result<(Vec<f64>, MinimizerMethod)> {
    if check_assumptions(fee).solver_ready() {
        let config = SolverConfig::new(fee.eps_floor()).with_zeta(options.zeta);
        let outcome = damped_newton(problem, fee, &vec![0.0; fee.len()], &config)?;
        if outcome.status != SolveStatus::Converged {
            return Err(Error::NotConverged {
                iterations: outcome.trace.newton_steps(),
                residual: outcome.trace.records.last().map_or(f64::NAN, |r| r.err_l2),
            });
        }
        Ok((outcome.w, MinimizerMethod::Newton))
    } else {
        let out = brute_force_minimize(problem, fee, options.grid_step)?;
        Ok((out.w, MinimizerMethod::BruteForce))
    }
}

fn samples(part: &ScalarConvexFn) -> impl Iterator<Item = f64> + '_ {
    let [a, b] = part.domain();
    (0..=SUP_SAMPLES).map(move |k| {
        if k == SUP_SAMPLES {
            b
        } else {
            a + (b - a) * k as f64 / SUP_SAMPLES as f64
        }
    })
}

/// Σ_i sup |f1_i − f2_i| over sampled points of the (shared) domains; an
/// upper estimate of ‖F₁ − F₂‖∞ on the simplex.
pub fn fee_sup_distance(fee1: &SplittingFee, fee2: &SplittingFee) -> Result<f64> {
    fee1.check_len(fee2.len())?;
    let mut total = 0.0;
    for (p, q) in fee1.parts().iter().zip(fee2.parts()) {
        if p.domain() != q.domain() {
            return Err(Error::invalid("fee.domain", "sup distance needs equal domains"));
        }
        total += samples(p)
            .map(|x| (p.eval(x) - q.eval(x)).abs())
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max);
    }
    Ok(total)
}

/// Σ_i sup_{|x−y| = t} |f_i(x) − f_i(y)| over sampled x; `None` where a
/// part is unbounded on its domain.
pub fn modulus_of_continuity(fee: &SplittingFee, t: f64) -> Option<f64> {
    let mut total = 0.0;
    for part in fee.parts() {
        let [a, b] = part.domain();
        let worst = samples(part)
            .map(|x| (part.eval(x) - part.eval((x + t).min(b).max(a))).abs())
            .fold(0.0, f64::max);
        if !worst.is_finite() {
            return None;
        }
        total += worst;
    }
    Some(total)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Solves both problems and relates the distance of the minimisers to the
/// size of the perturbation.
pub fn stability_experiment(
    problem: &TransportProblem,
    fee1: &SplittingFee,
    fee2: &SplittingFee,
    label: &str,
    options: &StabilityOptions,
) -> Result<StabilityReport> {
    let n = problem.n_sites();
    fee1.check_len(n)?;
    fee2.check_len(n)?;
    fee1.check_feasible()?;
    fee2.check_feasible()?;
    let (w1, method1) = minimizer(problem, fee1, options)?;
    let (w2, method2) = minimizer(problem, fee2, options)?;
    let dist = distance(&w1, &w2);
    let nf = n as f64;
    let d1: Vec<[f64; 2]> = fee1.parts().iter().map(|p| p.domain()).collect();
    let d2: Vec<[f64; 2]> = fee2.parts().iter().map(|p| p.domain()).collect();
    let (bound_form, perturbation, modulus, hypercube_bound, unit_bound) = if d1 == d2 {
        let sup = fee_sup_distance(fee1, fee2)?;
        (BoundForm::Uniform, sup, None, None, 16.0 * nf * sup)
    } else {
        let dh = box_simplex_hausdorff(&d1, &d2)?;
        let omega = modulus_of_continuity(fee2, dh);
        let cost_sup = cost_sup_norm(problem);
        let unit = 8.0 * nf * (2.0 * cost_sup * nf.sqrt() * dh + omega.unwrap_or(0.0));
        (
            BoundForm::Domain,
            dh,
            omega,
            Some(hypercube_hausdorff_bound(&d1, &d2)),
            unit,
        )
    };
    let fitted_constant = (unit_bound > 0.0).then(|| dist * dist / unit_bound);
    Ok(StabilityReport {
        label: label.to_string(),
        bound_form,
        perturbation,
        modulus,
        hypercube_bound,
        w1,
        w2,
        method1,
        method2,
        distance: dist,
        unit_bound,
        fitted_constant,
    })
}

/// Runs `fee` against `(1 + s)·fee` for each s, largest first, and checks
/// that the distance decays at least like the square root of the
/// perturbation, up to a factor 2.
pub fn stability_ladder(
    problem: &TransportProblem,
    fee: &SplittingFee,
    steps: &[f64],
    options: &StabilityOptions,
) -> Result<LadderReport> {
    if steps.len() < 2 {
        return Err(Error::invalid("steps", "a ladder needs at least two rungs"));
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) || steps.iter().any(|&s| s <= 0.0) {
        return Err(Error::invalid("steps", "rungs must be positive and strictly decreasing"));
    }
    let runs = steps
        .iter()
        .map(|&s| {
            let scaled = fee.scaled(1.0 + s)?;
            stability_experiment(problem, fee, &scaled, &format!("scale 1+{s}"), options)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ratios = Vec::new();
    let mut expected_ratios = Vec::new();
    let mut flags = Vec::new();
    for (k, pair) in runs.windows(2).enumerate() {
        let ratio = pair[0].distance / pair[1].distance;
        let expected = (pair[0].perturbation / pair[1].perturbation).sqrt();
        if !(ratio.is_finite() && ratio >= expected / 2.0) {
            flags.push(format!(
                "rung {k}: distance ratio {ratio:.4} is below half the square-root ratio {expected:.4}"
            ));
        }
        ratios.push(ratio);
        expected_ratios.push(expected);
    }
    let fitted_constant = runs
        .iter()
        .filter_map(|r| r.fitted_constant)
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))));
    Ok(LadderReport {
        pass: flags.is_empty(),
        runs,
        ratios,
        expected_ratios,
        fitted_constant,
        flags,
    })
}
