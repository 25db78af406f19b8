use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use sdot_core::fees::config::fee_to_config;
use sdot_core::io::{load_fee, load_problem, write_json, SolveResult};
use sdot_core::oracle::{
    brute_force_minimize, objective, stability_experiment, stability_ladder, StabilityOptions,
};
use sdot_core::solver::SolveStatus;
use sdot_core::{
    check_assumptions, cost_sup_norm, damped_newton, fee_value, regularize as regularize_fee,
    transport_summary, AssumptionReport, RegularizationReport, SolverConfig, SplittingFee,
    TransportProblem,
};

use crate::failure::Failure;
use crate::{InputArgs, SolveArgs};

fn load(input: &InputArgs) -> Result<(TransportProblem, SplittingFee), Failure> {
    let loaded = load_problem(&input.problem)?;
    let fee = match &input.fee {
        Some(path) => load_fee(path)?,
        None => loaded
            .fee
            .ok_or_else(|| Failure::malformed("fee", "the problem has no fee and --fee was not given"))?,
    };
    let n = loaded.problem.n_sites();
    if fee.len() != n {
        return Err(Failure::malformed(
            "fee",
            format!("fee has {} parts but the problem has {n} sites", fee.len()),
        ));
    }
    Ok((loaded.problem, fee))
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

/// Name of the first solver hypothesis the report fails.
fn failed_check(report: &AssumptionReport) -> &'static str {
    if report.eps_max <= 0.0 {
        "eps_max"
    } else if !report.strict_interior {
        "strict_interior"
    } else if report.strong_convexity_lb <= 0.0 {
        "strong_convexity"
    } else if !report.monotone_derivative {
        "monotone_derivative"
    } else {
        "essential_smoothness"
    }
}

fn assumption_failure(report: &AssumptionReport, message: &str) -> Failure {
    Failure::check(failed_check(report), message, to_value(report))
}

fn solver_config(fee: &SplittingFee, zeta: f64) -> SolverConfig {
    SolverConfig::new(fee.eps_floor()).with_zeta(zeta)
}

fn newton_w(problem: &TransportProblem, fee: &SplittingFee, zeta: f64) -> Result<Vec<f64>, Failure> {
    let report = check_assumptions(fee);
    if !report.solver_ready() {
        return Err(assumption_failure(&report, "fee does not meet the solver's hypotheses"));
    }
    let out = damped_newton(problem, fee, &vec![0.0; fee.len()], &solver_config(fee, zeta))?;
    if out.status != SolveStatus::Converged {
        let last = out.trace.records.last();
        return Err(Failure::IterationCap {
            iterations: out.trace.newton_steps(),
            residual: last.map_or(f64::NAN, |r| r.err_l2),
        });
    }
    Ok(out.w)
}

pub fn solve(args: &SolveArgs, out: &Path) -> Result<(), Failure> {
    let (problem, fee) = load(&args.input)?;
    let report = check_assumptions(&fee);
    let (fee, regularization) = if report.solver_ready() {
        (fee, None)
    } else if args.auto_regularize {
        let (fee, reg) = regularize_fee(&fee, args.eta, cost_sup_norm(&problem))?;
        let after = check_assumptions(&fee);
        if !after.solver_ready() {
            return Err(assumption_failure(&after, "regularized fee still fails the solver's hypotheses"));
        }
        (fee, Some(reg))
    } else {
        return Err(assumption_failure(
            &report,
            "fee does not meet the solver's hypotheses; pass --auto-regularize to regularize it first",
        ));
    };
    let eps_max = regularization
        .as_ref()
        .map_or(fee.eps_floor(), |r| r.eps_for_solver);
    let eps = args.eps.unwrap_or(eps_max);
    if eps > eps_max {
        return Err(Failure::check(
            "eps_max",
            format!("--eps {eps} exceeds the bound {eps_max} the fee guarantees"),
            Value::Null,
        ));
    }
    let mut config = SolverConfig::new(eps).with_zeta(args.zeta);
    config.eps0 = args.eps0;
    config.max_newton_iters = args.max_iters;

    let n = problem.n_sites();
    let outcome = damped_newton(&problem, &fee, &vec![0.0; n], &config)?;
    let trace_path = out.join("trace.csv");
    let file = File::create(&trace_path)
        .map_err(|e| Failure::malformed("out", format!("{}: {e}", trace_path.display())))?;
    outcome
        .trace
        .write_csv(BufWriter::new(file))
        .map_err(|e| Failure::malformed("out", format!("{}: {e}", trace_path.display())))?;

    let summary = transport_summary(&problem, &outcome.psi)?;
    let result = SolveResult {
        status: outcome.status,
        transport_cost: summary.cost,
        fee_value: fee_value(&fee, &outcome.w).finite().unwrap_or(f64::INFINITY),
        newton_steps: outcome.trace.newton_steps(),
        psi: outcome.psi,
        w: outcome.w,
        masses: outcome.masses,
        regularization,
    };
    write_json(&out.join("result.json"), &result)?;
    match result.status {
        SolveStatus::Converged => Ok(()),
        SolveStatus::IterationCap => Err(Failure::IterationCap {
            iterations: result.newton_steps,
            residual: outcome.trace.records.last().map_or(f64::NAN, |r| r.err_l2),
        }),
    }
}

#[derive(Serialize)]
struct RegularizationOutput<'a> {
    report: &'a RegularizationReport,
    assumptions: AssumptionReport,
}

pub fn regularize(input: &InputArgs, eta: f64, out: &Path) -> Result<(), Failure> {
    let (problem, fee) = load(input)?;
    let (regularized, report) = regularize_fee(&fee, eta, cost_sup_norm(&problem))?;
    let assumptions = check_assumptions(&regularized);
    write_json(&out.join("fee.json"), &fee_to_config(&regularized))?;
    write_json(
        &out.join("regularization.json"),
        &RegularizationOutput {
            report: &report,
            assumptions: assumptions.clone(),
        },
    )?;
    if !assumptions.all_pass() {
        return Err(assumption_failure(&assumptions, "regularized fee fails a hypothesis"));
    }
    Ok(())
}

pub fn oracle_compare(input: &InputArgs, grid_step: f64, zeta: f64, out: &Path) -> Result<(), Failure> {
    let (problem, fee) = load(input)?;
    let brute = brute_force_minimize(&problem, &fee, grid_step)?;
    let w = newton_w(&problem, &fee, zeta)?;
    let gap = w
        .iter()
        .zip(&brute.w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let tolerance = 2.0 * grid_step;
    let pass = gap <= tolerance;
    let report = json!({
        "grid_step": grid_step,
        "newton_w": w,
        "newton_objective": objective(&problem, &fee, &w)?,
        "brute_force_w": brute.w,
        "brute_force_objective": brute.objective,
        "feasible_points": brute.feasible_points,
        "sup_distance": gap,
        "tolerance": tolerance,
        "pass": pass,
    });
    write_json(&out.join("oracle.json"), &report)?;
    if !pass {
        return Err(Failure::check(
            "oracle_equivalence",
            format!("Newton and brute-force minimisers differ by {gap:.3e} > {tolerance:.3e}"),
            report,
        ));
    }
    Ok(())
}

pub fn stability(
    input: &InputArgs,
    fee2: Option<&Path>,
    steps: &[f64],
    grid_step: f64,
    zeta: f64,
    out: &Path,
) -> Result<(), Failure> {
    let (problem, fee) = load(input)?;
    let options = StabilityOptions { grid_step, zeta };
    let path = out.join("stability.json");
    match fee2 {
        Some(p) => {
            let other = load_fee(p)?;
            let report = stability_experiment(&problem, &fee, &other, &p.display().to_string(), &options)?;
            write_json(&path, &report)?;
            Ok(())
        }
        None => {
            let ladder = stability_ladder(&problem, &fee, steps, &options)?;
            write_json(&path, &ladder)?;
            if ladder.pass {
                Ok(())
            } else {
                Err(Failure::check(
                    "square_root_scaling",
                    ladder.flags.join("; "),
                    to_value(&ladder.ratios),
                ))
            }
        }
    }
}
