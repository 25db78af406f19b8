//! Seeded property suites behind `sdot verify`.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use sdot_core::fees::fstar_hessian;
use sdot_core::geometry::psi_spread_violations;
use sdot_core::io::write_json;
use sdot_core::oracle::brute_force_minimize;
use sdot_core::regularize::smooth_scalar_detailed;
use sdot_core::solver::{ShuffleOptions, SolveStatus};
use sdot_core::{
    cell_masses, check_assumptions, conjugate_solve, cost_sup_norm, damped_newton,
    parameter_shuffle, phi_gradient, regularize, ScalarConvexFn, SolverConfig, SplittingFee,
    TransportProblem,
};

use crate::failure::Failure;
use crate::instances::{line_problem, plane_problem, quadratic_fee, random_psi, rng, smooth_fee};
use crate::Suite;

#[derive(Debug, Serialize)]
struct Property {
    suite: &'static str,
    property: &'static str,
    instances: usize,
    /// Worst value observed; compared against `tolerance`.
    measured: f64,
    tolerance: f64,
    pass: bool,
}

impl Property {
    fn at_most(suite: &'static str, property: &'static str, instances: usize, measured: f64, tolerance: f64) -> Self {
        Self {
            suite,
            property,
            instances,
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    seed: u64,
    grid_step: f64,
    properties: Vec<Property>,
    pass: bool,
}

type Outcome = Result<Vec<Property>, Failure>;
type SuiteFn = fn(u64, f64) -> Outcome;

pub fn run(suite: Suite, seed: u64, grid_step: f64, out: &Path) -> Result<(), Failure> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Failure::malformed("grid_step", format!("must lie in (0, 0.1], got {grid_step}")));
    }
    let suites: &[(Suite, SuiteFn)] = &[
        (Suite::Geometry, geometry),
        (Suite::Fees, fees),
        (Suite::Solver, solver),
        (Suite::Shuffle, shuffle),
        (Suite::Regularize, regularization),
        (Suite::Oracle, oracle),
    ];
    let mut properties = Vec::new();
    for (which, body) in suites {
        if suite == Suite::All || suite == *which {
            properties.extend(body(seed, grid_step)?);
        }
    }
    let pass = properties.iter().all(|p| p.pass);
    let failed: Vec<&str> = properties.iter().filter(|p| !p.pass).map(|p| p.property).collect();
    write_json(
        &out.join("verify.json"),
        &VerifyReport {
            seed,
            grid_step,
            properties,
            pass,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(Failure::check(
            failed.join(","),
            "one or more properties failed; see verify.json",
            serde_json::json!(failed),
        ))
    }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn mixed_problem(seed: u64, k: u64) -> (TransportProblem, rand_chacha::ChaCha8Rng) {
    let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(k));
    let n = r.random_range(2..6);
    let problem = if k.is_multiple_of(2) {
        line_problem(&mut r, n)
    } else {
        plane_problem(&mut r, n, 24)
    };
    (problem, r)
}

fn geometry(seed: u64, _: f64) -> Outcome {
    let count = 20;
    let mut sum_err: f64 = 0.0;
    let mut shift_err: f64 = 0.0;
    for k in 0..count {
        let (problem, mut r) = mixed_problem(seed, k);
        let n = problem.n_sites();
        let psi = random_psi(&mut r, n, 0.2);
        let masses = cell_masses(&problem, &psi)?;
        sum_err = sum_err.max((masses.iter().sum::<f64>() - 1.0).abs());
        let t = r.random_range(-1.0..1.0);
        let moved: Vec<f64> = psi.iter().map(|p| p + t).collect();
        shift_err = shift_err.max(sup_gap(&masses, &cell_masses(&problem, &moved)?));
    }
    Ok(vec![
        Property::at_most("geometry", "masses_sum_to_one", count as usize, sum_err, 1e-10),
        Property::at_most("geometry", "masses_shift_invariant", count as usize, shift_err, 1e-10),
    ])
}

fn fees(seed: u64, _: f64) -> Outcome {
    let count = 100;
    let mut worst = [0.0f64; 4];
    for k in 0..count {
        let mut r = rng(seed.wrapping_mul(7919).wrapping_add(k));
        let n = r.random_range(2..7);
        let fee = smooth_fee(&mut r, n);
        let psi = random_psi(&mut r, n, 1.0);
        let base = conjugate_solve(&fee, &psi)?;
        let hess = fstar_hessian(&fee, &psi)?;
        let h = 1e-6;
        for j in 0..n {
            let mut plus = psi.clone();
            let mut minus = psi.clone();
            plus[j] += h;
            minus[j] -= h;
            let up = conjugate_solve(&fee, &plus)?;
            let down = conjugate_solve(&fee, &minus)?;
            worst[0] = worst[0].max(((up.fstar - down.fstar) / (2.0 * h) - base.w[j]).abs());
            for i in 0..n {
                worst[1] = worst[1].max(((up.w[i] - down.w[i]) / (2.0 * h) - hess[(i, j)]).abs());
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| hess[(i, j)]).sum();
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| hess[(i, j)].abs()).sum();
            worst[2] = worst[2].max(row.abs());
            worst[3] = worst[3].max((hess[(i, i)].abs() - off).abs());
        }
    }
    let c = count as usize;
    Ok(vec![
        Property::at_most("fees", "gradient_matches_finite_differences", c, worst[0], 1e-6),
        Property::at_most("fees", "hessian_matches_finite_differences", c, worst[1], 1e-5),
        Property::at_most("fees", "hessian_rows_sum_to_zero", c, worst[2], 1e-10),
        Property::at_most("fees", "hessian_diagonal_dominance_is_tight", c, worst[3], 1e-9),
    ])
}

fn solver(seed: u64, _: f64) -> Outcome {
    let problem = TransportProblem::unit_interval(&[0.25, 0.85], 1.0, 100)?;
    let half = SplittingFee::uniform(ScalarConvexFn::quadratic(0.0, 1.0, [0.0, 1.0])?, 2)?;
    let fixed = damped_newton(&problem, &half, &[0.0, 0.0], &SolverConfig::new(0.1).with_zeta(1e-10))?;
    let fixed_gap = (fixed.w[0] - 0.51875).abs();

    let count = 12;
    let mut contract = 0.0;
    let mut floor = 0.0;
    let mut spread = 0.0;
    let mut unconverged = 0.0;
    for k in 0..count {
        let (problem, mut r) = mixed_problem(seed.wrapping_add(17), k);
        let n = problem.n_sites();
        let fee = quadratic_fee(&mut r, n, 0.04);
        let config = SolverConfig::new(0.04);
        let eps0 = config.effective_eps0(n);
        let psi0 = random_psi(&mut r, n, 0.5);
        let out = damped_newton(&problem, &fee, &psi0, &config)?;
        if out.status != SolveStatus::Converged {
            unconverged += 1.0;
        }
        let cost_sup = cost_sup_norm(&problem);
        for pair in out.trace.records.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let ell = next.ell.unwrap_or(0) as i32;
            if next.err_l1 > (1.0 - 0.5f64.powi(ell + 1)) * prev.err_l1_shuffled {
                contract += 1.0;
            }
            if next.min_mass < eps0 {
                floor += 1.0;
            }
        }
        for rec in &out.trace.records {
            spread += psi_spread_violations(&rec.psi, &rec.masses, cost_sup).len() as f64;
            spread += psi_spread_violations(&rec.psi_shuffled, &rec.masses_shuffled, cost_sup).len() as f64;
        }
    }
    let c = count as usize;
    Ok(vec![
        Property::at_most("solver", "two_site_fixed_point", 1, fixed_gap, 1e-8),
        Property::at_most("solver", "runs_converge", c, unconverged, 0.0),
        Property::at_most("solver", "step_contract_violations", c, contract, 0.0),
        Property::at_most("solver", "mass_floor_violations", c, floor, 0.0),
        Property::at_most("solver", "psi_spread_violations", c, spread, 0.0),
    ])
}

fn shuffle(seed: u64, _: f64) -> Outcome {
    let count = 100;
    let mut failures = 0.0;
    let mut worst_increase = f64::NEG_INFINITY;
    for k in 0..count {
        let mut r = rng(seed.wrapping_mul(104_729).wrapping_add(k));
        let n = r.random_range(2..8);
        let problem = line_problem(&mut r, n);
        let tol = r.random_range(0.2..0.9) / (3.0 * n as f64);
        let fee = quadratic_fee(&mut r, n, 3.0 * tol);
        let psi = random_psi(&mut r, n, 1.0);
        let before = phi_gradient(&problem, &fee, &psi)?;
        let Ok(out) = parameter_shuffle(&problem, &psi, tol, &ShuffleOptions::default()) else {
            failures += 1.0;
            continue;
        };
        let after = phi_gradient(&problem, &fee, &out.psi)?;
        let increase = l1(&after.grad) - l1(&before.grad);
        worst_increase = worst_increase.max(increase);
        if after.masses.iter().any(|&m| m <= tol) || increase > 1e-12 {
            failures += 1.0;
        }
    }
    let c = count as usize;
    Ok(vec![
        Property::at_most("shuffle", "failed_instances", c, failures, 0.0),
        Property::at_most("shuffle", "residual_increase", c, worst_increase, 1e-12),
    ])
}

fn regularization(seed: u64, _: f64) -> Outcome {
    let point = SplittingFee::point(&[0.3, 0.3, 0.4])?;
    let problem = TransportProblem::unit_interval(&[0.2, 0.5, 0.8], 0.5, 200)?;
    let cost_sup = cost_sup_norm(&problem);
    let mut failing = 0.0;
    let etas = [0.1, 0.05, 0.025];
    for eta in etas {
        let (fee, _) = regularize(&point, eta, cost_sup)?;
        if !check_assumptions(&fee).all_pass() {
            failing += 1.0;
        }
    }
    let count = 50;
    let mut excess: f64 = f64::NEG_INFINITY;
    for k in 0..count {
        let mut r = rng(seed.wrapping_mul(31).wrapping_add(k));
        let m = r.random_range(3..12);
        let knots: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let mut slope = r.random_range(-3.0..0.0);
        let mut values = vec![r.random_range(0.0..1.0)];
        for w in knots.windows(2) {
            let last = *values.last().expect("nonempty");
            values.push(last + slope * (w[1] - w[0]));
            slope += r.random_range(0.0..2.0);
        }
        let f = ScalarConvexFn::tabulated(knots, values, [0.0, 1.0])?;
        let eta = r.random_range(0.01..0.2);
        let s = smooth_scalar_detailed(&f, eta)?;
        excess = excess.max(s.sup_error - eta);
    }
    Ok(vec![
        Property::at_most("regularize", "point_fee_outputs_failing_checks", etas.len(), failing, 0.0),
        Property::at_most("regularize", "smoothing_error_beyond_eta", count as usize, excess, 0.0),
    ])
}

fn oracle(seed: u64, grid_step: f64) -> Outcome {
    let count = 6;
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let mut r = rng(seed.wrapping_mul(65_537).wrapping_add(k));
        let n = 2 + (k % 2) as usize;
        let problem = line_problem(&mut r, n);
        let fee = quadratic_fee(&mut r, n, 0.05);
        let config = SolverConfig::new(fee.eps_floor()).with_zeta(1e-11);
        let w = damped_newton(&problem, &fee, &vec![0.0; n], &config)?.w;
        let brute = brute_force_minimize(&problem, &fee, grid_step)?;
        worst = worst.max(sup_gap(&w, &brute.w));
    }
    Ok(vec![Property::at_most(
        "oracle",
        "newton_matches_brute_force",
        count as usize,
        worst,
        2.0 * grid_step,
    )])
}
