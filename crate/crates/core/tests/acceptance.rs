//! End-to-end acceptance checks. Runs without the test harness so that the
//! PASS/FAIL line of every criterion is always printed.

mod common;

use std::time::{Duration, Instant};

use common::{l1, line_problem, quadratic_fee, random_psi, rng, smooth_fee};
use rand::Rng;
use sdot_core::fees::fstar_hessian;
use sdot_core::geometry::psi_spread_violations;
use sdot_core::oracle::{brute_force_minimize, stability_ladder, StabilityOptions};
use sdot_core::solver::{IterationRecord, ShuffleOptions, SolveStatus};
use sdot_core::{
    conjugate_solve, cost_sup_norm, damped_newton, parameter_shuffle, phi_gradient, regularize,
    Backend, DensityField, DomainSpec, QuadraticCost, ScalarConvexFn, SiteSet, SolverConfig,
    SplittingFee, TransportProblem,
};

const FIXED_POINT_W1: f64 = 0.51875;
const FIXED_POINT_TOL: f64 = 1e-8;
const FIXED_POINT_BUDGET: Duration = Duration::from_secs(1);

const ORACLE_INSTANCES: u64 = 20;
const ORACLE_GRID_STEP: f64 = 1e-4;
const ORACLE_TOL: f64 = 2e-4;
const ORACLE_BUDGET: Duration = Duration::from_secs(120);

const PLANE_SITES: usize = 10;
const PLANE_RESOLUTION: usize = 256;
const PLANE_EPS: f64 = 0.02;
const PLANE_ZETA: f64 = 1e-8;
const PLANE_MAX_ITERS: usize = 60;
const PLANE_BUDGET: Duration = Duration::from_secs(60);
const TAIL_ORDER: f64 = 1.8;

const CONJUGATE_PAIRS: u64 = 100;
const GRADIENT_FD_TOL: f64 = 1e-6;
const HESSIAN_FD_TOL: f64 = 1e-5;
const ROW_SUM_TOL: f64 = 1e-10;
const DOMINANCE_TOL: f64 = 1e-9;

const SHUFFLE_INSTANCES: u64 = 100;
const SHUFFLE_SLACK: f64 = 1e-12;

const POINT_FEE: [f64; 3] = [0.3, 0.3, 0.4];
const ETA_LADDER: [f64; 3] = [0.1, 0.05, 0.025];
const ETA_FACTOR: f64 = 0.2;

const SCALING_STEPS: [f64; 4] = [0.04, 0.01, 0.0025, 0.000625];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Iterates of one solve, kept for the ψ-spread check.
struct Run {
    label: String,
    cost_sup: f64,
    records: Vec<IterationRecord>,
}

impl Run {
    fn new(label: impl Into<String>, problem: &TransportProblem, records: Vec<IterationRecord>) -> Self {
        Self {
            label: label.into(),
            cost_sup: cost_sup_norm(problem),
            records,
        }
    }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn half_squares(n: usize) -> SplittingFee {
    SplittingFee::uniform(ScalarConvexFn::quadratic(0.0, 1.0, [0.0, 1.0]).unwrap(), n).unwrap()
}

fn fixed_point(runs: &mut Vec<Run>) -> Verdict {
    let start = Instant::now();
    let problem = TransportProblem::unit_interval(&[0.25, 0.85], 1.0, 100).unwrap();
    let config = SolverConfig::new(0.1).with_zeta(1e-10);
    let out = damped_newton(&problem, &half_squares(2), &[0.0, 0.0], &config).unwrap();
    let elapsed = start.elapsed();
    let gap = (out.w[0] - FIXED_POINT_W1).abs();
    let pass = out.status == SolveStatus::Converged
        && gap <= FIXED_POINT_TOL
        && elapsed < FIXED_POINT_BUDGET;
    runs.push(Run::new("fixed point", &problem, out.trace.records));
    Verdict::new(
        pass,
        format!("w1 = {:.12}, |w1 - 0.51875| = {gap:.2e}, {elapsed:.2?}", out.w[0]),
    )
}

fn oracle_equivalence(runs: &mut Vec<Run>) -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for seed in 0..ORACLE_INSTANCES {
        let mut r = rng(1000 + seed);
        let n = 2 + (seed % 2) as usize;
        let problem = line_problem(&mut r, n, true);
        let fee = quadratic_fee(&mut r, n, 0.05);
        let config = SolverConfig::new(fee.eps_floor()).with_zeta(1e-11);
        let out = damped_newton(&problem, &fee, &vec![0.0; n], &config).unwrap();
        converged &= out.status == SolveStatus::Converged;
        let brute = brute_force_minimize(&problem, &fee, ORACLE_GRID_STEP).unwrap();
        worst = worst.max(sup_gap(&out.w, &brute.w));
        runs.push(Run::new(format!("oracle seed {seed}"), &problem, out.trace.records));
    }
    let elapsed = start.elapsed();
    Verdict::new(
        converged && worst <= ORACLE_TOL && elapsed < ORACLE_BUDGET,
        format!("max |w_newton - w_brute| = {worst:.2e} over {ORACLE_INSTANCES} instances, {elapsed:.2?}"),
    )
}

fn plane_sites() -> Vec<[f64; 2]> {
    let mut r = rng(2024);
    let mut points: Vec<[f64; 2]> = Vec::new();
    while points.len() < PLANE_SITES {
        let p = [r.random_range(0.05..0.95), r.random_range(0.05..0.95)];
        if points.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.1) {
            points.push(p);
        }
    }
    points
}

fn plane_instance(lipschitz_density: bool) -> (TransportProblem, SplittingFee) {
    let domain = DomainSpec::unit_square(PLANE_RESOLUTION).unwrap();
    let density = if lipschitz_density {
        DensityField::from_fn(&domain, 1.0, |p| 1.0 + 0.5 * p[0] + 0.25 * (p[0] - p[1]).abs()).unwrap()
    } else {
        DensityField::uniform(&domain)
    };
    let problem = TransportProblem::new(
        domain,
        density,
        SiteSet::new(plane_sites()).unwrap(),
        QuadraticCost::default(),
        Backend::Exact,
    )
    .unwrap();
    let part = ScalarConvexFn::quadratic(0.1, 1.0, [PLANE_EPS, 1.0]).unwrap();
    (problem, SplittingFee::uniform(part, PLANE_SITES).unwrap())
}

fn plane_config() -> SolverConfig {
    let mut config = SolverConfig::new(PLANE_EPS).with_zeta(PLANE_ZETA);
    config.max_newton_iters = PLANE_MAX_ITERS;
    config
}

/// Checks the logged step contract and the mass floor on one trace.
fn contract_violations(records: &[IterationRecord], eps0: f64) -> usize {
    records
        .windows(2)
        .filter(|pair| {
            let (prev, next) = (&pair[0], &pair[1]);
            let ell = next.ell.unwrap() as i32;
            let factor = 1.0 - 0.5f64.powi(ell + 1);
            next.err_l1 > factor * prev.err_l1_shuffled || next.min_mass < eps0
        })
        .count()
}

fn linear_rate(runs: &mut Vec<Run>) -> Verdict {
    let (problem, fee) = plane_instance(false);
    let config = plane_config();
    let eps0 = config.effective_eps0(PLANE_SITES);
    let start = Instant::now();
    let out = damped_newton(&problem, &fee, &[0.0; PLANE_SITES], &config).unwrap();
    let elapsed = start.elapsed();
    let steps = out.trace.newton_steps();
    let violations = contract_violations(&out.trace.records, eps0);
    let pass = out.status == SolveStatus::Converged
        && violations == 0
        && steps <= PLANE_MAX_ITERS
        && elapsed < PLANE_BUDGET;
    runs.push(Run::new("plane uniform", &problem, out.trace.records));
    Verdict::new(
        pass,
        format!("{steps} Newton steps, {violations} contract violations, {elapsed:.2?}"),
    )
}

/// Empirical order log(e₃/e₂) / log(e₂/e₁) over the last three residuals.
fn superlinear_tail(runs: &mut Vec<Run>) -> Verdict {
    let (problem, fee) = plane_instance(true);
    let config = plane_config();
    let eps0 = config.effective_eps0(PLANE_SITES);
    let start = Instant::now();
    let out = damped_newton(&problem, &fee, &[0.0; PLANE_SITES], &config).unwrap();
    let elapsed = start.elapsed();
    let records = &out.trace.records;
    let violations = contract_violations(records, eps0);
    let e: Vec<f64> = records.iter().map(|r| r.err_l1).collect();
    let tail = &e[e.len().saturating_sub(3)..];
    let (order, constant) = if tail.len() == 3 {
        let order = (tail[2] / tail[1]).ln() / (tail[1] / tail[0]).ln();
        (order, tail[2] / tail[1].powf(TAIL_ORDER))
    } else {
        (f64::NAN, f64::NAN)
    };
    let pass = out.status == SolveStatus::Converged
        && violations == 0
        && order >= TAIL_ORDER
        && elapsed < PLANE_BUDGET;
    runs.push(Run::new("plane lipschitz", &problem, out.trace.records.clone()));
    Verdict::new(
        pass,
        format!(
            "tail residuals {}, observed order {order:.3}, fitted C = {constant:.3e}, {} steps, {elapsed:.2?}",
            sci(tail),
            out.trace.newton_steps()
        ),
    )
}

fn conjugate_machinery() -> Verdict {
    let mut worst = [0.0f64; 4];
    for seed in 0..CONJUGATE_PAIRS {
        let mut r = rng(5000 + seed);
        let n = r.random_range(2..7);
        let fee = smooth_fee(&mut r, n);
        let psi = random_psi(&mut r, n, 1.0);
        let base = conjugate_solve(&fee, &psi).unwrap();
        let hess = fstar_hessian(&fee, &psi).unwrap();
        let h = 1e-6;
        for j in 0..n {
            let mut plus = psi.clone();
            let mut minus = psi.clone();
            plus[j] += h;
            minus[j] -= h;
            let up = conjugate_solve(&fee, &plus).unwrap();
            let down = conjugate_solve(&fee, &minus).unwrap();
            let fd = (up.fstar - down.fstar) / (2.0 * h);
            worst[0] = worst[0].max((fd - base.w[j]).abs());
            for i in 0..n {
                let fd = (up.w[i] - down.w[i]) / (2.0 * h);
                worst[1] = worst[1].max((fd - hess[(i, j)]).abs());
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| hess[(i, j)]).sum();
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| hess[(i, j)].abs()).sum();
            worst[2] = worst[2].max(row.abs());
            worst[3] = worst[3].max((hess[(i, i)].abs() - off).abs());
        }
    }
    let pass = worst[0] <= GRADIENT_FD_TOL
        && worst[1] <= HESSIAN_FD_TOL
        && worst[2] <= ROW_SUM_TOL
        && worst[3] <= DOMINANCE_TOL;
    Verdict::new(
        pass,
        format!(
            "gradient fd {:.1e}, hessian fd {:.1e}, row sum {:.1e}, dominance gap {:.1e} over {CONJUGATE_PAIRS} pairs",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn shuffle_guarantees(runs: &mut Vec<Run>) -> Verdict {
    let mut failures = 0;
    let mut revived = 0;
    let mut worst_increase = f64::NEG_INFINITY;
    for seed in 0..SHUFFLE_INSTANCES {
        let mut r = rng(7000 + seed);
        let n = r.random_range(2..8);
        let problem = line_problem(&mut r, n, true);
        let tol = r.random_range(0.2..0.9) / (3.0 * n as f64);
        let fee = quadratic_fee(&mut r, n, 3.0 * tol);
        let psi = random_psi(&mut r, n, 1.0);
        let before = phi_gradient(&problem, &fee, &psi).unwrap();
        let Ok(out) = parameter_shuffle(&problem, &psi, tol, &ShuffleOptions::default()) else {
            failures += 1;
            continue;
        };
        let after = phi_gradient(&problem, &fee, &out.psi).unwrap();
        let increase = l1(&after.grad) - l1(&before.grad);
        worst_increase = worst_increase.max(increase);
        if out.steps > 0 {
            revived += 1;
        }
        if after.masses.iter().any(|&m| m <= tol) || increase > SHUFFLE_SLACK {
            failures += 1;
        }
        let mut record = runs_record(&psi, &before.masses);
        record.psi_shuffled = out.psi;
        record.masses_shuffled = after.masses;
        runs.push(Run::new(format!("shuffle seed {seed}"), &problem, vec![record]));
    }
    Verdict::new(
        failures == 0,
        format!(
            "{failures} failures, {revived} instances needed moves, largest residual change {worst_increase:.2e}"
        ),
    )
}

fn runs_record(psi: &[f64], masses: &[f64]) -> IterationRecord {
    IterationRecord {
        k: 0,
        err_l1: f64::NAN,
        err_l2: f64::NAN,
        ell: None,
        min_mass: masses.iter().copied().fold(f64::INFINITY, f64::min),
        masses: masses.to_vec(),
        psi: psi.to_vec(),
        shuffle_steps: 0,
        psi_shuffled: Vec::new(),
        masses_shuffled: Vec::new(),
        err_l1_shuffled: f64::NAN,
        elapsed_ms: 0.0,
    }
}

fn regularization_trend(runs: &mut Vec<Run>) -> Verdict {
    let problem = TransportProblem::unit_interval(&[0.2, 0.5, 0.8], 0.5, 200).unwrap();
    let fee = SplittingFee::point(&POINT_FEE).unwrap();
    let cost_sup = cost_sup_norm(&problem);
    let mut distances = Vec::new();
    let mut pass = true;
    for &eta in &ETA_LADDER {
        let (reg, report) = regularize(&fee, eta, cost_sup).unwrap();
        let config = SolverConfig::new(report.eps_for_solver).with_zeta(1e-11);
        let out = damped_newton(&problem, &reg, &[0.0; 3], &config).unwrap();
        pass &= out.status == SolveStatus::Converged;
        let d = common::dist(&out.w, &POINT_FEE);
        pass &= d <= ETA_FACTOR * eta.sqrt();
        distances.push(d);
        runs.push(Run::new(format!("regularised eta {eta}"), &problem, out.trace.records));
    }
    pass &= distances.windows(2).all(|w| w[1] <= w[0]);
    let bounds: Vec<f64> = ETA_LADDER.iter().map(|e| ETA_FACTOR * e.sqrt()).collect();
    Verdict::new(
        pass,
        format!("|w_eta - a| = {} against 0.2*sqrt(eta) = {}", sci(&distances), sci(&bounds)),
    )
}

fn stability_scaling() -> Verdict {
    let problem = TransportProblem::unit_interval(&[0.2, 0.55, 0.9], 0.5, 200).unwrap();
    let fee = SplittingFee::new(vec![
        ScalarConvexFn::quadratic(0.1, 1.0, [0.05, 1.0]).unwrap(),
        ScalarConvexFn::quadratic(0.5, 2.0, [0.05, 1.0]).unwrap(),
        ScalarConvexFn::quadratic(0.2, 0.5, [0.05, 1.0]).unwrap(),
    ])
    .unwrap();
    let report = stability_ladder(&problem, &fee, &SCALING_STEPS, &StabilityOptions::default()).unwrap();
    Verdict::new(
        report.pass,
        format!(
            "distance ratios {:.3?} against square-root ratios {:.3?}, fitted constant {:.3e}",
            report.ratios,
            report.expected_ratios,
            report.fitted_constant.unwrap_or(f64::NAN)
        ),
    )
}

fn psi_spread(runs: &[Run]) -> Verdict {
    let mut checked = 0;
    let mut bad = Vec::new();
    for run in runs {
        for rec in &run.records {
            let mut pairs = vec![(&rec.psi, &rec.masses)];
            if !rec.psi_shuffled.is_empty() {
                pairs.push((&rec.psi_shuffled, &rec.masses_shuffled));
            }
            for (psi, masses) in pairs {
                checked += 1;
                if !psi_spread_violations(psi, masses, run.cost_sup).is_empty() {
                    bad.push(format!("{} k={}", run.label, rec.k));
                }
            }
        }
    }
    Verdict::new(
        bad.is_empty(),
        format!("{checked} iterates from {} runs checked, violations: {bad:?}", runs.len()),
    )
}

fn main() {
    let mut runs = Vec::new();
    let verdicts = vec![
        ("1 fixed point", fixed_point(&mut runs)),
        ("2 oracle equivalence", oracle_equivalence(&mut runs)),
        ("3 linear rate", linear_rate(&mut runs)),
        ("4 superlinear tail", superlinear_tail(&mut runs)),
        ("5 conjugate machinery", conjugate_machinery()),
        ("6 shuffle guarantees", shuffle_guarantees(&mut runs)),
        ("8 regularization trend", regularization_trend(&mut runs)),
        ("9 stability scaling", stability_scaling()),
    ];
    let spread = psi_spread(&runs);
    let mut lines: Vec<(&str, Verdict)> = verdicts;
    lines.insert(6, ("7 psi spread", spread));
    for (name, v) in &lines {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<&str> = lines.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
