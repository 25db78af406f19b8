use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::{parameter_shuffle, Eval, SolverConfig};
use crate::error::{BacktrackFailure, Error, Result};
use crate::fees::{conjugate_solve, hessian_at, SplittingFee};
use crate::geometry::{laguerre_jacobian, JacobianOptions, TransportProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// ‖∇Φ(ψ_k)‖₁ at the iterate as produced by the previous step.
    pub err_l1: f64,
    pub err_l2: f64,
    /// Accepted step exponent; `None` for the starting point.
    pub ell: Option<u32>,
    pub min_mass: f64,
    pub masses: Vec<f64>,
    pub psi: Vec<f64>,
    /// Coordinate moves made by the shuffle before the next Newton step.
    pub shuffle_steps: usize,
    pub psi_shuffled: Vec<f64>,
    pub masses_shuffled: Vec<f64>,
    /// ‖∇Φ‖₁ after the shuffle; the next step is measured against this.
    pub err_l1_shuffled: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl SolveTrace {
    pub fn newton_steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "err_l1", "err_l2", "ell", "min_mass", "shuffle_steps", "elapsed_ms"])?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                format!("{:e}", r.err_l1),
                format!("{:e}", r.err_l2),
                r.ell.map(|l| l.to_string()).unwrap_or_default(),
                format!("{:e}", r.min_mass),
                r.shuffle_steps.to_string(),
                format!("{:.3}", r.elapsed_ms),
            ])?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub psi: Vec<f64>,
    /// ∇F*(ψ) at the returned point.
    pub w: Vec<f64>,
    /// G(ψ) at the returned point.
    pub masses: Vec<f64>,
    pub status: SolveStatus,
    pub trace: SolveTrace,
}

/// The symmetrised D²Φ = DG − D²F* at ψ, given G and ∇F* there.
fn phi_hessian(
    problem: &TransportProblem,
    fee: &SplittingFee,
    psi: &[f64],
    w: &[f64],
    config: Option<&SolverConfig>,
) -> Result<DMatrix<f64>> {
    let mut options = JacobianOptions::default_for(problem);
    if let Some(method) = config.and_then(|c| c.jacobian) {
        options.method = method;
    }
    let dg = laguerre_jacobian(problem, psi, &options)?;
    let h = hessian_at(fee, w)?;
    let m = dg - h;
    Ok((&m + m.transpose()) * 0.5)
}

/// Least-norm solution of D²Φ d = −∇Φ on the mean-zero subspace.
pub fn newton_direction(hessian: &DMatrix<f64>, grad: &[f64]) -> Result<Vec<f64>> {
    let n = grad.len();
    let sigma = hessian.amax().max(f64::MIN_POSITIVE);
    // shifting the constant direction away from zero makes the system regular
    let shifted = hessian - DMatrix::from_element(n, n, sigma / n as f64);
    let rhs = -DVector::from_column_slice(grad);
    let d = shifted.lu().solve(&rhs).ok_or(Error::SingularHessian)?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let mean = d.mean();
    Ok(d.iter().map(|v| v - mean).collect())
}

/// Orthonormal basis of the hyperplane orthogonal to (1, …, 1).
fn helmert_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, k| {
        let k1 = (k + 1) as f64;
        let norm = (k1 * (k1 + 1.0)).sqrt();
        if i <= k {
            1.0 / norm
        } else if i == k + 1 {
            -k1 / norm
        } else {
            0.0
        }
    })
}

/// Smallest eigenvalue of −D²Φ(ψ) on the hyperplane orthogonal to 1.
pub fn estimate_kappa(problem: &TransportProblem, fee: &SplittingFee, psi: &[f64]) -> Result<f64> {
    fee.check_len(problem.n_sites())?;
    let n = psi.len();
    if n < 2 {
        return Ok(f64::INFINITY);
    }
    let w = conjugate_solve(fee, psi)?.w;
    let m = phi_hessian(problem, fee, psi, &w, None)?;
    let q = helmert_basis(n);
    let restricted = q.transpose() * (-m) * &q;
    let eig = SymmetricEigen::new(restricted);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn record(k: usize, ell: Option<u32>, psi: &[f64], ev: &Eval, start: Instant) -> IterationRecord {
    IterationRecord {
        k,
        err_l1: ev.l1(),
        err_l2: ev.l2(),
        ell,
        min_mass: ev.min_mass(),
        masses: ev.masses.clone(),
        psi: psi.to_vec(),
        shuffle_steps: 0,
        psi_shuffled: psi.to_vec(),
        masses_shuffled: ev.masses.clone(),
        err_l1_shuffled: ev.l1(),
        elapsed_ms: elapsed_ms(start),
    }
}

/// Damped Newton ascent on Φ with a parameter shuffle before every step.
///
/// The caller is responsible for the fee meeting the solver's hypotheses;
/// when it does not, the usual symptom is [`Error::BacktrackExhausted`].
pub fn damped_newton(
    problem: &TransportProblem,
    fee: &SplittingFee,
    psi0: &[f64],
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let n = problem.n_sites();
    fee.check_len(n)?;
    if psi0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "psi0",
            expected: n,
            got: psi0.len(),
        });
    }
    config.validate(n)?;
    let eps0 = config.effective_eps0(n);
    let start = Instant::now();

    let mut psi = psi0.to_vec();
    let mut ev = Eval::new(problem, fee, &psi)?;
    let mut records = vec![record(0, None, &psi, &ev, start)];
    let status = loop {
        if ev.l2() < config.zeta {
            break SolveStatus::Converged;
        }
        let k = records.len() - 1;
        if k >= config.max_newton_iters {
            break SolveStatus::IterationCap;
        }

        // Step 1
        let shuffled = parameter_shuffle(problem, &psi, 2.0 * eps0, &config.shuffle)?;
        if shuffled.steps > 0 {
            psi = shuffled.psi;
            ev = Eval::new(problem, fee, &psi)?;
        }
        let last = records.last_mut().unwrap();
        last.shuffle_steps = shuffled.steps;
        last.psi_shuffled = psi.clone();
        last.masses_shuffled = ev.masses.clone();
        last.err_l1_shuffled = ev.l1();

        // Step 2
        let hessian = phi_hessian(problem, fee, &psi, &ev.w, Some(config))?;
        let d = newton_direction(&hessian, &ev.grad)?;

        // Step 3
        let base = ev.l1();
        let mut accepted = None;
        for ell in 0..=config.max_backtrack {
            let t = 0.5f64.powi(ell as i32);
            let cand: Vec<f64> = psi.iter().zip(&d).map(|(p, di)| p + t * di).collect();
            let cand_ev = Eval::new(problem, fee, &cand)?;
            let factor = 1.0 - 0.5f64.powi(ell as i32 + 1);
            if cand_ev.min_mass() >= eps0 && cand_ev.l1() <= factor * base {
                accepted = Some((ell, cand, cand_ev));
                break;
            }
        }
        let Some((ell, cand, cand_ev)) = accepted else {
            return Err(Error::BacktrackExhausted(Box::new(BacktrackFailure {
                iteration: k,
                psi,
                masses: ev.masses,
                gradient: ev.grad,
                direction: d,
            })));
        };

        // Step 4
        psi = cand;
        ev = cand_ev;
        records.push(record(k + 1, Some(ell), &psi, &ev, start));
    };
    Ok(SolveOutcome {
        w: ev.w,
        masses: ev.masses,
        psi,
        status,
        trace: SolveTrace { records, status },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fees::ScalarConvexFn;

    fn instance(ys: &[f64]) -> (TransportProblem, SplittingFee) {
        let problem = TransportProblem::unit_interval(ys, 1.0, 100).unwrap();
        let part = ScalarConvexFn::quadratic(0.0, 1.0, [0.0, 1.0]).unwrap();
        (problem, SplittingFee::uniform(part, ys.len()).unwrap())
    }

    #[test]
    fn starts_at_the_fixed_point() {
        let (p, fee) = instance(&[0.25, 0.75]);
        let out = damped_newton(&p, &fee, &[0.0, 0.0], &SolverConfig::new(0.1)).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.trace.newton_steps(), 0);
        assert_eq!(out.psi, vec![0.0, 0.0]);
    }

    #[test]
    fn asymmetric_pair_reaches_closed_form() {
        let (p, fee) = instance(&[0.25, 0.85]);
        let config = SolverConfig::new(0.1).with_zeta(1e-10);
        let out = damped_newton(&p, &fee, &[0.0, 0.0], &config).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        let delta = out.psi[1] - out.psi[0];
        assert!((delta + 0.0375).abs() < 1e-9, "delta = {delta}");
        assert!((out.w[0] - 0.51875).abs() < 1e-9);
        assert!((out.w[1] - 0.48125).abs() < 1e-9);
    }

    #[test]
    fn newton_direction_lands_on_the_fixed_point() {
        let (p, fee) = instance(&[0.25, 0.75]);
        let psi = [0.0, 0.1];
        let ev = Eval::new(&p, &fee, &psi).unwrap();
        let m = phi_hessian(&p, &fee, &psi, &ev.w, None).unwrap();
        let d = newton_direction(&m, &ev.grad).unwrap();
        assert!((d[0] - 0.05).abs() < 1e-12 && (d[1] + 0.05).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn kappa_of_symmetric_pair() {
        let (p, fee) = instance(&[0.25, 0.75]);
        let kappa = estimate_kappa(&p, &fee, &[0.0, 0.0]).unwrap();
        assert!((kappa - 3.0).abs() < 1e-12, "{kappa}");
        let point = SplittingFee::point(&[0.5, 0.5]).unwrap();
        let kappa = estimate_kappa(&p, &point, &[0.0, 0.0]).unwrap();
        assert!((kappa - 2.0).abs() < 1e-12, "{kappa}");
    }

    #[test]
    fn helmert_columns_are_orthonormal() {
        let q = helmert_basis(5);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-15);
        let ones = DVector::from_element(5, 1.0);
        assert!((q.transpose() * ones).amax() < 1e-15);
    }

    #[test]
    fn trace_csv_has_expected_columns() {
        let (p, fee) = instance(&[0.25, 0.85]);
        let out = damped_newton(&p, &fee, &[0.0, 0.0], &SolverConfig::new(0.1)).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,err_l1,err_l2,ell,min_mass,shuffle_steps,elapsed_ms\n"));
        assert_eq!(text.lines().count(), out.trace.records.len() + 1);
    }
}
