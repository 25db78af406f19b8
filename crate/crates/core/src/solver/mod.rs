//! The dual objective Φ(ψ) = ∫ min_i (c(x, y_i) + ψ^i) dμ − F*(ψ), the
//! parameter shuffle, and the damped Newton iteration that maximises Φ.

mod newton;
mod shuffle;

use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::fees::{conjugate_solve, SplittingFee};
use crate::geometry::{cell_masses, transport_summary, JacobianMethod, TransportProblem};

pub use newton::{
    damped_newton, estimate_kappa, newton_direction, IterationRecord, SolveOutcome, SolveStatus,
    SolveTrace,
};
pub use shuffle::{parameter_shuffle, ShuffleOptions, ShuffleOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once ‖∇Φ‖₂ < zeta.
    pub zeta: f64,
    /// Lower bound on ∇F* that the fee guarantees.
    pub eps: f64,
    /// Cell-mass floor; `None` means eps/6, reduced if needed so that 2·eps0 < 1/(3N).
    pub eps0: Option<f64>,
    pub max_newton_iters: usize,
    pub max_backtrack: u32,
    pub shuffle: ShuffleOptions,
    /// DG method; `None` picks facets on the exact backend and finite differences on the grid.
    pub jacobian: Option<JacobianMethod>,
}

impl SolverConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            zeta: 1e-8,
            eps,
            eps0: None,
            max_newton_iters: 100,
            max_backtrack: 40,
            shuffle: ShuffleOptions::default(),
            jacobian: None,
        }
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = Some(eps0);
        self
    }

    pub fn effective_eps0(&self, n: usize) -> f64 {
        self.eps0
            .unwrap_or_else(|| (self.eps / 6.0).min(0.9 / (6.0 * n as f64)))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let eps0 = self.effective_eps0(n);
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::invalid("zeta", format!("must be positive, got {}", self.zeta)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if !(eps0 > 0.0 && eps0 < self.eps) {
            return Err(Error::invalid(
                "eps0",
                format!("need 0 < eps0 < eps, got eps0 = {eps0}, eps = {}", self.eps),
            ));
        }
        if 2.0 * eps0 >= 1.0 / (3.0 * n as f64) {
            return Err(Error::invalid(
                "eps0",
                format!("need 2*eps0 < 1/(3N) = {}, got eps0 = {eps0}", 1.0 / (3.0 * n as f64)),
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::invalid("max_newton_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiGradient {
    /// G(ψ) − ∇F*(ψ).
    pub grad: Vec<f64>,
    pub value: f64,
    pub masses: Vec<f64>,
    pub w: Vec<f64>,
}

/// ∇Φ(ψ) and Φ(ψ).
pub fn phi_gradient(
    problem: &TransportProblem,
    fee: &SplittingFee,
    psi: &[f64],
) -> Result<PhiGradient> {
    fee.check_len(problem.n_sites())?;
    let summary = transport_summary(problem, psi)?;
    let conj = conjugate_solve(fee, psi)?;
    let pairing: f64 = psi.iter().zip(&summary.weights).map(|(p, m)| p * m).sum();
    let grad = summary.weights.iter().zip(&conj.w).map(|(g, w)| g - w).collect();
    Ok(PhiGradient {
        grad,
        value: summary.cost + pairing - conj.fstar,
        masses: summary.weights,
        w: conj.w,
    })
}

/// Masses, conjugate weights, and the gradient without the transport integral.
#[derive(Debug, Clone)]
pub(crate) struct Eval {
    pub masses: Vec<f64>,
    pub w: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Eval {
    pub fn new(problem: &TransportProblem, fee: &SplittingFee, psi: &[f64]) -> Result<Self> {
        check_finite("psi", psi)?;
        let masses = cell_masses(problem, psi)?;
        let w = conjugate_solve(fee, psi)?.w;
        let grad = masses.iter().zip(&w).map(|(g, w)| g - w).collect();
        Ok(Self { masses, w, grad })
    }

    pub fn l1(&self) -> f64 {
        self.grad.iter().map(|g| g.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
