//! Semi-discrete optimal transport with splitting storage fees.
//!
//! A probability density on a box is sent to finitely many sites; site i
//! receives mass w^i and charges a convex fee f_i(w^i). The solver maximises
//! the dual Φ(ψ) = ∫ min_i (c(x, y_i) + ψ^i) dμ − F*(ψ) with a damped Newton
//! iteration that keeps every Laguerre cell above a mass floor.

pub mod error;
pub mod fees;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod regularize;
pub mod solver;

pub use error::{Error, Result};
pub use fees::{
    check_assumptions, conjugate_solve, fee_value, AssumptionReport, FeeKind, ScalarConvexFn,
    SplittingFee,
};
pub use geometry::{
    cell_masses, cost_sup_norm, laguerre_jacobian, laguerre_masses, transport_summary, Backend,
    DensityField, DomainSpec, JacobianMethod, JacobianOptions, Point, QuadraticCost, SiteSet,
    TransportProblem,
};
pub use regularize::{regularize, RegularizationReport};
pub use solver::{damped_newton, parameter_shuffle, phi_gradient, SolveOutcome, SolverConfig};
