//! Splitting storage fees F(w) = Σ f_i(w^i) + δ_Δ(w) and their conjugates.

mod conjugate;
mod scalar;
pub mod config;

use serde::Serialize;

use crate::error::{Error, Result};

pub use conjugate::{conjugate_solve, fstar_hessian, fstar_hessian_clamped, ConjugateResult};
pub(crate) use conjugate::hessian_at;
pub use scalar::{FeeKind, ScalarConvexFn, SmoothedProfile};
pub(crate) use scalar::bisect_floats;

/// Tolerance on Σw = 1 when deciding whether w lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingFee {
    parts: Vec<ScalarConvexFn>,
}

impl SplittingFee {
    pub fn new(parts: Vec<ScalarConvexFn>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("fee", "need at least one part"));
        }
        Ok(Self { parts })
    }

    /// The same fee for every warehouse.
    pub fn uniform(part: ScalarConvexFn, n: usize) -> Result<Self> {
        Self::new(vec![part; n])
    }

    /// δ at the point `a` of the simplex.
    pub fn point(a: &[f64]) -> Result<Self> {
        Self::new(a.iter().map(|&x| ScalarConvexFn::point(x)).collect::<Result<_>>()?)
    }

    pub fn parts(&self) -> &[ScalarConvexFn] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.domain()[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.domain()[1]).collect()
    }

    /// min_i a_i.
    pub fn eps_floor(&self) -> f64 {
        self.lower().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn check_feasible(&self) -> Result<()> {
        let lower: f64 = self.lower().iter().sum();
        let upper: f64 = self.upper().iter().sum();
        if lower > 1.0 + 1e-12 || upper < 1.0 - 1e-12 {
            return Err(Error::InfeasibleFee { lower, upper });
        }
        Ok(())
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                what: "fee parts",
                expected: n,
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Every part multiplied by `factor` (offsets included).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let parts = self
            .parts
            .iter()
            .map(|p| scale_part(p, factor))
            .collect::<Result<_>>()?;
        Self::new(parts)
    }
}

fn scale_part(p: &ScalarConvexFn, factor: f64) -> Result<ScalarConvexFn> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::invalid("factor", "must be positive"));
    }
    let kind = match p.kind().clone() {
        FeeKind::Quadratic { center, scale } => FeeKind::Quadratic {
            center,
            scale: scale * factor,
        },
        FeeKind::Entropy { scale, support } => FeeKind::Entropy {
            scale: scale * factor,
            support,
        },
        FeeKind::LogBarrier { scale, support } => FeeKind::LogBarrier {
            scale: scale * factor,
            support,
        },
        FeeKind::Indicator => FeeKind::Indicator,
        FeeKind::Tabulated { knots, values } => FeeKind::Tabulated {
            knots,
            values: values.into_iter().map(|v| v * factor).collect(),
        },
        FeeKind::Smoothed(s) => {
            let times = |v: Vec<f64>| v.into_iter().map(|x| x * factor).collect();
            FeeKind::Smoothed(SmoothedProfile::new(
                s.x0,
                s.h,
                times(s.second),
                times(s.first),
                times(s.values),
            )?)
        }
        FeeKind::Convexified { inner, eta } => FeeKind::Convexified {
            inner: Box::new(scale_part(&inner, factor)?),
            eta: eta * factor,
        },
    };
    Ok(ScalarConvexFn::new(kind, p.domain())?.with_offset(p.offset() * factor))
}

/// A value in ℝ ∪ {+∞}; ordering is total with +∞ on top.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }
}

/// F(w): Σ f_i(w^i) on the simplex intersected with the domains, +∞ elsewhere.
pub fn fee_value(fee: &SplittingFee, w: &[f64]) -> ExtendedReal {
    if w.len() != fee.len() || w.iter().any(|v| !v.is_finite()) {
        return ExtendedReal::PosInfinity;
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
        return ExtendedReal::PosInfinity;
    }
    let mut total = 0.0;
    for (part, &x) in fee.parts.iter().zip(w) {
        let v = part.eval(x);
        if !v.is_finite() {
            return ExtendedReal::PosInfinity;
        }
        total += v;
    }
    ExtendedReal::Finite(total)
}

const CURVATURE_SAMPLES: usize = 1000;
const BLOWUP_THRESHOLD: f64 = 1e3;
const BLOWUP_PROBES: [f64; 5] = [1e-6, 1e-8, 1e-10, 1e-12, 1e-14];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// min_i a_i.
    pub eps_max: f64,
    pub sum_lower: f64,
    pub sum_upper: f64,
    /// Σ a_i < 1 < Σ b_i.
    pub strict_interior: bool,
    /// Sampled min of f_i'' over the interiors; 0 for degenerate domains.
    pub strong_convexity_lb: f64,
    /// |f_i'| exceeds 1e3 near both ends of every domain.
    pub essential_smoothness: bool,
    /// f_i' nondecreasing on the interior samples.
    pub monotone_derivative: bool,
    pub failures: Vec<String>,
}

impl AssumptionReport {
    /// Conditions the damped Newton solver needs: a positive floor, strict
    /// feasibility, and strong convexity.
    pub fn solver_ready(&self) -> bool {
        self.eps_max > 0.0
            && self.strict_interior
            && self.strong_convexity_lb > 0.0
            && self.monotone_derivative
    }

    /// Every check, essential smoothness included.
    pub fn all_pass(&self) -> bool {
        self.solver_ready() && self.essential_smoothness
    }
}

pub fn check_assumptions(fee: &SplittingFee) -> AssumptionReport {
    let sum_lower: f64 = fee.lower().iter().sum();
    let sum_upper: f64 = fee.upper().iter().sum();
    let eps_max = fee.eps_floor();
    let strict_interior = sum_lower < 1.0 && 1.0 < sum_upper;
    let mut strong_convexity_lb = f64::INFINITY;
    let mut essential_smoothness = true;
    let mut monotone_derivative = true;
    let mut failures = Vec::new();
    for (i, part) in fee.parts().iter().enumerate() {
        let [a, b] = part.domain();
        if a >= b {
            strong_convexity_lb = 0.0;
            essential_smoothness = false;
            failures.push(format!("part {i}: domain [{a}, {b}] has empty interior"));
            continue;
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..CURVATURE_SAMPLES {
            let x = a + (b - a) * (k as f64 + 0.5) / CURVATURE_SAMPLES as f64;
            strong_convexity_lb = strong_convexity_lb.min(part.deriv2(x));
            let d = part.deriv(x);
            if d < prev - 1e-12 * (1.0 + prev.abs()) {
                monotone_derivative = false;
            }
            prev = d;
        }
        let blows = |x: f64| part.deriv(x).abs() > BLOWUP_THRESHOLD;
        let near_a = BLOWUP_PROBES.iter().any(|&t| blows(a + t));
        let near_b = BLOWUP_PROBES.iter().any(|&t| blows(b - t));
        if !(near_a && near_b) {
            essential_smoothness = false;
            failures.push(format!("part {i}: derivative stays bounded near an endpoint"));
        }
    }
    if !strong_convexity_lb.is_finite() {
        strong_convexity_lb = 0.0;
    }
    if eps_max <= 0.0 {
        failures.push(format!("eps_max = {eps_max} is not positive"));
    }
    if !strict_interior {
        failures.push(format!(
            "strict_interior: need sum a_i < 1 < sum b_i, got {sum_lower} and {sum_upper}"
        ));
    }
    if strong_convexity_lb <= 0.0 {
        failures.push("strong_convexity_lb is not positive".to_string());
    }
    if !monotone_derivative {
        failures.push("sampled derivative decreases somewhere".to_string());
    }
    AssumptionReport {
        eps_max,
        sum_lower,
        sum_upper,
        strict_interior,
        strong_convexity_lb,
        essential_smoothness,
        monotone_derivative,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(domain: [f64; 2]) -> ScalarConvexFn {
        ScalarConvexFn::quadratic(0.0, 1.0, domain).unwrap()
    }

    #[test]
    fn fee_value_examples() {
        let fee = SplittingFee::uniform(half_square([0.0, 1.0]), 2).unwrap();
        assert_eq!(fee_value(&fee, &[0.5, 0.5]), ExtendedReal::Finite(0.25));
        assert_eq!(fee_value(&fee, &[0.5, 0.4]), ExtendedReal::PosInfinity);
        let fee = SplittingFee::new(vec![half_square([0.2, 1.0]), half_square([0.0, 1.0])]).unwrap();
        assert_eq!(fee_value(&fee, &[0.1, 0.9]), ExtendedReal::PosInfinity);
        assert!(ExtendedReal::Finite(1e300) < ExtendedReal::PosInfinity);
    }

    #[test]
    fn assumption_report_for_ten_quadratics() {
        let part = ScalarConvexFn::quadratic(0.1, 1.0, [0.02, 1.0]).unwrap();
        let report = check_assumptions(&SplittingFee::uniform(part, 10).unwrap());
        assert!(report.strict_interior);
        assert!((report.sum_lower - 0.2).abs() < 1e-12);
        assert!((report.sum_upper - 10.0).abs() < 1e-12);
        assert!((report.eps_max - 0.02).abs() < 1e-15);
        assert!((report.strong_convexity_lb - 1.0).abs() < 1e-15);
        assert!(!report.essential_smoothness);
        assert!(report.solver_ready());
        assert!(!report.all_pass());
    }

    #[test]
    fn point_indicator_fails_strict_interior() {
        let report = check_assumptions(&SplittingFee::point(&[0.3, 0.3, 0.4]).unwrap());
        assert!(!report.strict_interior);
        assert!(!report.solver_ready());
        assert!(report.failures.iter().any(|f| f.contains("strict_interior")));
    }

    #[test]
    fn barrier_is_essentially_smooth() {
        let part = ScalarConvexFn::log_barrier(0.05, [0.05, 0.9], [0.05, 0.9]).unwrap();
        let report = check_assumptions(&SplittingFee::uniform(part, 3).unwrap());
        assert!(report.essential_smoothness);
        assert!(report.all_pass());
    }

    #[test]
    fn infeasible_fee_detected() {
        let fee = SplittingFee::uniform(half_square([0.6, 1.0]), 2).unwrap();
        assert!(matches!(fee.check_feasible(), Err(Error::InfeasibleFee { .. })));
        let fee = SplittingFee::uniform(half_square([0.0, 0.4]), 2).unwrap();
        assert!(matches!(fee.check_feasible(), Err(Error::InfeasibleFee { .. })));
    }
}
