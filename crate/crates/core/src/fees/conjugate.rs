//! F*(ψ) = sup_w ⟨ψ, w⟩ − F(w) through the scalar system
//! ψ^i − r ∈ ∂f_i(w^i), Σ w^i = 1.

use nalgebra::DMatrix;
use serde::Serialize;

use super::SplittingFee;
use crate::error::{check_finite, Error, Result};

const MAX_EXPANSIONS: usize = 200;
const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateResult {
    /// ∇F*(ψ), or a subgradient where F* has a kink.
    pub w: Vec<f64>,
    /// Multiplier of the simplex constraint.
    pub r: f64,
    pub fstar: f64,
}

fn upper_sum(fee: &SplittingFee, psi: &[f64], r: f64) -> f64 {
    fee.parts()
        .iter()
        .zip(psi)
        .map(|(f, &p)| f.response(p - r).1)
        .sum()
}

fn upper_responses(fee: &SplittingFee, psi: &[f64], r: f64) -> Vec<f64> {
    fee.parts()
        .iter()
        .zip(psi)
        .map(|(f, &p)| f.response(p - r).1)
        .collect()
}

fn finish(fee: &SplittingFee, psi: &[f64], w: Vec<f64>, r: f64) -> ConjugateResult {
    let pairing: f64 = psi.iter().zip(&w).map(|(p, x)| p * x).sum();
    let cost: f64 = fee.parts().iter().zip(&w).map(|(f, &x)| f.eval(x)).sum();
    ConjugateResult {
        fstar: pairing - cost,
        w,
        r,
    }
}

pub fn conjugate_solve(fee: &SplittingFee, psi: &[f64]) -> Result<ConjugateResult> {
    fee.check_len(psi.len())?;
    check_finite("psi", psi)?;
    fee.check_feasible()?;
    let lower = fee.lower();
    let upper = fee.upper();
    let psi_min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let psi_max = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if (lower.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL {
        return Ok(finish(fee, psi, lower, psi_max));
    }
    if (upper.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL {
        return Ok(finish(fee, psi, upper, psi_min));
    }

    // Σ hi(r) is nonincreasing; find adjacent r_lo < r_hi with
    // Σ hi(r_lo) >= 1 > Σ hi(r_hi).
    let slopes: Vec<(f64, f64)> = fee.parts().iter().map(|f| f.slope_range()).collect();
    let max_top = slopes.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let min_bottom = slopes.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let mut r_lo = if max_top.is_finite() { psi_min - max_top - 1.0 } else { psi_min - 1.0 };
    let mut r_hi = if min_bottom.is_finite() { psi_max - min_bottom + 1.0 } else { psi_max + 1.0 };
    let mut step = 1.0;
    let mut expansions = 0;
    while upper_sum(fee, psi, r_lo) < 1.0 {
        r_lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !r_lo.is_finite() {
            return Err(Error::RootBracket { expansions });
        }
    }
    step = 1.0;
    while upper_sum(fee, psi, r_hi) >= 1.0 {
        r_hi += step;
        step *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !r_hi.is_finite() {
            return Err(Error::RootBracket { expansions });
        }
    }
    loop {
        let mid = r_lo + 0.5 * (r_hi - r_lo);
        if mid <= r_lo || mid >= r_hi {
            break;
        }
        if upper_sum(fee, psi, mid) >= 1.0 {
            r_lo = mid;
        } else {
            r_hi = mid;
        }
    }
    let w_left = upper_responses(fee, psi, r_lo);
    let w_right = upper_responses(fee, psi, r_hi);
    let s_left: f64 = w_left.iter().sum();
    let s_right: f64 = w_right.iter().sum();
    let theta = if s_left > s_right {
        ((1.0 - s_right) / (s_left - s_right)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let w = w_right
        .iter()
        .zip(&w_left)
        .zip(fee.parts())
        .map(|((&wr, &wl), f)| {
            let [a, b] = f.domain();
            (wr + theta * (wl - wr)).clamp(a, b)
        })
        .collect();
    Ok(finish(fee, psi, w, r_lo))
}

/// S + T with l_i = 1/f_i''(w^i), written so that rows sum to zero exactly
/// in exact arithmetic and nearly so in floating point.
fn hessian_from_l(l: &[f64]) -> DMatrix<f64> {
    let n = l.len();
    let total: f64 = l.iter().sum();
    if total <= 0.0 {
        return DMatrix::zeros(n, n);
    }
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let others: f64 = l.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| v).sum();
            l[i] * others / total
        } else {
            -l[i] * l[j] / total
        }
    })
}

/// D²F*(ψ); requires every w^i strictly inside its domain with f_i'' > 0.
pub fn fstar_hessian(fee: &SplittingFee, psi: &[f64]) -> Result<DMatrix<f64>> {
    let sol = conjugate_solve(fee, psi)?;
    let mut l = Vec::with_capacity(fee.len());
    for (index, (f, &x)) in fee.parts().iter().zip(&sol.w).enumerate() {
        let [a, b] = f.domain();
        if x <= a || x >= b {
            return Err(Error::ClampedCoordinate { index, value: x });
        }
        let curvature = f.deriv2(x);
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(Error::DegenerateCurvature {
                index,
                value: x,
                curvature,
            });
        }
        l.push(1.0 / curvature);
    }
    Ok(hessian_from_l(&l))
}

/// D²F*(ψ) allowing coordinates pinned at a domain end or a kink, where
/// w^i is locally constant and l_i = 0. Point indicators give the zero matrix.
pub fn fstar_hessian_clamped(fee: &SplittingFee, psi: &[f64]) -> Result<DMatrix<f64>> {
    let sol = conjugate_solve(fee, psi)?;
    hessian_at(fee, &sol.w)
}

pub(crate) fn hessian_at(fee: &SplittingFee, w: &[f64]) -> Result<DMatrix<f64>> {
    let mut l = Vec::with_capacity(fee.len());
    for (index, (f, &x)) in fee.parts().iter().zip(w).enumerate() {
        match f.inverse_curvature(x) {
            Some(v) if v.is_finite() => l.push(v),
            _ => {
                return Err(Error::DegenerateCurvature {
                    index,
                    value: x,
                    curvature: f.deriv2(x),
                })
            }
        }
    }
    Ok(hessian_from_l(&l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fees::ScalarConvexFn;

    fn half_squares(n: usize) -> SplittingFee {
        SplittingFee::uniform(ScalarConvexFn::quadratic(0.0, 1.0, [0.0, 1.0]).unwrap(), n).unwrap()
    }

    #[test]
    fn two_quadratics_closed_form() {
        let sol = conjugate_solve(&half_squares(2), &[0.2, 0.4]).unwrap();
        assert!((sol.r + 0.2).abs() < 1e-12);
        assert!((sol.w[0] - 0.4).abs() < 1e-12);
        assert!((sol.w[1] - 0.6).abs() < 1e-12);
        assert!((sol.fstar - 0.06).abs() < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_grid_maximisation() {
        let fee = half_squares(2);
        let psi = [0.2, 0.4];
        let n = 10_000;
        let best = (0..=n)
            .map(|k| {
                let w0 = k as f64 / n as f64;
                psi[0] * w0 + psi[1] * (1.0 - w0) - 0.5 * (w0 * w0 + (1.0 - w0) * (1.0 - w0))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let sol = conjugate_solve(&fee, &psi).unwrap();
        assert!((sol.fstar - best).abs() < 1e-8);
    }

    #[test]
    fn point_indicator_returns_the_point() {
        let fee = SplittingFee::point(&[0.3, 0.3, 0.4]).unwrap();
        for psi in [[0.0, 0.0, 0.0], [5.0, -1.0, 2.0]] {
            let sol = conjugate_solve(&fee, &psi).unwrap();
            assert_eq!(sol.w, vec![0.3, 0.3, 0.4]);
        }
    }

    #[test]
    fn identical_parts_on_diagonal_split_evenly() {
        let sol = conjugate_solve(&half_squares(4), &[0.7; 4]).unwrap();
        for w in sol.w {
            assert!((w - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn hessian_of_two_quadratics() {
        let h = fstar_hessian(&half_squares(2), &[0.2, 0.4]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((h - &expected).amax() < 1e-15);
        // finite differences of the gradient
        let step = 1e-5;
        let fee = half_squares(2);
        for j in 0..2 {
            let mut p = [0.2, 0.4];
            let mut m = [0.2, 0.4];
            p[j] += step;
            m[j] -= step;
            let wp = conjugate_solve(&fee, &p).unwrap().w;
            let wm = conjugate_solve(&fee, &m).unwrap().w;
            for i in 0..2 {
                let fd = (wp[i] - wm[i]) / (2.0 * step);
                assert!((fd - expected[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn clamped_coordinate_is_reported() {
        let err = fstar_hessian(&half_squares(2), &[0.0, 3.0]);
        assert!(matches!(err, Err(Error::ClampedCoordinate { index: 0, .. })));
        let relaxed = fstar_hessian_clamped(&half_squares(2), &[0.0, 3.0]).unwrap();
        assert_eq!(relaxed.amax(), 0.0);
    }

    #[test]
    fn infeasible_and_mismatched_inputs() {
        let fee = SplittingFee::uniform(ScalarConvexFn::quadratic(0.0, 1.0, [0.6, 1.0]).unwrap(), 2)
            .unwrap();
        assert!(matches!(conjugate_solve(&fee, &[0.0, 0.0]), Err(Error::InfeasibleFee { .. })));
        assert!(matches!(
            conjugate_solve(&half_squares(2), &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
