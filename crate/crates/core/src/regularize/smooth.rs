//! Convex smoothing of a scalar fee: sample on a uniform grid, take the
//! piecewise-linear interpolant, and convolve its derivative with a hat kernel.
//! The result has a piecewise-linear second derivative on the same grid.

use crate::error::{Error, Result};
use crate::fees::{FeeKind, ScalarConvexFn, SmoothedProfile};

pub const SMOOTHING_SEGMENTS: usize = 4096;
const WIDTHS: [usize; 10] = [512, 256, 128, 64, 32, 16, 8, 4, 2, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothing {
    pub function: ScalarConvexFn,
    /// Half-width of the hat kernel; zero when the input was returned as is.
    pub kernel_width: f64,
    /// Largest |smoothed − input| seen on knots and segment midpoints.
    pub sup_error: f64,
}

pub fn smooth_scalar(f: &ScalarConvexFn, eta: f64) -> Result<ScalarConvexFn> {
    Ok(smooth_scalar_detailed(f, eta)?.function)
}

/// Picks the widest kernel whose sup error stays within eta/2.
pub fn smooth_scalar_detailed(f: &ScalarConvexFn, eta: f64) -> Result<Smoothing> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    let [c, d] = f.domain();
    if c >= d {
        return Err(Error::invalid(
            "fee.domain",
            format!("cannot smooth on the degenerate interval [{c}, {d}]"),
        ));
    }
    let unchanged = || Smoothing {
        function: f.clone(),
        kernel_width: 0.0,
        sup_error: 0.0,
    };
    if matches!(f.kind(), FeeKind::Indicator) {
        return Ok(unchanged());
    }
    let n = SMOOTHING_SEGMENTS;
    let h = (d - c) / n as f64;
    let knot = |k: usize| if k == n { d } else { c + k as f64 * h };
    let samples: Vec<f64> = (0..=n).map(|k| f.eval(knot(k))).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "fee",
            format!("{} part is not finite on [{c}, {d}]", f.kind_name()),
        ));
    }
    let slopes: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let affine_tol = 1e-9 * (1.0 + slopes[0].abs());
    if slopes.iter().all(|s| (s - slopes[0]).abs() <= affine_tol) {
        return Ok(unchanged());
    }
    // jumps[k] sits at knot k, for 1 <= k < n
    let mut jumps = vec![0.0; n + 1];
    for k in 1..n {
        jumps[k] = (slopes[k] - slopes[k - 1]).max(0.0);
    }
    let midpoints: Vec<f64> = (0..n).map(|k| f.eval(c + (k as f64 + 0.5) * h)).collect();

    let mut fallback = None;
    for m in WIDTHS {
        let profile = convolve(c, h, &samples, slopes[0], &jumps, m)?;
        let sup_error = (0..=n)
            .map(|k| (profile.values()[k] - samples[k]).abs())
            .chain((0..n).map(|k| (profile.eval(c + (k as f64 + 0.5) * h) - midpoints[k]).abs()))
            .fold(0.0, f64::max);
        let result = Smoothing {
            function: ScalarConvexFn::new(FeeKind::Smoothed(profile), [c, d])?,
            kernel_width: m as f64 * h,
            sup_error,
        };
        if sup_error <= 0.5 * eta {
            return Ok(result);
        }
        fallback = Some(result);
    }
    match fallback {
        Some(result) if result.sup_error <= eta => Ok(result),
        Some(result) => Err(Error::invalid(
            "eta",
            format!(
                "{eta} is below the smoothing error {} reachable on {n} segments",
                result.sup_error
            ),
        )),
        None => unreachable!("WIDTHS is not empty"),
    }
}

/// Integrates the hat-smoothed derivative back up, anchored at f(c).
fn convolve(
    c: f64,
    h: f64,
    samples: &[f64],
    first_slope: f64,
    jumps: &[f64],
    m: usize,
) -> Result<SmoothedProfile> {
    let n = samples.len() - 1;
    let delta = m as f64 * h;
    let mut second = vec![0.0; n + 1];
    for (k, &jump) in jumps.iter().enumerate() {
        if jump == 0.0 {
            continue;
        }
        let lo = k.saturating_sub(m - 1);
        let hi = (k + m - 1).min(n);
        for (j, q) in second.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let dist = j.abs_diff(k) as f64 / m as f64;
            *q += jump * (1.0 - dist) / delta;
        }
    }
    // kernel mass of the jumps at knots k < m that already lies left of c
    let mut g = first_slope;
    for (k, &jump) in jumps.iter().enumerate().take(m.min(n + 1)) {
        let t = (delta - k as f64 * h) / delta;
        g += jump * t * t / 2.0;
    }
    let mut first = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut v = samples[0];
    for j in 0..=n {
        first.push(g);
        values.push(v);
        if j < n {
            let (q0, q1) = (second[j], second[j + 1]);
            v += g * h + h * h * (2.0 * q0 + q1) / 6.0;
            g += h * (q0 + q1) / 2.0;
        }
    }
    SmoothedProfile::new(c, h, second, first, values)
}

/// g(x) = f(x) − eta·√((d−x)(x−c)) on the domain [c, d] of f.
pub fn convexify_scalar(f: &ScalarConvexFn, eta: f64) -> Result<ScalarConvexFn> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    let domain = f.domain();
    if domain[0] >= domain[1] {
        return Err(Error::invalid(
            "fee.domain",
            format!("cannot convexify on the degenerate interval [{}, {}]", domain[0], domain[1]),
        ));
    }
    ScalarConvexFn::new(
        FeeKind::Convexified {
            inner: Box::new(f.clone()),
            eta,
        },
        domain,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hinge(m: f64) -> ScalarConvexFn {
        ScalarConvexFn::tabulated(vec![0.0, m, 1.0], vec![m, 0.0, 1.0 - m], [0.0, 1.0]).unwrap()
    }

    #[test]
    fn affine_input_comes_back_unchanged() {
        let f = ScalarConvexFn::tabulated(vec![0.0, 1.0], vec![0.3, 1.1], [0.1, 0.9]).unwrap();
        let out = smooth_scalar_detailed(&f, 0.01).unwrap();
        assert_eq!(out.function, f);
        assert_eq!(out.kernel_width, 0.0);
        let g = ScalarConvexFn::indicator([0.2, 0.4]).unwrap().with_offset(2.0);
        assert_eq!(smooth_scalar(&g, 0.1).unwrap(), g);
    }

    #[test]
    fn hinge_is_rounded_only_near_the_kink() {
        let m = 0.37;
        let f = hinge(m);
        let out = smooth_scalar_detailed(&f, 0.01).unwrap();
        let g = &out.function;
        assert!(out.sup_error <= 0.005);
        assert!(out.kernel_width > 0.0 && out.kernel_width < 0.01);
        let steps = 10_000;
        let dx = 1.0 / steps as f64;
        // Lipschitz bound of f'' for a unit-kernel spread of the slope jump 2
        let lip = 2.0 / (out.kernel_width * out.kernel_width);
        let mut prev_q = g.deriv2(0.0);
        for k in 0..=steps {
            let x = k as f64 * dx;
            if (x - m).abs() > 0.02 {
                assert!((g.eval(x) - f.eval(x)).abs() < 1e-9, "x = {x}");
            }
            let q = g.deriv2(x);
            assert!((q - prev_q).abs() <= lip * dx * (1.0 + 1e-9), "jump in f'' at {x}");
            prev_q = q;
        }
        // the full slope jump is spread over the kernel
        assert!((g.deriv(m + 0.02) - g.deriv(m - 0.02) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_functions_are_barely_moved() {
        let f = ScalarConvexFn::quadratic(0.3, 2.0, [0.05, 1.0]).unwrap();
        let out = smooth_scalar_detailed(&f, 0.01).unwrap();
        assert!(out.sup_error <= 0.005, "{}", out.sup_error);
        // away from the ends the kernel reproduces a linear derivative
        let x = 0.5;
        assert!(x - out.kernel_width > 0.05 && x + out.kernel_width < 1.0);
        assert!((out.function.deriv(x) - f.deriv(x)).abs() < 1e-6);
        assert!((out.function.deriv2(x) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unbounded_samples_are_rejected() {
        let f = ScalarConvexFn::log_barrier(1.0, [0.0, 1.0], [0.0, 1.0]).unwrap();
        assert!(smooth_scalar(&f, 0.1).is_err());
        assert!(smooth_scalar(&ScalarConvexFn::point(0.3).unwrap(), 0.1).is_err());
        assert!(smooth_scalar(&hinge(0.5), 0.0).is_err());
    }

    #[test]
    fn convexify_zero_function() {
        let zero = ScalarConvexFn::indicator([0.0, 1.0]).unwrap();
        let g = convexify_scalar(&zero, 0.1).unwrap();
        assert!((g.eval(0.5) + 0.05).abs() < 1e-15);
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(1.0), 0.0);
        let s = 1e-4;
        let fd = (g.eval(0.5 + s) - 2.0 * g.eval(0.5) + g.eval(0.5 - s)) / (s * s);
        assert!((fd - 0.2).abs() < 1e-6, "{fd}");
        assert!((g.deriv2(0.5) - 0.2).abs() < 1e-12);
        assert!(convexify_scalar(&ScalarConvexFn::point(0.2).unwrap(), 0.1).is_err());
    }

    #[test]
    fn convexify_distance_and_curvature_bounds() {
        let f = smooth_scalar(&hinge(0.6), 0.01).unwrap().restrict([0.2, 0.9]).unwrap();
        let eta = 0.05;
        let g = convexify_scalar(&f, eta).unwrap();
        let (c, d) = (0.2, 0.9);
        for k in 1..1000 {
            let x = c + (d - c) * k as f64 / 1000.0;
            assert!((f.eval(x) - g.eval(x)).abs() <= 0.5 * eta * (d - c) + 1e-15);
            assert!(g.deriv2(x) >= 2.0 * eta / (d - c) * (1.0 - 1e-12));
        }
        assert!(g.deriv(c + 1e-12) < -1e3 && g.deriv(d - 1e-12) > 1e3);
    }
}
