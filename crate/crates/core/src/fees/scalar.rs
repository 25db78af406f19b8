//! One warehouse's fee: a closed convex function on an interval of [0, 1].

use crate::error::{Error, Result};

/// Piecewise-cubic convex function on uniform knots `x0 + k·h` whose second
/// derivative is the piecewise-linear interpolant of `second`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedProfile {
    pub(crate) x0: f64,
    pub(crate) h: f64,
    /// f'' at the knots.
    pub(crate) second: Vec<f64>,
    /// f' at the knots.
    pub(crate) first: Vec<f64>,
    /// f at the knots.
    pub(crate) values: Vec<f64>,
}

impl SmoothedProfile {
    pub fn new(x0: f64, h: f64, second: Vec<f64>, first: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = second.len();
        if n < 2 || first.len() != n || values.len() != n {
            return Err(Error::invalid(
                "fee.params",
                "smoothed profile needs equally long second/first/values arrays of length >= 2",
            ));
        }
        if !(h.is_finite() && h > 0.0 && x0.is_finite()) {
            return Err(Error::invalid("fee.params", "smoothed profile needs finite x0 and h > 0"));
        }
        let all = second.iter().chain(&first).chain(&values);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fee.params", "smoothed profile has non-finite entries"));
        }
        if second.iter().any(|&q| q < 0.0) {
            return Err(Error::invalid("fee.params", "smoothed profile needs f'' >= 0"));
        }
        Ok(Self {
            x0,
            h,
            second,
            first,
            values,
        })
    }

    pub fn span(&self) -> [f64; 2] {
        [self.x0, self.x0 + self.h * (self.second.len() - 1) as f64]
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let segments = self.second.len() - 1;
        let k = ((x - self.x0) / self.h).floor().clamp(0.0, (segments - 1) as f64) as usize;
        (k, x - (self.x0 + k as f64 * self.h))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (k, u) = self.locate(x);
        let (q0, q1) = (self.second[k], self.second[k + 1]);
        self.values[k] + self.first[k] * u + q0 * u * u / 2.0 + (q1 - q0) * u * u * u / (6.0 * self.h)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (k, u) = self.locate(x);
        let (q0, q1) = (self.second[k], self.second[k + 1]);
        self.first[k] + q0 * u + (q1 - q0) * u * u / (2.0 * self.h)
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let (k, u) = self.locate(x);
        let (q0, q1) = (self.second[k], self.second[k + 1]);
        (q0 + (q1 - q0) * u / self.h).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeeKind {
    /// (scale/2)·(x − center)².
    Quadratic { center: f64, scale: f64 },
    /// scale·[(x−lo)ln(x−lo) + (hi−x)ln(hi−x)] with support [lo, hi] ⊇ domain.
    Entropy { scale: f64, support: [f64; 2] },
    /// −scale·[ln(x−lo) + ln(hi−x)] with support [lo, hi] ⊇ domain.
    LogBarrier { scale: f64, support: [f64; 2] },
    /// Zero on the domain.
    Indicator,
    /// Convex piecewise-linear interpolant of (knots, values).
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
    /// C² function with piecewise-linear second derivative.
    Smoothed(SmoothedProfile),
    /// inner(x) − eta·√((d−x)(x−c)) where [c, d] is the inner domain.
    Convexified { inner: Box<ScalarConvexFn>, eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarConvexFn {
    kind: FeeKind,
    domain: [f64; 2],
    offset: f64,
}

impl ScalarConvexFn {
    pub fn new(kind: FeeKind, domain: [f64; 2]) -> Result<Self> {
        let [a, b] = domain;
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::invalid(
                "fee.domain",
                format!("[{a}, {b}] must satisfy 0 <= a <= b <= 1"),
            ));
        }
        match &kind {
            FeeKind::Quadratic { center, scale } => {
                if !(center.is_finite() && scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("fee.params", "quadratic needs finite center and scale > 0"));
                }
            }
            FeeKind::Entropy { scale, support } | FeeKind::LogBarrier { scale, support } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("fee.params", "scale must be positive"));
                }
                if !(support[0] <= a && b <= support[1] && support[0] < support[1]) {
                    return Err(Error::invalid("fee.params", "support must contain the domain"));
                }
            }
            FeeKind::Indicator => {}
            FeeKind::Tabulated { knots, values } => {
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(Error::invalid("fee.params", "tabulated needs >= 2 knots with matching values"));
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("fee.params", "tabulated knots must increase strictly"));
                }
                if knots[0] > a || *knots.last().unwrap() < b {
                    return Err(Error::invalid("fee.params", "tabulated knots must cover the domain"));
                }
                let slopes: Vec<f64> = knots
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
                    .collect();
                if slopes.windows(2).any(|s| s[1] < s[0] - 1e-12 * (1.0 + s[0].abs())) {
                    return Err(Error::invalid("fee.params", "tabulated values are not convex"));
                }
            }
            FeeKind::Smoothed(profile) => {
                let [s0, s1] = profile.span();
                let slack = 1e-12;
                if s0 > a + slack || s1 < b - slack {
                    return Err(Error::invalid("fee.params", "smoothed profile must cover the domain"));
                }
            }
            FeeKind::Convexified { inner, eta } => {
                if !(eta.is_finite() && *eta > 0.0) {
                    return Err(Error::invalid("fee.params", "eta must be positive"));
                }
                let [c, d] = inner.domain;
                if c >= d || a < c || b > d {
                    return Err(Error::invalid(
                        "fee.domain",
                        "convexified fee needs a nondegenerate inner domain containing its domain",
                    ));
                }
            }
        }
        Ok(Self {
            kind,
            domain,
            offset: 0.0,
        })
    }

    pub fn quadratic(center: f64, scale: f64, domain: [f64; 2]) -> Result<Self> {
        Self::new(FeeKind::Quadratic { center, scale }, domain)
    }

    /// Two-sided entropy whose support is the domain itself.
    pub fn entropy(scale: f64, domain: [f64; 2]) -> Result<Self> {
        Self::new(FeeKind::Entropy { scale, support: domain }, domain)
    }

    pub fn log_barrier(scale: f64, support: [f64; 2], domain: [f64; 2]) -> Result<Self> {
        Self::new(FeeKind::LogBarrier { scale, support }, domain)
    }

    pub fn indicator(domain: [f64; 2]) -> Result<Self> {
        Self::new(FeeKind::Indicator, domain)
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::new(FeeKind::Indicator, [x, x])
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>, domain: [f64; 2]) -> Result<Self> {
        Self::new(FeeKind::Tabulated { knots, values }, domain)
    }

    /// The same function on a smaller domain.
    pub fn restrict(&self, domain: [f64; 2]) -> Result<Self> {
        let [a, b] = self.domain;
        if domain[0] < a || domain[1] > b {
            return Err(Error::invalid(
                "fee.domain",
                format!("[{}, {}] is not inside [{a}, {b}]", domain[0], domain[1]),
            ));
        }
        Ok(Self::new(self.kind.clone(), domain)?.with_offset(self.offset))
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn kind(&self) -> &FeeKind {
        &self.kind
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FeeKind::Quadratic { .. } => "quadratic",
            FeeKind::Entropy { .. } => "entropy",
            FeeKind::LogBarrier { .. } => "log_barrier",
            FeeKind::Indicator => "indicator",
            FeeKind::Tabulated { .. } => "tabulated",
            FeeKind::Smoothed(_) => "tabulated_smoothed",
            FeeKind::Convexified { .. } => "convexified",
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.domain[0]..=self.domain[1]).contains(&x)
    }

    /// f(x), or +inf outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::INFINITY;
        }
        self.offset + self.raw_eval(x)
    }

    fn raw_eval(&self, x: f64) -> f64 {
        match &self.kind {
            FeeKind::Quadratic { center, scale } => 0.5 * scale * (x - center) * (x - center),
            FeeKind::Entropy { scale, support } => {
                let xlogx = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
                scale * (xlogx(x - support[0]) + xlogx(support[1] - x))
            }
            FeeKind::LogBarrier { scale, support } => {
                -scale * ((x - support[0]).ln() + (support[1] - x).ln())
            }
            FeeKind::Indicator => 0.0,
            FeeKind::Tabulated { knots, values } => {
                let k = segment_of(knots, x);
                let t = (x - knots[k]) / (knots[k + 1] - knots[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
            FeeKind::Smoothed(profile) => profile.eval(x),
            FeeKind::Convexified { inner, eta } => {
                let [c, d] = inner.domain;
                inner.eval(x) - eta * ((d - x) * (x - c)).max(0.0).sqrt()
            }
        }
    }

    /// f'(x) on the domain; the one-sided limit (possibly infinite) at its ends.
    pub fn deriv(&self, x: f64) -> f64 {
        match &self.kind {
            FeeKind::Quadratic { center, scale } => scale * (x - center),
            FeeKind::Entropy { scale, support } => {
                scale * ((x - support[0]).ln() - (support[1] - x).ln())
            }
            FeeKind::LogBarrier { scale, support } => {
                scale * (1.0 / (support[1] - x) - 1.0 / (x - support[0]))
            }
            FeeKind::Indicator => 0.0,
            FeeKind::Tabulated { knots, values } => {
                let k = if x >= self.domain[1] {
                    segment_left_of(knots, x)
                } else {
                    segment_of(knots, x)
                };
                (values[k + 1] - values[k]) / (knots[k + 1] - knots[k])
            }
            FeeKind::Smoothed(profile) => profile.deriv(x),
            FeeKind::Convexified { inner, eta } => {
                let [c, d] = inner.domain;
                let u = (d - x) * (x - c);
                let barrier = if u > 0.0 {
                    -eta * (d + c - 2.0 * x) / (2.0 * u.sqrt())
                } else if x <= c {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
                inner.deriv(x) + barrier
            }
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match &self.kind {
            FeeKind::Quadratic { scale, .. } => *scale,
            FeeKind::Entropy { scale, support } => {
                scale * (1.0 / (x - support[0]) + 1.0 / (support[1] - x))
            }
            FeeKind::LogBarrier { scale, support } => {
                let (l, r) = (x - support[0], support[1] - x);
                scale * (1.0 / (l * l) + 1.0 / (r * r))
            }
            FeeKind::Indicator | FeeKind::Tabulated { .. } => 0.0,
            FeeKind::Smoothed(profile) => profile.deriv2(x),
            FeeKind::Convexified { inner, eta } => {
                let [c, d] = inner.domain;
                let u = (d - x) * (x - c);
                let barrier = if u > 0.0 {
                    eta * (d - c) * (d - c) / (4.0 * u * u.sqrt())
                } else {
                    f64::INFINITY
                };
                inner.deriv2(x) + barrier
            }
        }
    }

    /// One-sided derivative limits (f'(a+), f'(b−)), possibly infinite.
    pub fn slope_range(&self) -> (f64, f64) {
        let [a, b] = self.domain;
        match &self.kind {
            FeeKind::Tabulated { knots, values } => {
                let slope = |k: usize| (values[k + 1] - values[k]) / (knots[k + 1] - knots[k]);
                (slope(segment_of(knots, a)), slope(segment_left_of(knots, b)))
            }
            _ => (self.deriv(a), self.deriv(b)),
        }
    }

    /// The set argmax_{x ∈ [a,b]} s·x − f(x) as a closed interval (lo, hi).
    pub fn response(&self, s: f64) -> (f64, f64) {
        let [a, b] = self.domain;
        if a == b {
            return (a, a);
        }
        let single = |x: f64| {
            let x = x.clamp(a, b);
            (x, x)
        };
        match &self.kind {
            FeeKind::Quadratic { center, scale } => single(center + s / scale),
            FeeKind::Entropy { scale, support } => {
                let t = s / scale;
                let width = support[1] - support[0];
                // logistic written to avoid overflow for either sign of t
                let frac = if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                };
                single(support[0] + width * frac)
            }
            FeeKind::LogBarrier { scale, support } => {
                let t = s / scale;
                let width = support[1] - support[0];
                let root = (t * t * width * width + 4.0).sqrt();
                // √(t²D²+4) − tD without cancellation
                let gap = if t > 0.0 { 4.0 / (root + t * width) } else { root - t * width };
                single(support[0] + 2.0 * width / (2.0 + gap))
            }
            FeeKind::Indicator => {
                if s < 0.0 {
                    (a, a)
                } else if s > 0.0 {
                    (b, b)
                } else {
                    (a, b)
                }
            }
            FeeKind::Tabulated { knots, values } => {
                let mut points = vec![a];
                points.extend(knots.iter().copied().filter(|&k| k > a && k < b));
                points.push(b);
                let below = points
                    .windows(2)
                    .filter(|w| self.raw_slope(knots, values, w[0], w[1]) < s)
                    .count();
                let not_above = points
                    .windows(2)
                    .filter(|w| self.raw_slope(knots, values, w[0], w[1]) <= s)
                    .count();
                (points[below], points[not_above])
            }
            FeeKind::Smoothed(_) | FeeKind::Convexified { .. } => self.bisect_response(s),
        }
    }

    fn raw_slope(&self, knots: &[f64], values: &[f64], x0: f64, x1: f64) -> f64 {
        let k = segment_of(knots, 0.5 * (x0 + x1));
        (values[k + 1] - values[k]) / (knots[k + 1] - knots[k])
    }

    /// Response for kinds with a continuous nondecreasing derivative.
    fn bisect_response(&self, s: f64) -> (f64, f64) {
        let [a, b] = self.domain;
        // lowest x with f'(x) >= s
        let lo = if self.deriv(a) >= s {
            a
        } else if self.deriv(b) < s {
            b
        } else {
            bisect_floats(a, b, |x| self.deriv(x) >= s)
        };
        // highest x with f'(x) <= s
        let hi = if self.deriv(b) <= s {
            b
        } else if self.deriv(lo) > s {
            lo
        } else {
            let first_above = bisect_floats(lo, b, |x| self.deriv(x) > s);
            if first_above > lo {
                prev_float(first_above)
            } else {
                lo
            }
        };
        (lo, hi.max(lo))
    }

    /// 1/f''(x) where the Hessian formula needs it: `Some(0)` at the domain
    /// ends and at kinks, `None` where the response is set-valued.
    pub fn inverse_curvature(&self, x: f64) -> Option<f64> {
        let [a, b] = self.domain;
        if x <= a || x >= b {
            return Some(0.0);
        }
        match &self.kind {
            FeeKind::Indicator => None,
            FeeKind::Tabulated { knots, .. } => knots.contains(&x).then_some(0.0),
            _ => {
                let q = self.deriv2(x);
                if q > 0.0 {
                    Some(1.0 / q)
                } else {
                    None
                }
            }
        }
    }
}

/// Segment k with knots[k] <= x < knots[k+1], clamped to valid segments.
fn segment_of(knots: &[f64], x: f64) -> usize {
    knots.partition_point(|&k| k <= x).saturating_sub(1).min(knots.len() - 2)
}

/// Segment k with knots[k] < x <= knots[k+1].
fn segment_left_of(knots: &[f64], x: f64) -> usize {
    knots.partition_point(|&k| k < x).saturating_sub(1).min(knots.len() - 2)
}

fn prev_float(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else if x == 0.0 {
        -f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Smallest x in [lo, hi] with pred(x) true, given pred(hi) and monotone pred,
/// resolved to adjacent floats.
pub(crate) fn bisect_floats(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    if pred(lo) {
        return lo;
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}
