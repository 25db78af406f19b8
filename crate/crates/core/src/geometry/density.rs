//! Continuous density built from a table of cell-centre values.
//!
//! Along each axis the table is interpolated linearly between cell centres
//! and held constant on the two half-cells next to the boundary. The
//! integral of this interpolant over the box equals the midpoint sum of the
//! table, so the normalisation of [`DensityField`] carries over unchanged.

use super::{DensityField, DensityKind, DomainSpec, Point};

/// Interpolation weights along one axis: value = v[k0]·(1−t) + v[k1]·t.
#[inline]
fn axis_weights(x: f64, lo: f64, h: f64, n: usize) -> (usize, usize, f64) {
    let first = lo + 0.5 * h;
    if n == 1 || x <= first {
        return (0, 0, 0.0);
    }
    let last = lo + (n as f64 - 0.5) * h;
    if x >= last {
        return (n - 1, n - 1, 0.0);
    }
    let k = (((x - first) / h).floor() as usize).min(n - 2);
    let t = ((x - (first + k as f64 * h)) / h).clamp(0.0, 1.0);
    (k, k + 1, t)
}

/// Patch boundaries along one axis: the box ends plus every cell centre.
fn axis_breaks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut breaks = Vec::with_capacity(n + 2);
    breaks.push(lo);
    breaks.extend((0..n).map(|k| lo + (k as f64 + 0.5) * h));
    breaks.push(hi);
    breaks
}

/// Index of the patch containing `x` for breaks produced by [`axis_breaks`].
#[inline]
fn patch_index(x: f64, lo: f64, h: f64, n: usize) -> usize {
    let first = lo + 0.5 * h;
    if x < first {
        0
    } else {
        ((((x - first) / h).floor() as usize) + 1).min(n)
    }
}

/// One-dimensional density with exact CDF, quantile, and moment integrals.
#[derive(Debug, Clone)]
pub struct LineDensity {
    lo: f64,
    hi: f64,
    h: f64,
    values: Vec<f64>,
    uniform: Option<f64>,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    /// ∫ (x − lo)^k ρ from lo to each break, for k = 1, 2.
    moment1: Vec<f64>,
    moment2: Vec<f64>,
}

/// ∫_0^d (b + u)^k (l + s·u) du for k = 0, 1, 2.
#[inline]
fn patch_moments(b: f64, l: f64, s: f64, d: f64) -> [f64; 3] {
    let (d2, d3) = (d * d, d * d * d);
    let m0 = l * d + s * d2 / 2.0;
    let m1 = l * d2 / 2.0 + s * d3 / 3.0;
    let m2 = l * d3 / 3.0 + s * d2 * d2 / 4.0;
    [m0, b * m0 + m1, b * b * m0 + 2.0 * b * m1 + m2]
}

impl LineDensity {
    pub fn new(domain: &DomainSpec, density: &DensityField) -> Self {
        let [lo, hi] = domain.bounds()[0];
        let n = domain.resolution()[0];
        let h = (hi - lo) / n as f64;
        let values = density.values().to_vec();
        let uniform = match density.kind() {
            DensityKind::Uniform => Some(1.0 / (hi - lo)),
            DensityKind::Tabulated => None,
        };
        let breaks = axis_breaks(lo, hi, n);
        let mut cumulative = vec![0.0];
        let mut moment1 = vec![0.0];
        let mut moment2 = vec![0.0];
        for p in 0..breaks.len() - 1 {
            let (l, r) = Self::patch_ends(&values, p);
            let len = breaks[p + 1] - breaks[p];
            let slope = if len > 0.0 { (r - l) / len } else { 0.0 };
            let [m0, m1, m2] = patch_moments(breaks[p] - lo, l, slope, len);
            cumulative.push(cumulative[p] + m0);
            moment1.push(moment1[p] + m1);
            moment2.push(moment2[p] + m2);
        }
        Self {
            lo,
            hi,
            h,
            values,
            uniform,
            breaks,
            cumulative,
            moment1,
            moment2,
        }
    }

    fn patch_ends(values: &[f64], p: usize) -> (f64, f64) {
        let n = values.len();
        let left = values[p.saturating_sub(1).min(n - 1)];
        let right = values[p.min(n - 1)];
        (left, right)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        if let Some(rho) = self.uniform {
            return rho;
        }
        let (k0, k1, t) = axis_weights(x, self.lo, self.h, self.values.len());
        self.values[k0] * (1.0 - t) + self.values[k1] * t
    }

    /// μ([lo, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        if let Some(rho) = self.uniform {
            return (x - self.lo) * rho;
        }
        let p = patch_index(x, self.lo, self.h, self.values.len());
        let (l, r) = Self::patch_ends(&self.values, p);
        let start = self.breaks[p];
        let len = self.breaks[p + 1] - start;
        let d = x - start;
        self.cumulative[p] + d * l + (r - l) * d * d / (2.0 * len)
    }

    /// Smallest x with cdf(x) = m (m clamped to [0, 1]).
    pub fn quantile(&self, m: f64) -> f64 {
        if let Some(rho) = self.uniform {
            return (self.lo + m / rho).clamp(self.lo, self.hi);
        }
        let total = *self.cumulative.last().unwrap();
        let m = m.clamp(0.0, total);
        // first patch whose right cumulative value reaches m
        let p = self
            .cumulative
            .partition_point(|&c| c < m)
            .saturating_sub(1)
            .min(self.breaks.len() - 2);
        let (l, r) = Self::patch_ends(&self.values, p);
        let start = self.breaks[p];
        let len = self.breaks[p + 1] - start;
        let q = m - self.cumulative[p];
        let a = (r - l) / (2.0 * len);
        let disc = (l * l + 4.0 * a * q).max(0.0);
        let denom = l + disc.sqrt();
        let d = if denom > 0.0 { 2.0 * q / denom } else { 0.0 };
        (start + d.clamp(0.0, len)).min(self.hi)
    }

    /// ∫_a^b scale·(x − y)² ρ(x) dx.
    pub fn second_moment(&self, a: f64, b: f64, y: f64, scale: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if let Some(rho) = self.uniform {
            let cube = |t: f64| t * t * t;
            return scale * rho * (cube(b - y) - cube(a - y)) / 3.0;
        }
        let [a0, a1, a2] = self.moments_to(a);
        let [b0, b1, b2] = self.moments_to(b);
        let c = y - self.lo;
        let value = (b2 - a2) - 2.0 * c * (b1 - a1) + c * c * (b0 - a0);
        scale * value.max(0.0)
    }

    /// ∫_lo^x (t − lo)^k ρ(t) dt for k = 0, 1, 2.
    pub(crate) fn moments_to(&self, x: f64) -> [f64; 3] {
        let x = x.clamp(self.lo, self.hi);
        if let Some(rho) = self.uniform {
            let z = x - self.lo;
            return [rho * z, rho * z * z / 2.0, rho * z * z * z / 3.0];
        }
        let p = patch_index(x, self.lo, self.h, self.values.len());
        let (l, r) = Self::patch_ends(&self.values, p);
        let start = self.breaks[p];
        let len = self.breaks[p + 1] - start;
        let slope = if len > 0.0 { (r - l) / len } else { 0.0 };
        let [m0, m1, m2] = patch_moments(start - self.lo, l, slope, x - start);
        [
            self.cumulative[p] + m0,
            self.moment1[p] + m1,
            self.moment2[p] + m2,
        ]
    }
}

/// Two-dimensional density: clamped bilinear interpolant on the box.
#[derive(Debug, Clone)]
pub struct PlaneDensity {
    pub(crate) x: [f64; 2],
    pub(crate) y: [f64; 2],
    pub(crate) nx: usize,
    pub(crate) ny: usize,
    hx: f64,
    hy: f64,
    values: Vec<f64>,
    pub(crate) uniform: Option<f64>,
    pub(crate) xbreaks: Vec<f64>,
    pub(crate) ybreaks: Vec<f64>,
}

impl PlaneDensity {
    pub fn new(domain: &DomainSpec, density: &DensityField) -> Self {
        let [x, y] = [domain.bounds()[0], domain.bounds()[1]];
        let (nx, ny) = (domain.resolution()[0], domain.resolution()[1]);
        let uniform = match density.kind() {
            DensityKind::Uniform => Some(1.0 / domain.volume()),
            DensityKind::Tabulated => None,
        };
        Self {
            x,
            y,
            nx,
            ny,
            hx: (x[1] - x[0]) / nx as f64,
            hy: (y[1] - y[0]) / ny as f64,
            values: density.values().to_vec(),
            uniform,
            xbreaks: axis_breaks(x[0], x[1], nx),
            ybreaks: axis_breaks(y[0], y[1], ny),
        }
    }

    #[inline]
    pub fn value_at(&self, p: Point) -> f64 {
        if let Some(rho) = self.uniform {
            return rho;
        }
        let (i0, i1, t) = axis_weights(p[0], self.x[0], self.hx, self.nx);
        let (j0, j1, u) = axis_weights(p[1], self.y[0], self.hy, self.ny);
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        (1.0 - u) * ((1.0 - t) * v(i0, j0) + t * v(i1, j0))
            + u * ((1.0 - t) * v(i0, j1) + t * v(i1, j1))
    }

    #[inline]
    pub(crate) fn column_of(&self, x: f64) -> usize {
        patch_index(x, self.x[0], self.hx, self.nx)
    }

    #[inline]
    pub(crate) fn row_of(&self, y: f64) -> usize {
        patch_index(y, self.y[0], self.hy, self.ny)
    }
}
