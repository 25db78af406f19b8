//! Seeded random instances for the verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdot_core::regularize::convexify_scalar;
use sdot_core::{
    Backend, DensityField, DomainSpec, QuadraticCost, ScalarConvexFn, SiteSet, SplittingFee,
    TransportProblem,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n sites on (0.05, 0.95) at least 0.05 apart, with a smooth positive density.
pub fn line_problem(r: &mut ChaCha8Rng, n: usize) -> TransportProblem {
    let xs = loop {
        let mut xs: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.95)).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).all(|w| w[1] - w[0] >= 0.05) {
            break xs;
        }
    };
    let domain = DomainSpec::interval(0.0, 1.0, 200).expect("valid interval");
    let phase = r.random_range(0.0..1.0);
    let density = DensityField::from_fn(&domain, 1.0, |p| {
        1.0 + 0.5 * (2.0 * std::f64::consts::PI * (p[0] + phase)).sin()
    })
    .expect("positive density");
    TransportProblem::new(
        domain,
        density,
        SiteSet::on_line(&xs).expect("distinct sites"),
        QuadraticCost::new(r.random_range(0.5..2.0)).expect("positive scale"),
        Backend::Exact,
    )
    .expect("consistent problem")
}

pub fn plane_problem(r: &mut ChaCha8Rng, n: usize, resolution: usize) -> TransportProblem {
    let domain = DomainSpec::unit_square(resolution).expect("valid square");
    let mut points: Vec<[f64; 2]> = Vec::new();
    while points.len() < n {
        let p = [r.random_range(0.05..0.95), r.random_range(0.05..0.95)];
        if points.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.05) {
            points.push(p);
        }
    }
    let (fx, fy) = (r.random_range(1.0..3.0), r.random_range(1.0..3.0));
    let density = DensityField::from_fn(&domain, 1.0, |p| {
        1.0 + 0.3 * (fx * p[0]).sin() * (fy * p[1]).cos()
    })
    .expect("positive density");
    TransportProblem::new(
        domain,
        density,
        SiteSet::new(points).expect("distinct sites"),
        QuadraticCost::default(),
        Backend::Exact,
    )
    .expect("consistent problem")
}

/// Quadratics on [floor, 1].
pub fn quadratic_fee(r: &mut ChaCha8Rng, n: usize, floor: f64) -> SplittingFee {
    let parts = (0..n)
        .map(|_| {
            ScalarConvexFn::quadratic(r.random_range(0.0..0.6), r.random_range(0.5..3.0), [floor, 1.0])
                .expect("valid quadratic")
        })
        .collect();
    SplittingFee::new(parts).expect("feasible fee")
}

/// Parts whose slopes blow up at both ends of [0, 1].
pub fn smooth_fee(r: &mut ChaCha8Rng, n: usize) -> SplittingFee {
    let parts = (0..n)
        .map(|_| {
            let scale = r.random_range(0.05..1.0);
            match r.random_range(0..3) {
                0 => ScalarConvexFn::entropy(scale, [0.0, 1.0]),
                1 => ScalarConvexFn::log_barrier(scale, [0.0, 1.0], [0.0, 1.0]),
                _ => ScalarConvexFn::quadratic(r.random_range(0.0..1.0), r.random_range(0.5..3.0), [0.0, 1.0])
                    .and_then(|inner| convexify_scalar(&inner, scale)),
            }
            .expect("valid part")
        })
        .collect();
    SplittingFee::new(parts).expect("feasible fee")
}

pub fn random_psi(r: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-spread..spread)).collect()
}
