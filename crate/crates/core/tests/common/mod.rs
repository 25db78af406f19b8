//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdot_core::{
    Backend, DensityField, DomainSpec, QuadraticCost, ScalarConvexFn, SiteSet, SplittingFee,
    TransportProblem,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n sorted points of (0.05, 0.95) at least `gap` apart.
pub fn line_sites(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).all(|w| w[1] - w[0] >= gap) {
            return xs;
        }
    }
}

/// Sites on [0, 1] with either the uniform density or a smooth positive bump.
pub fn line_problem(rng: &mut ChaCha8Rng, n: usize, tabulated: bool) -> TransportProblem {
    let xs = line_sites(rng, n, 0.05);
    let domain = DomainSpec::interval(0.0, 1.0, 200).unwrap();
    let density = if tabulated {
        let phase = rng.random_range(0.0..1.0);
        DensityField::from_fn(&domain, 1.0, |p| {
            1.0 + 0.5 * (2.0 * std::f64::consts::PI * (p[0] + phase)).sin()
        })
        .unwrap()
    } else {
        DensityField::uniform(&domain)
    };
    TransportProblem::new(
        domain,
        density,
        SiteSet::on_line(&xs).unwrap(),
        QuadraticCost::new(rng.random_range(0.5..2.0)).unwrap(),
        Backend::Exact,
    )
    .unwrap()
}

pub fn plane_problem(rng: &mut ChaCha8Rng, n: usize, resolution: usize) -> TransportProblem {
    let domain = DomainSpec::unit_square(resolution).unwrap();
    let mut points: Vec<[f64; 2]> = Vec::new();
    while points.len() < n {
        let p = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        if points.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.05) {
            points.push(p);
        }
    }
    let (fx, fy) = (rng.random_range(1.0..3.0), rng.random_range(1.0..3.0));
    let density = DensityField::from_fn(&domain, 1.0, |p| {
        1.0 + 0.3 * (fx * p[0]).sin() * (fy * p[1]).cos()
    })
    .unwrap();
    TransportProblem::new(
        domain,
        density,
        SiteSet::new(points).unwrap(),
        QuadraticCost::default(),
        Backend::Exact,
    )
    .unwrap()
}

/// Quadratics on [a_i, 1] with small a_i: solver-ready, not essentially smooth.
pub fn quadratic_fee(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> SplittingFee {
    SplittingFee::new(
        (0..n)
            .map(|_| {
                ScalarConvexFn::quadratic(
                    rng.random_range(0.0..0.6),
                    rng.random_range(0.5..3.0),
                    [floor, 1.0],
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Parts with unbounded slopes at both ends, so conjugate maximisers are interior.
pub fn smooth_fee(rng: &mut ChaCha8Rng, n: usize) -> SplittingFee {
    SplittingFee::new(
        (0..n)
            .map(|_| {
                let scale = rng.random_range(0.05..1.0);
                match rng.random_range(0..3) {
                    0 => ScalarConvexFn::entropy(scale, [0.0, 1.0]).unwrap(),
                    1 => ScalarConvexFn::log_barrier(scale, [0.0, 1.0], [0.0, 1.0]).unwrap(),
                    _ => {
                        let inner = ScalarConvexFn::quadratic(
                            rng.random_range(0.0..1.0),
                            rng.random_range(0.5..3.0),
                            [0.0, 1.0],
                        )
                        .unwrap();
                        sdot_core::regularize::convexify_scalar(&inner, scale).unwrap()
                    }
                }
            })
            .collect(),
    )
    .unwrap()
}

pub fn random_psi(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-spread..spread)).collect()
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
