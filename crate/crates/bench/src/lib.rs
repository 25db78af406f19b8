//! Fixed instances shared by the benchmarks.

use sdot_core::{
    Backend, DensityField, DomainSpec, QuadraticCost, ScalarConvexFn, SiteSet, SplittingFee,
    TransportProblem,
};

/// n sites on a jittered lattice in the unit square.
pub fn lattice_sites(n: usize) -> Vec<[f64; 2]> {
    let side = (n as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|k| {
            let (i, j) = (k % side, k / side);
            let jitter = 0.1 * ((k as f64 * 1.618).fract() - 0.5);
            [
                (i as f64 + 0.5 + jitter) / side as f64,
                (j as f64 + 0.5 - jitter) / side as f64,
            ]
        })
        .collect()
}

pub fn plane_problem(n: usize, resolution: usize, lipschitz_density: bool) -> TransportProblem {
    let domain = DomainSpec::unit_square(resolution).expect("valid square");
    let density = if lipschitz_density {
        DensityField::from_fn(&domain, 1.0, |p| 1.0 + 0.5 * p[0] + 0.25 * (p[0] - p[1]).abs())
            .expect("positive density")
    } else {
        DensityField::uniform(&domain)
    };
    TransportProblem::new(
        domain,
        density,
        SiteSet::new(lattice_sites(n)).expect("distinct sites"),
        QuadraticCost::default(),
        Backend::Exact,
    )
    .expect("consistent problem")
}

pub fn line_problem(n: usize) -> TransportProblem {
    let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    TransportProblem::unit_interval(&xs, 0.5, 200).expect("valid interval")
}

/// ½(x − 0.1)² on [floor, 1] for every site.
pub fn quadratic_fee(n: usize, floor: f64) -> SplittingFee {
    let part = ScalarConvexFn::quadratic(0.1, 1.0, [floor, 1.0]).expect("valid quadratic");
    SplittingFee::uniform(part, n).expect("feasible fee")
}

pub fn offsets(n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|k| spread * ((k as f64 * 0.7548).fract() - 0.5)).collect()
}
