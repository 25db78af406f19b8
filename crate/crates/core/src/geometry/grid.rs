use rayon::prelude::*;

use super::TransportProblem;

/// Midpoint-rule masses; rows are reduced in index order so the result does
/// not depend on the thread count.
pub(crate) fn masses(problem: &TransportProblem, psi: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let domain = problem.domain();
    let nx = domain.resolution()[0];
    let rows = domain.node_count() / nx;
    let values = problem.density().values();
    let vol = domain.cell_volume();
    let n = problem.n_sites();
    let per_row: Vec<(Vec<f64>, Vec<usize>)> = (0..rows)
        .into_par_iter()
        .map(|iy| {
            let mut m = vec![0.0; n];
            let mut owners = Vec::with_capacity(nx);
            for ix in 0..nx {
                let k = iy * nx + ix;
                let i = problem.assign(domain.node(k), psi);
                m[i] += values[k] * vol;
                owners.push(i);
            }
            (m, owners)
        })
        .collect();
    let mut total = vec![0.0; n];
    let mut assignment = Vec::with_capacity(domain.node_count());
    for (m, owners) in per_row {
        for (t, v) in total.iter_mut().zip(m) {
            *t += v;
        }
        assignment.extend(owners);
    }
    (total, assignment)
}

pub(crate) fn cost(problem: &TransportProblem, assignment: &[usize]) -> f64 {
    let domain = problem.domain();
    let nx = domain.resolution()[0];
    let values = problem.density().values();
    let vol = domain.cell_volume();
    let points = problem.sites().points();
    let c = problem.cost();
    let per_row: Vec<f64> = assignment
        .par_chunks(nx)
        .enumerate()
        .map(|(iy, owners)| {
            owners
                .iter()
                .enumerate()
                .map(|(ix, &i)| {
                    let k = iy * nx + ix;
                    c.eval(domain.node(k), points[i]) * values[k] * vol
                })
                .sum()
        })
        .collect();
    per_row.iter().sum()
}
