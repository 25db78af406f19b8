//! Hausdorff distance between sets of the form Π[a_i, b_i] ∩ Δ.
//!
//! Distance to a convex set is convex, so the farthest point of one polytope
//! from the other is a vertex; vertices have all but one coordinate at a box
//! end, and projection onto box ∩ {Σw = 1} is a clamp with one multiplier.

use crate::error::{Error, Result};

const MAX_DIM: usize = 20;

fn check_boxes(boxes: &[[f64; 2]]) -> Result<()> {
    if boxes.is_empty() || boxes.len() > MAX_DIM {
        return Err(Error::invalid(
            "boxes",
            format!("need between 1 and {MAX_DIM} intervals, got {}", boxes.len()),
        ));
    }
    if boxes.iter().any(|[a, b]| !(a.is_finite() && b.is_finite() && a <= b)) {
        return Err(Error::invalid("boxes", "every interval needs finite a <= b"));
    }
    Ok(())
}

/// Vertices of the polytope box ∩ {Σw = 1}; empty if they do not meet.
pub fn box_simplex_vertices(boxes: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
    check_boxes(boxes)?;
    let n = boxes.len();
    let mut out = Vec::new();
    for free in 0..n {
        for mask in 0..(1usize << (n - 1)) {
            let mut w = vec![0.0; n];
            let mut bit = 0;
            for (i, b) in boxes.iter().enumerate() {
                if i == free {
                    continue;
                }
                w[i] = b[(mask >> bit) & 1];
                bit += 1;
            }
            let rest: f64 = w.iter().sum();
            let x = 1.0 - rest;
            let [a, b] = boxes[free];
            let slack = 1e-12;
            if x >= a - slack && x <= b + slack {
                w[free] = x.clamp(a, b);
                out.push(w);
            }
        }
    }
    Ok(out)
}

/// Euclidean projection of p onto box ∩ {Σw = 1}.
fn project(p: &[f64], boxes: &[[f64; 2]]) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        p.iter()
            .zip(boxes)
            .map(|(&x, [a, b])| (x - lambda).clamp(*a, *b))
            .collect()
    };
    let sum = |lambda: f64| at(lambda).iter().sum::<f64>();
    let mut lo = p.iter().zip(boxes).map(|(x, b)| x - b[1]).fold(f64::INFINITY, f64::min);
    let mut hi = p.iter().zip(boxes).map(|(x, b)| x - b[0]).fold(f64::NEG_INFINITY, f64::max);
    // sum(lo) = Σb >= 1 >= Σa = sum(hi)
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (wl, wh) = (at(lo), at(hi));
    let (sl, sh): (f64, f64) = (wl.iter().sum(), wh.iter().sum());
    let t = if sl > sh { ((sl - 1.0) / (sl - sh)).clamp(0.0, 1.0) } else { 0.0 };
    wl.iter().zip(&wh).map(|(a, b)| a + t * (b - a)).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// d_H(A ∩ Δ, B ∩ Δ) for boxes A and B.
pub fn box_simplex_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "boxes",
            expected: a.len(),
            got: b.len(),
        });
    }
    let va = box_simplex_vertices(a)?;
    let vb = box_simplex_vertices(b)?;
    if va.is_empty() || vb.is_empty() {
        return Err(Error::invalid("boxes", "a box does not meet the simplex"));
    }
    let directed = |from: &[Vec<f64>], onto: &[[f64; 2]]| {
        from.iter()
            .map(|v| distance(v, &project(v, onto)))
            .fold(0.0, f64::max)
    };
    Ok(directed(&va, b).max(directed(&vb, a)))
}

/// 4·Σ_i max(|a_i − c_i|, |b_i − d_i|), an upper bound on the distance above.
pub fn hypercube_hausdorff_bound(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    4.0 * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
        .sum::<f64>()
}
