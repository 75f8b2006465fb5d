//! Brute-force references for the selector and the term library.

use nalgebra::{DMatrix, DVector};

fn centred(v: &[f64]) -> DVector<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    DVector::from_iterator(v.len(), v.iter().map(|x| x - mean))
}

/// Squared residual of `b` after least-squares projection onto the columns of `a`.
fn residual_sq(a: &[DVector<f64>], b: &DVector<f64>) -> f64 {
    if a.is_empty() {
        return b.norm_squared();
    }
    let m = DMatrix::from_columns(a);
    let svd = m.svd(true, true);
    let coef = svd.solve(b, 1e-12).expect("svd solve");
    (b - DMatrix::from_columns(a) * coef).norm_squared()
}

/// Greedy selection re-derived from projections: at each step every live
/// candidate is scored by how much adding it shrinks the total squared
/// residual of the unit-norm centred targets. Candidates whose distance to the
/// current span is below `1e-10` of their own centred norm are skipped.
pub fn greedy_selection(candidates: &[Vec<f64>], targets: &[Vec<f64>], k: usize) -> Vec<usize> {
    let cands: Vec<DVector<f64>> = candidates.iter().map(|c| centred(c)).collect();
    let targets: Vec<DVector<f64>> = targets
        .iter()
        .map(|t| {
            let c = centred(t);
            let n = c.norm();
            c / n
        })
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k {
        let basis: Vec<DVector<f64>> = chosen.iter().map(|&i| cands[i].clone()).collect();
        let base: f64 = targets.iter().map(|t| residual_sq(&basis, t)).sum();
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in cands.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let norm = c.norm();
            if norm <= 1e-12 * (c.len() as f64).sqrt() {
                continue;
            }
            if residual_sq(&basis, c).sqrt() < 1e-10 * norm {
                continue;
            }
            let mut with = basis.clone();
            with.push(c.clone());
            let after: f64 = targets.iter().map(|t| residual_sq(&with, t)).sum();
            let gain = base - after;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, _)) => chosen.push(i),
            None => break,
        }
    }
    chosen
}

/// Number of non-decreasing index tuples of length 1..=degree over `n`
/// symbols, counted by walking all `n^d` tuples.
pub fn multiset_count(n: usize, degree: usize) -> usize {
    let mut total = 0;
    for d in 1..=degree {
        let combos = n.pow(d as u32);
        for code in 0..combos {
            let mut digits = Vec::with_capacity(d);
            let mut c = code;
            for _ in 0..d {
                digits.push(c % n);
                c /= n;
            }
            if digits.windows(2).all(|w| w[0] >= w[1]) {
                total += 1;
            }
        }
    }
    total
}
