//! Atom dictionaries learned by mini-batch k-means.
//!
//! Samples (columns of the `m x N` sample matrix) are clustered into `q`
//! groups; the centres become the atoms used as selection targets during
//! pruning. Seeding is greedy k-means++, updates follow the per-centre
//! learning-rate scheme of web-scale mini-batch k-means, and a final full-batch
//! Lloyd pass tidies up the centres. When the mini-batch is the whole data set
//! every iteration is a plain Lloyd step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::{sq_dist, SampleMatrix};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    /// Mini-batch size; `None` means `min(256, N)`.
    pub batch_size: Option<usize>,
    pub max_iter: usize,
    /// Run one full-batch Lloyd pass after the mini-batch iterations.
    pub refine: bool,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            batch_size: None,
            max_iter: 100,
            refine: true,
        }
    }
}

impl KMeansOptions {
    pub fn full_batch(max_iter: usize) -> Self {
        Self {
            batch_size: Some(usize::MAX),
            max_iter,
            refine: false,
        }
    }

    fn resolved_batch(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(256).clamp(1, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    /// `q` atoms of dimension `m`.
    pub atoms: Vec<Vec<f64>>,
    /// Sum of squared distances of the samples to their nearest atom.
    pub inertia: f64,
    pub seed: u64,
    /// Inertia at each full-batch assignment step, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

impl Dictionary {
    pub fn q(&self) -> usize {
        self.atoms.len()
    }

    pub fn dim(&self) -> usize {
        self.atoms.first().map_or(0, Vec::len)
    }

    /// Index of the atom nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.atoms, x).0
    }
}

pub fn learn_dictionary(
    x: &SampleMatrix,
    q: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<Dictionary> {
    let n = x.len();
    if q == 0 {
        return Err(Error::InvalidConfig("atom count must be at least 1".into()));
    }
    if q > n {
        return Err(Error::QExceedsSamples { q, samples: n });
    }
    if !x.is_finite() {
        return Err(Error::InvalidConfig("sample matrix has non-finite entries".into()));
    }
    let points = x.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres = seed_centres(points, q, &mut rng);
    let mut history = Vec::new();
    let mut reseeder = Reseeder::new(q);

    let batch = options.resolved_batch(n);
    if batch == n {
        let mut previous: Option<Vec<usize>> = None;
        for _ in 0..options.max_iter {
            let (labels, inertia) = lloyd_step(points, &mut centres, &mut reseeder)?;
            history.push(inertia);
            if previous.as_ref() == Some(&labels) {
                break;
            }
            previous = Some(labels);
        }
    } else {
        let mut counts = vec![0usize; q];
        for _ in 0..options.max_iter {
            let idx = rand::seq::index::sample(&mut rng, n, batch);
            let labels: Vec<usize> = idx
                .iter()
                .map(|j| nearest(&centres, &points[j]).0)
                .collect();
            for (j, c) in idx.iter().zip(labels) {
                counts[c] += 1;
                let eta = 1.0 / counts[c] as f64;
                for (ci, xi) in centres[c].iter_mut().zip(&points[j]) {
                    *ci = (1.0 - eta) * *ci + eta * xi;
                }
            }
        }
    }
    if options.refine {
        let (_, inertia) = lloyd_step(points, &mut centres, &mut reseeder)?;
        history.push(inertia);
    }

    let inertia = assign(points, &centres).iter().map(|(_, d)| d).sum();
    Ok(Dictionary {
        atoms: centres,
        inertia,
        seed,
        history,
    })
}

fn nearest(centres: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centres.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centres: &[Vec<f64>]) -> Vec<(usize, f64)> {
    #[cfg(feature = "parallel")]
    {
        points.par_iter().map(|p| nearest(centres, p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(|p| nearest(centres, p)).collect()
    }
}

/// Greedy k-means++: each new centre is the best of a few candidates drawn
/// with probability proportional to the squared distance to the current set.
fn seed_centres(points: &[Vec<f64>], q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (q as f64).ln().floor() as usize;
    let first = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut centres = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();

    while centres.len() < q {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..trials {
                let cand = draw_weighted(&d2, total, rng);
                let potential: f64 = points
                    .iter()
                    .zip(&d2)
                    .map(|(p, &d)| d.min(sq_dist(p, &points[cand])))
                    .sum();
                if best.is_none_or(|(_, b)| potential < b) {
                    best = Some((cand, potential));
                }
            }
            best.map(|(c, _)| c).unwrap_or(0)
        } else {
            // every point coincides with a centre: fall back to an unused index
            let free: Vec<usize> = (0..n).filter(|&j| !chosen[j]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
        centres.push(points[pick].clone());
    }
    centres
}

fn draw_weighted(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut r = rng.random_range(0.0..total);
    let mut last = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = j;
        if r < w {
            return j;
        }
        r -= w;
    }
    last
}

struct Reseeder {
    q: usize,
    consecutive_failures: usize,
}

impl Reseeder {
    fn new(q: usize) -> Self {
        Self {
            q,
            consecutive_failures: 0,
        }
    }

    fn failed(&mut self) -> Result<()> {
        self.consecutive_failures += 1;
        if self.consecutive_failures >= self.q {
            return Err(Error::EmptyClusterUnrecoverable {
                attempts: self.consecutive_failures,
            });
        }
        Ok(())
    }
}

/// Assigns every point, moves each centre to the mean of its points and
/// reseeds empty clusters at the point farthest from its centre. Returns the
/// labels and the inertia of the assignment.
fn lloyd_step(
    points: &[Vec<f64>],
    centres: &mut [Vec<f64>],
    reseeder: &mut Reseeder,
) -> Result<(Vec<usize>, f64)> {
    let assigned = assign(points, centres);
    let inertia = assigned.iter().map(|(_, d)| d).sum();
    let dim = centres[0].len();
    let mut sums = vec![vec![0.0; dim]; centres.len()];
    let mut counts = vec![0usize; centres.len()];
    for (p, &(c, _)) in points.iter().zip(&assigned) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, (sum, &count)) in sums.into_iter().zip(&counts).enumerate() {
        if count > 0 {
            centres[c] = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }

    let mut dists: Vec<f64> = assigned.iter().map(|(_, d)| *d).collect();
    for c in (0..centres.len()).filter(|&c| counts[c] == 0) {
        let far = dists
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (j, &d)| if d > best.1 { (j, d) } else { best });
        if far.1 > 0.0 {
            centres[c] = points[far.0].clone();
            dists[far.0] = 0.0;
            reseeder.consecutive_failures = 0;
        } else {
            reseeder.failed()?;
        }
    }
    Ok((assigned.into_iter().map(|(c, _)| c).collect(), inertia))
}
