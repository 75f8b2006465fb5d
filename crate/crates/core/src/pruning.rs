//! Sample pruning: mini-batch FastCan and the random baseline.
//!
//! Mini-batch FastCan spreads the `n` samples to select over the `q` atoms of a
//! dictionary in batches of at most `p` (the batch matrix). For every
//! `(atom, batch)` slot the greedy selector picks that many samples from the
//! remaining pool, using the atom as the single target; picked samples leave
//! the pool. Redundancy is handled inside a batch through deflation and
//! ignored across batches.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::{learn_dictionary, Dictionary, KMeansOptions};
use crate::error::{Error, Result};
use crate::fastcan::{select_up_to, SelectionProblem};
use crate::samples::SampleMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMethod {
    MinibatchFastcan,
    Random,
}

impl PruneMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PruneMethod::MinibatchFastcan => "minibatch_fastcan",
            PruneMethod::Random => "random",
        }
    }
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "minibatch_fastcan" | "fastcan" => Ok(PruneMethod::MinibatchFastcan),
            "random" => Ok(PruneMethod::Random),
            other => Err(Error::InvalidConfig(format!("unknown pruning method {other:?}"))),
        }
    }
}

/// Effective batch size. A missing or oversized request falls back to
/// `ceil(n / q)`, which is then capped at the feature count `m`. A request of
/// zero counts as missing.
pub fn resolve_batch_size(n: usize, q: usize, m: usize, p: Option<usize>) -> usize {
    let per_atom = n.div_ceil(q.max(1));
    match p {
        Some(p) if p > 0 && p <= per_atom => p,
        _ => per_atom.min(m),
    }
}

/// Allocation of the `n` samples to `(atom, batch)` slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMatrix {
    /// `q` rows of `t` entries.
    pub entries: Vec<Vec<usize>>,
    pub p: usize,
    pub t: usize,
}

impl BatchMatrix {
    pub fn q(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> usize {
        self.entries.iter().flatten().sum()
    }

    pub fn atom_total(&self, i: usize) -> usize {
        self.entries[i].iter().sum()
    }
}

/// Fills the `q x t` matrix column by column, atom by atom, with `p` until the
/// remaining budget drops below `p`; that remainder is the last nonzero entry.
pub fn build_batch_matrix(n: usize, q: usize, p: usize) -> Result<BatchMatrix> {
    if n == 0 || q == 0 || p == 0 {
        return Err(Error::InvalidConfig(format!(
            "batch matrix needs n, q, p >= 1 (got {n}, {q}, {p})"
        )));
    }
    let t = n.div_ceil(q * p);
    let mut entries = vec![vec![0; t]; q];
    let mut remaining = n;
    for j in 0..t {
        for row in entries.iter_mut() {
            let take = remaining.min(p);
            row[j] = take;
            remaining -= take;
        }
    }
    Ok(BatchMatrix { entries, p, t })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub n: usize,
    pub q: Option<usize>,
    /// Effective batch size after [`resolve_batch_size`].
    pub p: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    /// Column indices into the sample matrix, in selection order.
    pub indices: Vec<usize>,
    pub method: PruneMethod,
    pub config: PruneConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches: Option<BatchMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<Dictionary>,
}

/// Learns a `q`-atom dictionary with `seed` and prunes against it.
pub fn minibatch_fastcan(
    x: &SampleMatrix,
    q: usize,
    n: usize,
    p: Option<usize>,
    seed: u64,
    kmeans: &KMeansOptions,
) -> Result<PruneResult> {
    if n > x.len() {
        return Err(Error::NExceedsCandidates {
            n,
            candidates: x.len(),
        });
    }
    let dictionary = learn_dictionary(x, q, seed, kmeans)?;
    let mut result = prune_minibatch_fastcan(x, &dictionary, n, p, seed)?;
    result.dictionary = Some(dictionary);
    Ok(result)
}

pub fn prune_minibatch_fastcan(
    x: &SampleMatrix,
    dictionary: &Dictionary,
    n: usize,
    p: Option<usize>,
    seed: u64,
) -> Result<PruneResult> {
    let total = x.len();
    if n > total {
        return Err(Error::NExceedsCandidates {
            n,
            candidates: total,
        });
    }
    if dictionary.dim() != x.dim() {
        return Err(Error::InvalidConfig(format!(
            "atom dimension {} does not match sample dimension {}",
            dictionary.dim(),
            x.dim()
        )));
    }
    let q = dictionary.q();
    let p = resolve_batch_size(n, q, x.dim(), p);
    let batches = build_batch_matrix(n, q, p)?;
    let config = PruneConfig {
        n,
        q: Some(q),
        p: Some(p),
        seed,
    };

    let indices = if n == total {
        (0..total).collect()
    } else {
        let mut pool: Vec<usize> = (0..total).collect();
        let mut indices = Vec::with_capacity(n);
        for (i, atom) in dictionary.atoms.iter().enumerate() {
            for (j, &size) in batches.entries[i].iter().enumerate() {
                if size == 0 {
                    continue;
                }
                let picked = select_batch(x, &pool, atom, size).map_err(|e| {
                    Error::RankExhaustedInBatch {
                        atom: i,
                        batch: j,
                        source: Box::new(e),
                    }
                })?;
                pool.retain(|g| !picked.contains(g));
                indices.extend(picked);
            }
        }
        indices
    };

    Ok(PruneResult {
        indices,
        method: PruneMethod::MinibatchFastcan,
        config,
        batches: Some(batches),
        dictionary: None,
    })
}

/// Picks `size` samples from `pool` against `atom`. If the pool's span is used
/// up before the batch is full, the rest is picked with a fresh basis.
fn select_batch(x: &SampleMatrix, pool: &[usize], atom: &[f64], size: usize) -> Result<Vec<usize>> {
    let mut local: Vec<usize> = pool.to_vec();
    let mut picked = Vec::with_capacity(size);
    while picked.len() < size {
        let problem = SelectionProblem::new(
            local.iter().map(|&g| x.point(g)),
            [atom],
            size - picked.len(),
        );
        let sel = select_up_to(&problem)?;
        if sel.indices.is_empty() {
            return Err(Error::RankExhausted {
                selected: picked.len(),
                requested: size,
            });
        }
        let globals: Vec<usize> = sel.indices.iter().map(|&l| local[l]).collect();
        local.retain(|g| !globals.contains(g));
        picked.extend(globals);
    }
    Ok(picked)
}

pub fn prune_random(candidates: usize, n: usize, seed: u64) -> Result<PruneResult> {
    if n > candidates {
        return Err(Error::NExceedsCandidates { n, candidates });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, candidates, n).into_vec();
    Ok(PruneResult {
        indices,
        method: PruneMethod::Random,
        config: PruneConfig {
            n,
            q: None,
            p: None,
            seed,
        },
        batches: None,
        dictionary: None,
    })
}
