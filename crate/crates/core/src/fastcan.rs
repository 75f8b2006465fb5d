//! Greedy correlation-based column selection with orthogonal deflation.
//!
//! Candidates and targets are centered. An orthonormal basis of the selected
//! candidates is kept with modified Gram-Schmidt; every remaining candidate is
//! stored as its residual against that basis. A candidate `r` is scored as
//!
//! ```text
//! score(r) = sum_t (r . y_t)^2 / (|r|^2 |y_t|^2)
//! ```
//!
//! over the centered target columns `y_t`, so a score lies in `[0, t]`. With a
//! single target this is the squared correlation of the deflated candidate with
//! the target; summed over the selection steps it gives the `R^2` of the target
//! regressed on the selected columns.

use crate::error::{Error, Result};
use crate::samples::dot;

/// A candidate whose deflated norm drops below this fraction of its centered
/// norm is treated as lying in the span of the current selection.
pub const RANK_TOL: f64 = 1e-10;

/// Relative threshold below which a centered vector counts as constant.
const ZERO_VARIANCE_RTOL: f64 = 1e-12;

/// Columns to choose from, the targets to explain, and how many to pick.
#[derive(Clone, Debug)]
pub struct SelectionProblem<'a> {
    /// Candidate columns, each with one entry per observation.
    pub candidates: Vec<&'a [f64]>,
    /// Target columns, each with one entry per observation.
    pub targets: Vec<&'a [f64]>,
    pub k: usize,
    /// Candidates deflated against before scoring; never returned.
    pub preselected: Vec<usize>,
}

impl<'a> SelectionProblem<'a> {
    pub fn new(
        candidates: impl IntoIterator<Item = &'a [f64]>,
        targets: impl IntoIterator<Item = &'a [f64]>,
        k: usize,
    ) -> Self {
        Self {
            candidates: candidates.into_iter().collect(),
            targets: targets.into_iter().collect(),
            k,
            preselected: Vec::new(),
        }
    }

    pub fn with_preselected(mut self, preselected: Vec<usize>) -> Self {
        self.preselected = preselected;
        self
    }

    fn n_obs(&self) -> usize {
        self.targets.first().map_or(0, |t| t.len())
    }

    fn validate(&self) -> Result<()> {
        let n_obs = self.n_obs();
        if self.targets.is_empty() {
            return Err(Error::InvalidConfig("selection needs at least one target column".into()));
        }
        if n_obs < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                available: n_obs,
            });
        }
        if self.targets.iter().any(|t| t.len() != n_obs)
            || self.candidates.iter().any(|c| c.len() != n_obs)
        {
            return Err(Error::InvalidConfig(
                "candidates and targets must share the observation count".into(),
            ));
        }
        if let Some(&bad) = self.preselected.iter().find(|&&i| i >= self.candidates.len()) {
            return Err(Error::InvalidConfig(format!("preselected index {bad} out of range")));
        }
        if self.k + self.preselected.len() > self.candidates.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot select {} of {} candidates ({} preselected)",
                self.k,
                self.candidates.len(),
                self.preselected.len()
            )));
        }
        Ok(())
    }
}

/// Selected candidate indices in selection order, with the score each one had
/// when it was picked.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

pub fn select_greedy(problem: &SelectionProblem<'_>) -> Result<Selection> {
    let selection = select_up_to(problem)?;
    if selection.indices.len() < problem.k {
        return Err(Error::RankExhausted {
            selected: selection.indices.len(),
            requested: problem.k,
        });
    }
    Ok(selection)
}

/// Like [`select_greedy`], but stops early instead of failing once no live
/// candidate is left, returning the picks made so far.
pub fn select_up_to(problem: &SelectionProblem<'_>) -> Result<Selection> {
    problem.validate()?;
    let targets = problem
        .targets
        .iter()
        .enumerate()
        .map(|(column, t)| unit_centered(t).ok_or(Error::DegenerateTarget { column }))
        .collect::<Result<Vec<_>>>()?;

    let mut state = Deflation::new(&problem.candidates);
    for &i in &problem.preselected {
        state.absorb(i);
    }

    let mut indices = Vec::with_capacity(problem.k);
    let mut scores = Vec::with_capacity(problem.k);
    for _ in 0..problem.k {
        let Some((best, score)) = state.best(&targets) else {
            break;
        };
        state.absorb(best);
        indices.push(best);
        scores.push(score);
    }
    Ok(Selection { indices, scores })
}

/// Centers `v`; returns `None` when it is constant.
pub(crate) fn centered(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = dot(&c, &c);
    let raw = dot(v, v);
    if ss <= ZERO_VARIANCE_RTOL * ZERO_VARIANCE_RTOL * raw || ss == 0.0 {
        None
    } else {
        Some(c)
    }
}

fn unit_centered(v: &[f64]) -> Option<Vec<f64>> {
    let mut c = centered(v)?;
    let norm = dot(&c, &c).sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    Some(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Status {
    Available,
    Constant,
    Taken,
}

/// Residuals of every candidate against the orthonormal basis of the
/// candidates absorbed so far.
struct Deflation {
    residuals: Vec<Vec<f64>>,
    norms: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<Vec<f64>>,
}

impl Deflation {
    fn new(candidates: &[&[f64]]) -> Self {
        let n_obs = candidates.first().map_or(0, |c| c.len());
        let mut residuals = Vec::with_capacity(candidates.len());
        let mut norms = Vec::with_capacity(candidates.len());
        let mut status = Vec::with_capacity(candidates.len());
        for c in candidates {
            match centered(c) {
                Some(r) => {
                    norms.push(dot(&r, &r).sqrt());
                    residuals.push(r);
                    status.push(Status::Available);
                }
                None => {
                    norms.push(0.0);
                    residuals.push(vec![0.0; n_obs]);
                    status.push(Status::Constant);
                }
            }
        }
        Self {
            residuals,
            norms,
            status,
            basis: Vec::new(),
        }
    }

    fn residual_norm(&self, j: usize) -> Option<f64> {
        if self.status[j] != Status::Available {
            return None;
        }
        let r = &self.residuals[j];
        let norm = dot(r, r).sqrt();
        (norm >= RANK_TOL * self.norms[j]).then_some(norm)
    }

    /// Highest-scoring live candidate, lowest index on ties.
    fn best(&self, targets: &[Vec<f64>]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.residuals.len() {
            let Some(norm) = self.residual_norm(j) else {
                continue;
            };
            let r = &self.residuals[j];
            let score = targets
                .iter()
                .map(|t| {
                    let c = dot(r, t) / norm;
                    c * c
                })
                .sum::<f64>();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best
    }

    /// Adds candidate `j` to the basis and deflates every remaining candidate.
    /// A candidate already in the span only gets marked as taken.
    fn absorb(&mut self, j: usize) {
        let live = self.residual_norm(j).is_some();
        self.status[j] = Status::Taken;
        if !live {
            return;
        }
        let mut q = std::mem::take(&mut self.residuals[j]);
        // second Gram-Schmidt pass keeps the basis orthonormal to working precision
        for b in &self.basis {
            let proj = dot(&q, b);
            q.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|x| *x /= norm);

        for (r, s) in self.residuals.iter_mut().zip(&self.status) {
            if *s != Status::Available {
                continue;
            }
            let proj = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(x, y)| *x -= proj * y);
        }
        self.basis.push(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn columns(rng: &mut ChaCha8Rng, n_obs: usize, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..n_obs).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn target_among_candidates_is_first_with_unit_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands = columns(&mut rng, 10, 6);
        let target = cands[4].clone();
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [target.as_slice()], 2);
        let sel = select_greedy(&p).unwrap();
        assert_eq!(sel.indices[0], 4);
        assert!((sel.scores[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_of_selected_is_never_picked() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cands = columns(&mut rng, 8, 5);
        let target: Vec<f64> = cands[2].iter().map(|v| v + 0.01).collect();
        cands.push(cands[2].clone());
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [target.as_slice()], 5);
        let sel = select_greedy(&p).unwrap();
        assert_eq!(sel.indices[0], 2);
        assert!(!sel.indices.contains(&5));
    }

    #[test]
    fn rank_exhaustion_is_reported() {
        // 4 observations leave a 3-dimensional centered space
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cands = columns(&mut rng, 4, 6);
        let target = columns(&mut rng, 4, 1).remove(0);
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [target.as_slice()], 4);
        assert!(matches!(
            select_greedy(&p),
            Err(Error::RankExhausted { selected: 3, requested: 4 })
        ));
    }

    #[test]
    fn constant_target_is_degenerate() {
        let cands = [vec![1.0, 2.0, 3.0]];
        let t = [5.0, 5.0, 5.0];
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [t.as_slice()], 1);
        assert!(matches!(select_greedy(&p), Err(Error::DegenerateTarget { column: 0 })));
    }

    #[test]
    fn constant_candidates_score_zero_and_lose() {
        let cands = [vec![2.0; 5], vec![0.0, 1.0, 0.0, 1.0, 3.0]];
        let t = [1.0, 0.0, 2.0, 0.0, 1.0];
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [t.as_slice()], 1);
        assert_eq!(select_greedy(&p).unwrap().indices, vec![1]);

        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [t.as_slice()], 2);
        assert!(matches!(select_greedy(&p), Err(Error::RankExhausted { selected: 1, .. })));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let cands = [a.clone(), a.clone(), a.clone()];
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [a.as_slice()], 1);
        assert_eq!(select_greedy(&p).unwrap().indices, vec![0]);
    }

    #[test]
    fn preselected_columns_are_deflated_not_returned() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cands = columns(&mut rng, 12, 8);
        let target = cands[1].clone();
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [target.as_slice()], 3)
            .with_preselected(vec![1]);
        let sel = select_greedy(&p).unwrap();
        assert!(!sel.indices.contains(&1));
        // the target lies in the span of the preselected column
        assert!(sel.scores.iter().all(|s| s.abs() < 1e-20));
    }

    #[test]
    fn residuals_stay_orthogonal_to_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cands = columns(&mut rng, 15, 30);
        let refs: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let mut state = Deflation::new(&refs);
        for j in [4, 17, 2, 29, 11, 0, 8] {
            state.absorb(j);
        }
        let selected: Vec<Vec<f64>> = [4, 17, 2, 29, 11, 0, 8]
            .iter()
            .map(|&j| centered(&cands[j]).unwrap())
            .collect();
        for (j, r) in state.residuals.iter().enumerate() {
            if state.status[j] != Status::Available {
                continue;
            }
            for s in &selected {
                let cos = dot(r, s) / dot(s, s).sqrt();
                assert!(cos.abs() < 1e-8, "candidate {j}: {cos}");
            }
        }
    }

    #[test]
    fn too_many_requested() {
        let cands = [vec![1.0, 2.0, 0.0]];
        let t = [1.0, 0.0, 2.0];
        let p = SelectionProblem::new(cands.iter().map(Vec::as_slice), [t.as_slice()], 2);
        assert!(matches!(select_greedy(&p), Err(Error::InvalidConfig(_))));
    }
}
