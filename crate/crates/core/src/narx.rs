//! Reduced polynomial NARX models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fastcan::{select_greedy, Selection, SelectionProblem};
use crate::termlib::{LibraryConfig, TermDescriptor, TermLibrary, TimeSeries};

/// Default bound on `|y|` during free-run simulation.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Columns of the (column-normalized) design whose `|R_ii|` falls below this
/// are treated as dependent.
const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedNarxModel {
    pub config: LibraryConfig,
    pub terms: Vec<TermDescriptor>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl ReducedNarxModel {
    pub fn new(
        config: LibraryConfig,
        terms: Vec<TermDescriptor>,
        coefficients: Vec<f64>,
        intercept: f64,
    ) -> Result<Self> {
        if terms.len() != coefficients.len() {
            return Err(Error::InvalidConfig(format!(
                "{} terms but {} coefficients",
                terms.len(),
                coefficients.len()
            )));
        }
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite coefficient".into()));
        }
        let model = Self {
            config,
            terms,
            coefficients,
            intercept,
        };
        model.terms.iter().try_for_each(|t| t.validate(&config))?;
        Ok(model)
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// `[intercept, theta_1, .., theta_m]`.
    pub fn coefficient_vector(&self) -> Vec<f64> {
        std::iter::once(self.intercept)
            .chain(self.coefficients.iter().copied())
            .collect()
    }

    /// Model output at index `k` given measured (or simulated) histories.
    #[inline]
    pub fn evaluate_at(&self, y: &[f64], u: &[f64], k: usize) -> f64 {
        combine(
            self.intercept,
            &self.coefficients,
            self.terms.iter().map(|t| t.evaluate(y, u, k)),
        )
    }

    /// One-step-ahead predictions `y_hat(k)` for every usable `k` of `series`.
    pub fn predict_one_step(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let start = self.config.max_lag();
        if series.len() < start + 1 {
            return Err(Error::InsufficientSamples {
                needed: start + 1,
                available: series.len(),
            });
        }
        Ok((start..series.len())
            .map(|k| self.evaluate_at(&series.y, &series.u, k))
            .collect())
    }

    /// Free-run simulation: the model's own outputs are fed back as lagged
    /// outputs. `initial` holds the first `max(n_y, n_u)` (or more) measured
    /// outputs and is copied to the front of the result; `input` covers the
    /// whole horizon.
    pub fn simulate_free_run(&self, initial: &[f64], input: &[f64], guard: f64) -> Result<Vec<f64>> {
        let start = self.config.max_lag();
        if initial.len() < start {
            return Err(Error::InsufficientSamples {
                needed: start,
                available: initial.len(),
            });
        }
        if input.len() < initial.len() {
            return Err(Error::InvalidConfig(
                "input must cover the initial window".into(),
            ));
        }
        let mut y = Vec::with_capacity(input.len());
        y.extend_from_slice(initial);
        for k in initial.len()..input.len() {
            let next = self.evaluate_at(&y, input, k);
            if !next.is_finite() || next.abs() > guard {
                return Err(Error::Divergence {
                    step: k,
                    value: next.abs(),
                });
            }
            y.push(next);
        }
        Ok(y)
    }
}

#[inline]
fn combine(intercept: f64, coefficients: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    coefficients
        .iter()
        .zip(values)
        .fold(intercept, |acc, (c, v)| acc + c * v)
}

/// Picks `m` library rows by greedy correlation with `y(k)`.
pub fn select_terms(library: &TermLibrary, m: usize) -> Result<Vec<usize>> {
    Ok(select_terms_scored(library, m)?.indices)
}

/// [`select_terms`] with the score of each pick.
pub fn select_terms_scored(library: &TermLibrary, m: usize) -> Result<Selection> {
    if m == 0 || m > library.n_terms() {
        return Err(Error::InvalidConfig(format!(
            "term count {m} must be in 1..={}",
            library.n_terms()
        )));
    }
    let problem = SelectionProblem::new(
        library.rows.iter().map(Vec::as_slice),
        [library.target.as_slice()],
        m,
    );
    select_greedy(&problem)
}

/// Ordinary least squares with an explicit intercept, over all library columns
/// or the given subset.
pub fn fit(
    library: &TermLibrary,
    term_indices: &[usize],
    sample_indices: Option<&[usize]>,
) -> Result<ReducedNarxModel> {
    if let Some(&bad) = term_indices.iter().find(|&&i| i >= library.n_terms()) {
        return Err(Error::InvalidConfig(format!("term index {bad} out of range")));
    }
    let all: Vec<usize>;
    let samples = match sample_indices {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&j| j >= library.n_samples()) {
                return Err(Error::InvalidConfig(format!("sample index {bad} out of range")));
            }
            s
        }
        None => {
            all = (0..library.n_samples()).collect();
            &all
        }
    };
    let params = term_indices.len() + 1;
    if samples.len() < params {
        return Err(Error::Underdetermined {
            samples: samples.len(),
            params,
        });
    }

    let design = DMatrix::from_fn(samples.len(), params, |r, c| {
        if c == 0 {
            1.0
        } else {
            library.rows[term_indices[c - 1]][samples[r]]
        }
    });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|&j| library.target[j]));
    let theta = least_squares(design, rhs)?;

    let terms = term_indices
        .iter()
        .map(|&i| library.descriptors[i].clone())
        .collect();
    ReducedNarxModel::new(
        library.config,
        terms,
        theta.iter().skip(1).copied().collect(),
        theta[0],
    )
}

/// Householder QR on the column-normalized design.
fn least_squares(mut design: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let scales: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    for (c, &s) in scales.iter().enumerate() {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::RankDeficient { column: c });
        }
        design.column_mut(c).unscale_mut(s);
    }
    let cols = design.ncols();
    let qr = design.qr();
    let r = qr.r();
    if let Some(c) = (0..cols).find(|&i| r[(i, i)].abs() < RANK_RTOL) {
        return Err(Error::RankDeficient { column: c });
    }
    let mut qtb = rhs;
    qr.q_tr_mul(&mut qtb);
    let head = qtb.rows(0, cols).into_owned();
    let mut theta = r
        .solve_upper_triangular(&head)
        .ok_or(Error::RankDeficient { column: cols - 1 })?;
    for (t, s) in theta.iter_mut().zip(&scales) {
        *t /= s;
    }
    Ok(theta)
}

/// Fitted values of `model` on the library columns `samples`, using the library
/// rows at `term_indices` (which must correspond to `model.terms`).
pub fn fitted_values(
    model: &ReducedNarxModel,
    library: &TermLibrary,
    term_indices: &[usize],
    samples: &[usize],
) -> Vec<f64> {
    samples
        .iter()
        .map(|&j| {
            combine(
                model.intercept,
                &model.coefficients,
                term_indices.iter().map(|&i| library.rows[i][j]),
            )
        })
        .collect()
}
