//! Lagged polynomial term libraries.
//!
//! A library is built in two stages: [`build_shift_matrix`] turns a time series
//! into the `n = n_y + n_u` lagged signals `y(k-1) .. y(k-n_y), u(k-1) .. u(k-n_u)`,
//! dropping leading samples whose lags reach before the start of the record, and
//! [`expand_polynomial`] forms every monomial of degree `1..=degree` over those
//! signals. The intercept is never a library row.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::SampleMatrix;

/// Relative tolerance on the sampling step of a [`TimeSeries`].
pub const STEP_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: String,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, u: Vec<f64>, y: Vec<f64>, meta: impl Into<String>) -> Result<Self> {
        Self::with_tolerance(t, u, y, meta, STEP_RTOL)
    }

    pub fn with_tolerance(
        t: Vec<f64>,
        u: Vec<f64>,
        y: Vec<f64>,
        meta: impl Into<String>,
        step_rtol: f64,
    ) -> Result<Self> {
        if t.len() != u.len() || t.len() != y.len() {
            return Err(Error::InvalidSeries(format!(
                "length mismatch: t={}, u={}, y={}",
                t.len(),
                u.len(),
                y.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                available: t.len(),
            });
        }
        if let Some(i) = t
            .iter()
            .chain(&u)
            .chain(&y)
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidSeries(format!("non-finite value at flat index {i}")));
        }
        check_uniform(&t, step_rtol)?;
        Ok(Self {
            t,
            u,
            y,
            meta: meta.into(),
        })
    }

    /// Builds a series sampled at `t_k = t0 + k * dt`.
    pub fn uniform(t0: f64, dt: f64, u: Vec<f64>, y: Vec<f64>, meta: impl Into<String>) -> Result<Self> {
        let t = (0..y.len()).map(|k| t0 + k as f64 * dt).collect();
        Self::new(t, u, y, meta)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }
}

fn check_uniform(t: &[f64], rtol: f64) -> Result<()> {
    let expected = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(expected > 0.0) {
        return Err(Error::InvalidSeries("time is not strictly increasing".into()));
    }
    for (row, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        if !(step > 0.0) {
            return Err(Error::InvalidSeries(format!(
                "time is not strictly increasing at row {}",
                row + 1
            )));
        }
        if (step - expected).abs() > rtol * expected {
            return Err(Error::NonUniformSampling {
                row: row + 1,
                step,
                expected,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Output,
    Input,
}

/// One lagged signal inside a monomial, e.g. `y(k-2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub signal: Signal,
    pub lag: usize,
}

impl Factor {
    pub fn output(lag: usize) -> Self {
        Self {
            signal: Signal::Output,
            lag,
        }
    }

    pub fn input(lag: usize) -> Self {
        Self {
            signal: Signal::Input,
            lag,
        }
    }

    #[inline]
    fn value(&self, y: &[f64], u: &[f64], k: usize) -> f64 {
        match self.signal {
            Signal::Output => y[k - self.lag],
            Signal::Input => u[k - self.lag],
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.signal {
            Signal::Output => "y",
            Signal::Input => "u",
        };
        write!(f, "{s}(k-{})", self.lag)
    }
}

/// A monomial over lagged signals. Factors are kept sorted, so two descriptors
/// of the same monomial compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermDescriptor {
    factors: Vec<Factor>,
}

impl TermDescriptor {
    pub fn new(mut factors: Vec<Factor>) -> Self {
        factors.sort();
        Self { factors }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn max_output_lag(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| f.signal == Signal::Output)
            .map(|f| f.lag)
            .max()
            .unwrap_or(0)
    }

    pub fn max_input_lag(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| f.signal == Signal::Input)
            .map(|f| f.lag)
            .max()
            .unwrap_or(0)
    }

    /// Value of the monomial at time index `k`; `k` must be at least the largest lag.
    #[inline]
    pub fn evaluate(&self, y: &[f64], u: &[f64], k: usize) -> f64 {
        self.factors.iter().fold(1.0, |acc, f| acc * f.value(y, u, k))
    }

    pub(crate) fn validate(&self, config: &LibraryConfig) -> Result<()> {
        if self.degree() > config.degree {
            return Err(Error::InvalidConfig(format!(
                "term {self} exceeds degree {}",
                config.degree
            )));
        }
        for f in &self.factors {
            let bound = match f.signal {
                Signal::Output => config.n_y,
                Signal::Input => config.n_u,
            };
            if f.lag == 0 || f.lag > bound {
                return Err(Error::InvalidConfig(format!("lag out of range in term {self}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TermDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.factors.len() {
            let run = self.factors[i..]
                .iter()
                .take_while(|g| **g == self.factors[i])
                .count();
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "{}", self.factors[i])?;
            if run > 1 {
                write!(f, "^{run}")?;
            }
            i += run;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub n_y: usize,
    pub n_u: usize,
    pub degree: usize,
}

impl LibraryConfig {
    pub fn new(n_y: usize, n_u: usize, degree: usize) -> Result<Self> {
        let config = Self { n_y, n_u, degree };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y + self.n_u == 0 {
            return Err(Error::InvalidConfig("n_y + n_u must be at least 1".into()));
        }
        if self.degree == 0 {
            return Err(Error::InvalidConfig("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_signals(&self) -> usize {
        self.n_y + self.n_u
    }

    pub fn max_lag(&self) -> usize {
        self.n_y.max(self.n_u)
    }

    /// Number of library rows, `(n + degree)! / (n! degree!) - 1`.
    pub fn term_count(&self) -> usize {
        binomial(self.n_signals() + self.degree, self.degree) - 1
    }

    /// The `i`-th lagged signal (zero-based): outputs first, then inputs.
    pub fn lagged_signal(&self, i: usize) -> Factor {
        if i < self.n_y {
            Factor::output(i + 1)
        } else {
            Factor::input(i - self.n_y + 1)
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Lagged signals over the usable samples of one series.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftMatrix {
    /// `n_y + n_u` rows, one per lagged signal; each row has one value per usable sample.
    pub lagged: Vec<Vec<f64>>,
    /// `y(k)` for each usable sample.
    pub target: Vec<f64>,
    /// Time stamps of the usable samples.
    pub times: Vec<f64>,
    pub n_y: usize,
    pub n_u: usize,
}

impl ShiftMatrix {
    pub fn n_samples(&self) -> usize {
        self.target.len()
    }
}

pub fn build_shift_matrix(series: &TimeSeries, n_y: usize, n_u: usize) -> Result<ShiftMatrix> {
    if n_y + n_u == 0 {
        return Err(Error::InvalidConfig("n_y + n_u must be at least 1".into()));
    }
    let start = n_y.max(n_u);
    if series.len() < start + 1 {
        return Err(Error::InsufficientSamples {
            needed: start + 1,
            available: series.len(),
        });
    }
    let ks = start..series.len();
    let mut lagged = Vec::with_capacity(n_y + n_u);
    for lag in 1..=n_y {
        lagged.push(ks.clone().map(|k| series.y[k - lag]).collect());
    }
    for lag in 1..=n_u {
        lagged.push(ks.clone().map(|k| series.u[k - lag]).collect());
    }
    Ok(ShiftMatrix {
        lagged,
        target: series.y[start..].to_vec(),
        times: series.t[start..].to_vec(),
        n_y,
        n_u,
    })
}

/// Multisets `{i_1 <= .. <= i_d}` over `0..n` for `d = 1..=degree`, graded then
/// lexicographic.
pub fn monomial_exponents(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for d in 1..=degree {
        let mut idx = vec![0usize; d];
        loop {
            out.push(idx.clone());
            // advance to the next non-decreasing tuple
            let mut pos = d;
            while pos > 0 && idx[pos - 1] == n - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            let v = idx[pos - 1];
            for slot in &mut idx[pos..] {
                *slot = v;
            }
        }
    }
    out
}

pub fn expand_polynomial(shift: &ShiftMatrix, degree: usize) -> Result<TermLibrary> {
    let config = LibraryConfig::new(shift.n_y, shift.n_u, degree)?;
    let n = config.n_signals();
    let n_samples = shift.n_samples();
    let mut rows = Vec::with_capacity(config.term_count());
    let mut descriptors = Vec::with_capacity(config.term_count());
    for multiset in monomial_exponents(n, degree) {
        let mut row = shift.lagged[multiset[0]].clone();
        for &i in &multiset[1..] {
            for (r, x) in row.iter_mut().zip(&shift.lagged[i]) {
                *r *= x;
            }
        }
        rows.push(row);
        descriptors.push(TermDescriptor::new(
            multiset.iter().map(|&i| config.lagged_signal(i)).collect(),
        ));
    }
    Ok(TermLibrary {
        rows,
        target: shift.target.clone(),
        descriptors,
        config,
        segments: vec![0; n_samples],
    })
}

/// Candidate term matrix: one row per monomial, one column per usable sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TermLibrary {
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub descriptors: Vec<TermDescriptor>,
    pub config: LibraryConfig,
    /// Index of the source series of each column.
    pub segments: Vec<usize>,
}

impl TermLibrary {
    pub fn build(series: &TimeSeries, config: LibraryConfig) -> Result<Self> {
        config.validate()?;
        let shift = build_shift_matrix(series, config.n_y, config.n_u)?;
        expand_polynomial(&shift, config.degree)
    }

    /// Concatenates per-series libraries. No column mixes samples from two series.
    pub fn build_pooled(series: &[TimeSeries], config: LibraryConfig) -> Result<Self> {
        let mut parts = series.iter().map(|s| Self::build(s, config));
        let mut pooled = match parts.next() {
            Some(first) => first?,
            None => return Err(Error::InvalidConfig("no series to build a library from".into())),
        };
        for (idx, part) in parts.enumerate() {
            let part = part?;
            for (row, extra) in pooled.rows.iter_mut().zip(part.rows) {
                row.extend(extra);
            }
            pooled.segments.extend(std::iter::repeat_n(idx + 1, part.target.len()));
            pooled.target.extend(part.target);
        }
        Ok(pooled)
    }

    pub fn n_terms(&self) -> usize {
        self.rows.len()
    }

    pub fn n_samples(&self) -> usize {
        self.target.len()
    }

    /// Library row index of a descriptor.
    pub fn position(&self, term: &TermDescriptor) -> Option<usize> {
        self.descriptors.iter().position(|d| d == term)
    }

    /// The samples restricted to the given terms, as an `m x N` matrix.
    pub fn sample_matrix(&self, term_indices: &[usize]) -> SampleMatrix {
        SampleMatrix::from_rows(term_indices.iter().map(|&i| self.rows[i].as_slice()))
    }
}
