//! Evaluation protocol: prune repeatedly, refit the fixed baseline terms on the
//! retained samples and compare coefficients with the full-data fit.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datasets::Basin;
use crate::dictionary::KMeansOptions;
use crate::error::{Error, Result};
use crate::narx::{fit, select_terms, ReducedNarxModel, DIVERGENCE_GUARD};
use crate::pruning::{minibatch_fastcan, prune_random, PruneMethod, PruneResult};
use crate::samples::SampleMatrix;
use crate::termlib::{TermLibrary, TimeSeries};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const REPORT_VERSION: u32 = 1;

/// `1 - sum (pruned - baseline)^2 / sum (baseline - mean)^2`.
pub fn coefficient_r2(baseline: &[f64], pruned: &[f64]) -> Result<f64> {
    if baseline.len() != pruned.len() || baseline.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "coefficient vectors must have equal length >= 2 (got {} and {})",
            baseline.len(),
            pruned.len()
        )));
    }
    let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
    let ss_tot: f64 = baseline.iter().map(|b| (b - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    let ss_res: f64 = baseline
        .iter()
        .zip(pruned)
        .map(|(b, p)| (p - b).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// The full-data model: its library, the selected rows and the fit.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub library: TermLibrary,
    pub term_indices: Vec<usize>,
    pub model: ReducedNarxModel,
    /// Library columns restricted to the selected terms (`m x N`).
    pub samples: SampleMatrix,
}

impl Baseline {
    /// Selects `n_terms` terms and fits them on every sample.
    pub fn fit(library: TermLibrary, n_terms: usize) -> Result<Self> {
        let term_indices = select_terms(&library, n_terms)?;
        Self::with_terms(library, term_indices)
    }

    pub fn with_terms(library: TermLibrary, term_indices: Vec<usize>) -> Result<Self> {
        let model = fit(&library, &term_indices, None)?;
        let samples = library.sample_matrix(&term_indices);
        Ok(Self {
            library,
            term_indices,
            model,
            samples,
        })
    }

    /// Refits the baseline terms on a subset of samples.
    pub fn refit(&self, samples: &[usize]) -> Result<ReducedNarxModel> {
        fit(&self.library, &self.term_indices, Some(samples))
    }

    pub fn n_samples(&self) -> usize {
        self.library.n_samples()
    }

    /// One-step `R^2` of the baseline on its own training samples.
    pub fn train_r2(&self) -> f64 {
        let all: Vec<usize> = (0..self.n_samples()).collect();
        let fitted = crate::narx::fitted_values(&self.model, &self.library, &self.term_indices, &all);
        r2(&self.library.target, &fitted)
    }
}

/// Ordinary `R^2` of predictions against observations.
pub fn r2(observed: &[f64], predicted: &[f64]) -> f64 {
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    1.0 - ss_res / ss_tot
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeRunMetrics {
    pub series: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Free-run simulation of `model` on `series`, seeded with its first measured outputs.
pub fn free_run_metrics(model: &ReducedNarxModel, series: &TimeSeries) -> FreeRunMetrics {
    let start = model.config.max_lag();
    let run = if series.len() <= start {
        Err(Error::InsufficientSamples {
            needed: start + 1,
            available: series.len(),
        })
    } else {
        model.simulate_free_run(&series.y[..start], &series.u, DIVERGENCE_GUARD)
    };
    match run {
        Ok(sim) => {
            let obs = &series.y[start..];
            let pred = &sim[start..];
            let mse = obs.iter().zip(pred).map(|(o, p)| (o - p).powi(2)).sum::<f64>() / obs.len() as f64;
            FreeRunMetrics {
                series: series.meta.clone(),
                r2: Some(r2(obs, pred)),
                rmse: Some(mse.sqrt()),
                error: None,
            }
        }
        Err(e) => FreeRunMetrics {
            series: series.meta.clone(),
            r2: None,
            rmse: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub method: PruneMethod,
    pub n: usize,
    pub q: Option<usize>,
    /// Requested batch size; `None` applies the default rule.
    pub p: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub kmeans: KMeansOptions,
    /// Record wall-clock time per trial.
    #[serde(skip)]
    pub timed: bool,
}

impl TrialSpec {
    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    fn validate(&self, candidates: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trial count must be at least 1".into()));
        }
        if self.n == 0 || self.n > candidates {
            return Err(Error::NExceedsCandidates {
                n: self.n,
                candidates,
            });
        }
        if self.method == PruneMethod::MinibatchFastcan && self.q.unwrap_or(0) == 0 {
            return Err(Error::InvalidConfig("mini-batch FastCan needs an atom count".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub method: PruneMethod,
    /// Batch size actually used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_p: Option<usize>,
    pub selected_indices: Vec<usize>,
    /// `[intercept, theta_1, .., theta_m]` of the refit.
    pub refit_coefficients: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2_coefficients: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub succeeded: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    /// Sample standard deviation (`n - 1` denominator).
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Summary {
    pub fn from_values(trials: usize, values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = match k {
            0 => None,
            _ if k % 2 == 1 => Some(sorted[k / 2]),
            _ => Some(0.5 * (sorted[k / 2 - 1] + sorted[k / 2])),
        };
        let mean = (k > 0).then(|| sorted.iter().sum::<f64>() / k as f64);
        let sd = mean.filter(|_| k > 1).map(|m| {
            (sorted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        });
        Self {
            trials,
            succeeded: k,
            median,
            mean,
            sd,
            min: sorted.first().copied(),
            max: sorted.last().copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub spec: TrialSpec,
    /// Full-data coefficients the refits are scored against.
    pub baseline_coefficients: Vec<f64>,
    pub reports: Vec<TrialReport>,
    pub summary: Summary,
}

impl TrialSet {
    pub fn r2_values(&self) -> Vec<f64> {
        self.reports.iter().filter_map(|r| r.r2_coefficients).collect()
    }
}

/// Runs `spec.trials` prune-and-refit trials with seeds `base_seed + i`.
/// Failures are recorded per trial.
pub fn run_trials(baseline: &Baseline, spec: &TrialSpec) -> Result<TrialSet> {
    spec.validate(baseline.n_samples())?;
    let reference = baseline.model.coefficient_vector();
    let run = |trial: usize| run_one(baseline, spec, &reference, trial);

    #[cfg(feature = "parallel")]
    let reports: Vec<TrialReport> = (0..spec.trials).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let reports: Vec<TrialReport> = (0..spec.trials).map(run).collect();

    let values: Vec<f64> = reports.iter().filter_map(|r| r.r2_coefficients).collect();
    Ok(TrialSet {
        spec: spec.clone(),
        baseline_coefficients: reference,
        summary: Summary::from_values(spec.trials, &values),
        reports,
    })
}

/// Prunes the baseline's samples with the given method and seed.
pub fn prune(baseline: &Baseline, spec: &TrialSpec, seed: u64) -> Result<PruneResult> {
    match spec.method {
        PruneMethod::Random => prune_random(baseline.n_samples(), spec.n, seed),
        PruneMethod::MinibatchFastcan => minibatch_fastcan(
            &baseline.samples,
            spec.q.unwrap_or(0),
            spec.n,
            spec.p,
            seed,
            &spec.kmeans,
        ),
    }
}

fn run_one(baseline: &Baseline, spec: &TrialSpec, reference: &[f64], trial: usize) -> TrialReport {
    let seed = spec.seed(trial);
    let clock = Clock::start(spec.timed);
    let mut report = TrialReport {
        trial,
        seed,
        method: spec.method,
        effective_p: None,
        selected_indices: Vec::new(),
        refit_coefficients: Vec::new(),
        r2_coefficients: None,
        error: None,
        runtime_ms: None,
    };
    let outcome = prune(baseline, spec, seed).and_then(|pruned| {
        report.effective_p = pruned.config.p;
        report.selected_indices = pruned.indices;
        let model = baseline.refit(&report.selected_indices)?;
        report.refit_coefficients = model.coefficient_vector();
        coefficient_r2(reference, &report.refit_coefficients)
    });
    match outcome {
        Ok(r2) => report.r2_coefficients = Some(r2),
        Err(e) => report.error = Some(e.to_string()),
    }
    report.runtime_ms = clock.elapsed_ms();
    report
}

struct Clock(Option<std::time::Instant>);

impl Clock {
    fn start(enabled: bool) -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Clock(enabled.then(std::time::Instant::now))
        }
        #[cfg(target_arch = "wasm32")]
        {
            let _ = enabled;
            Clock(None)
        }
    }

    fn elapsed_ms(&self) -> Option<f64> {
        self.0.map(|t| t.elapsed().as_secs_f64() * 1e3)
    }
}

/// Fraction of `indices` whose source series carries `tag`.
pub fn fraction_tagged(segments: &[usize], tags: &[Option<Basin>], indices: &[usize], tag: Basin) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let hits = indices
        .iter()
        .filter(|&&j| tags[segments[j]] == Some(tag))
        .count();
    hits as f64 / indices.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    AtomSize,
    BatchSize,
    SampleSize,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "atom_size" | "atoms" => Ok(SweepAxis::AtomSize),
            "batch_size" | "batch" => Ok(SweepAxis::BatchSize),
            "sample_size" | "samples" => Ok(SweepAxis::SampleSize),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        }
    }
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::AtomSize => "atom_size",
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::SampleSize => "sample_size",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<usize>,
    pub methods: Vec<PruneMethod>,
    /// Values of the parameters not being swept.
    pub n: usize,
    pub q: usize,
    pub p: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub kmeans: KMeansOptions,
}

impl SweepSpec {
    /// Trial spec of one grid point. Sweeping the atom count leaves the batch
    /// size to the default rule.
    pub fn point(&self, method: PruneMethod, value: usize) -> TrialSpec {
        let (n, q, p) = match self.axis {
            SweepAxis::AtomSize => (self.n, value, None),
            SweepAxis::BatchSize => (self.n, self.q, Some(value)),
            SweepAxis::SampleSize => (value, self.q, self.p),
        };
        TrialSpec {
            method,
            n,
            q: (method == PruneMethod::MinibatchFastcan).then_some(q),
            p: if method == PruneMethod::MinibatchFastcan { p } else { None },
            trials: self.trials,
            base_seed: self.base_seed,
            kmeans: self.kmeans.clone(),
            timed: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub results: Vec<TrialSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
    /// Grid value with the highest mini-batch FastCan median (first on ties).
    pub best: Option<usize>,
}

pub fn sweep(baseline: &Baseline, spec: &SweepSpec) -> Result<SweepReport> {
    if spec.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    if spec.methods.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one method".into()));
    }
    if spec.grid.contains(&0) {
        return Err(Error::InvalidConfig("sweep grid values must be positive".into()));
    }
    let points = spec
        .grid
        .iter()
        .map(|&value| {
            let results = spec
                .methods
                .iter()
                .map(|&m| run_trials(baseline, &spec.point(m, value)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint { value, results })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for point in &points {
        let fastcan = point
            .results
            .iter()
            .find(|r| r.spec.method == PruneMethod::MinibatchFastcan)
            .and_then(|r| r.summary.median);
        if let Some(m) = fastcan {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((point.value, m));
            }
        }
    }
    Ok(SweepReport {
        spec: spec.clone(),
        points,
        best: best.map(|(v, _)| v),
    })
}

/// Two leading principal directions of a sample matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Sample variance along each component.
    pub variances: [f64; 2],
}

impl PcaProjection {
    pub fn fit(x: &SampleMatrix) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                available: x.len(),
            });
        }
        let m = x.dim();
        let mean = x.mean();
        let mut cov = DMatrix::<f64>::zeros(m, m);
        for p in x.points() {
            for a in 0..m {
                let da = p[a] - mean[a];
                for b in a..m {
                    cov[(a, b)] += da * (p[b] - mean[b]);
                }
            }
        }
        for a in 0..m {
            for b in a..m {
                let v = cov[(a, b)] / (x.len() - 1) as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let component = |rank: usize| -> (Vec<f64>, f64) {
            let Some(&i) = order.get(rank) else {
                return (vec![0.0; m], 0.0);
            };
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |best, c| if c.abs() > best.abs() { c } else { best });
            if lead < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            (v, eig.eigenvalues[i].max(0.0))
        };
        let (c1, v1) = component(0);
        let (c2, v2) = component(1);
        Ok(Self {
            mean,
            components: [c1, c2],
            variances: [v1, v2],
        })
    }

    pub fn project(&self, point: &[f64]) -> [f64; 2] {
        let centred = || point.iter().zip(&self.mean).map(|(p, m)| p - m);
        [
            centred().zip(&self.components[0]).map(|(a, b)| a * b).sum(),
            centred().zip(&self.components[1]).map(|(a, b)| a * b).sum(),
        ]
    }
}

/// Projects the samples and any extra points (atoms, selections) into the
/// frame of the samples' two leading principal components.
pub fn pca_project(x: &SampleMatrix, extra: &[&[f64]]) -> Result<(PcaProjection, Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    let pca = PcaProjection::fit(x)?;
    let samples = x.points().iter().map(|p| pca.project(p)).collect();
    let extra = extra.iter().map(|p| pca.project(p)).collect();
    Ok((pca, samples, extra))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Sample,
    Atom,
    SelectedFastcan,
    SelectedRandom,
}

impl PointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointKind::Sample => "sample",
            PointKind::Atom => "atom",
            PointKind::SelectedFastcan => "selected_fastcan",
            PointKind::SelectedRandom => "selected_random",
        }
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `pc1,pc2,kind` rows.
pub fn write_pca_csv<W: Write>(out: W, rows: &[([f64; 2], PointKind)]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["pc1", "pc2", "kind"]).map_err(csv_err)?;
    for (xy, kind) in rows {
        w.write_record([xy[0].to_string(), xy[1].to_string(), kind.as_str().to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// One row per trial.
pub fn write_trials_csv<W: Write>(out: W, sets: &[TrialSet]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["method", "trial", "seed", "n", "q", "p", "r2_coefficients", "error"])
        .map_err(csv_err)?;
    for set in sets {
        for r in &set.reports {
            w.write_record([
                r.method.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                set.spec.n.to_string(),
                set.spec.q.map(|q| q.to_string()).unwrap_or_default(),
                r.effective_p.map(|p| p.to_string()).unwrap_or_default(),
                opt(r.r2_coefficients),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// One row per grid point and method.
pub fn write_sweep_csv<W: Write>(out: W, report: &SweepReport) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "axis", "value", "method", "trials", "succeeded", "median", "mean", "sd", "min", "max",
    ])
    .map_err(csv_err)?;
    for point in &report.points {
        for set in &point.results {
            let s = &set.summary;
            w.write_record([
                report.spec.axis.as_str().to_string(),
                point.value.to_string(),
                set.spec.method.to_string(),
                s.trials.to_string(),
                s.succeeded.to_string(),
                opt(s.median),
                opt(s.mean),
                opt(s.sd),
                opt(s.min),
                opt(s.max),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
