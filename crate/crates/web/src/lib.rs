//! Browser bindings for the demo page in `www/`. Every export returns a JSON
//! string; the `*_report` functions behind them are plain Rust so they can be
//! tested natively.

use narx_prune::datasets::{basin_of, equilibria, generate_adse, generate_sdse, rk4_step, stable_equilibria, Basin};
use narx_prune::eval::{coefficient_r2, fraction_tagged, pca_project, prune, Baseline, TrialSpec};
use narx_prune::pruning::{build_batch_matrix, resolve_batch_size};
use narx_prune::{KMeansOptions, Preset, PruneMethod, TermLibrary};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const PORTRAIT_DT: f64 = 0.1;
const MAX_SAMPLE_POINTS: usize = 2500;

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub basin: Basin,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Portrait {
    pub equilibria: [f64; 3],
    pub trajectories: Vec<Trajectory>,
}

/// Trajectories from a `per_side` x `per_side` grid in the box around each
/// stable equilibrium.
pub fn portrait_report(forced: bool, per_side: usize, duration: f64) -> Result<Portrait, String> {
    if !(1..=15).contains(&per_side) || !(duration > 0.0 && duration <= 100.0) {
        return Err("grid must be 1..=15 per side and duration in (0, 100]".into());
    }
    let (left, right) = stable_equilibria();
    let steps = (duration / PORTRAIT_DT).round() as usize;
    let offsets: Vec<f64> = if per_side == 1 {
        vec![0.0]
    } else {
        (0..per_side).map(|i| -0.5 + i as f64 / (per_side - 1) as f64).collect()
    };
    let mut trajectories = Vec::new();
    for centre in [left, right] {
        for &dy in &offsets {
            for &dv in &offsets {
                let mut s = [centre + dy, dv];
                let (mut y, mut v) = (vec![s[0]], vec![s[1]]);
                for k in 0..steps {
                    s = rk4_step(s, k as f64 * PORTRAIT_DT, PORTRAIT_DT, forced);
                    y.push(s[0]);
                    v.push(s[1]);
                }
                trajectories.push(Trajectory { basin: basin_of(s, PORTRAIT_DT), y, v });
            }
        }
    }
    Ok(Portrait { equilibria: equilibria(), trajectories })
}

#[derive(Debug, Serialize)]
pub struct Selected {
    pub r2: Option<f64>,
    pub error: Option<String>,
    pub left_fraction: f64,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct PruneDemo {
    pub n_samples: usize,
    pub terms: Vec<String>,
    pub left_share: f64,
    pub effective_p: Option<usize>,
    /// Every k-th sample, enough to show the cloud.
    pub samples: Vec<[f64; 2]>,
    pub sample_basins: Vec<Basin>,
    pub atoms: Vec<[f64; 2]>,
    pub fastcan: Selected,
    pub random: Selected,
}

/// Fits the baseline on a generated data set, prunes it both ways with the
/// same seed and projects everything onto two principal components.
pub fn prune_report(dataset: &str, data_seed: u64, n: usize, q: usize, p: Option<usize>, seed: u64) -> Result<PruneDemo, String> {
    let (ds, preset) = match dataset {
        "sdse" => (generate_sdse(data_seed), Preset::Sdse),
        "adse" => (generate_adse(data_seed), Preset::Adse),
        other => return Err(format!("unknown data set {other:?}")),
    };
    let ds = ds.map_err(|e| e.to_string())?;
    let library = TermLibrary::build_pooled(&ds.train(), preset.library_config()).map_err(|e| e.to_string())?;
    let baseline = Baseline::fit(library, preset.n_terms()).map_err(|e| e.to_string())?;
    let reference = baseline.model.coefficient_vector();
    let tags = ds.train_tags();
    let segments = &baseline.library.segments;
    let all: Vec<usize> = (0..baseline.n_samples()).collect();

    let spec = |method| TrialSpec {
        method,
        n,
        q: (method == PruneMethod::MinibatchFastcan).then_some(q),
        p,
        trials: 1,
        base_seed: seed,
        kmeans: KMeansOptions::default(),
        timed: false,
    };
    let fast = prune(&baseline, &spec(PruneMethod::MinibatchFastcan), seed).map_err(|e| e.to_string())?;
    let random = prune(&baseline, &spec(PruneMethod::Random), seed).map_err(|e| e.to_string())?;

    let atoms: Vec<&[f64]> = fast
        .dictionary
        .as_ref()
        .map(|d| d.atoms.iter().map(Vec::as_slice).collect())
        .unwrap_or_default();
    let (pca, projected, atom_points) = pca_project(&baseline.samples, &atoms).map_err(|e| e.to_string())?;
    let _ = pca;
    let stride = baseline.n_samples().div_ceil(MAX_SAMPLE_POINTS).max(1);
    let basin_at = |j: usize| tags[segments[j]].unwrap_or(Basin::Right);

    let selected = |indices: &[usize]| {
        let outcome = baseline
            .refit(indices)
            .and_then(|m| coefficient_r2(&reference, &m.coefficient_vector()));
        let (r2, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Selected {
            r2,
            error,
            left_fraction: fraction_tagged(segments, &tags, indices, Basin::Left),
            points: indices.iter().map(|&j| projected[j]).collect(),
        }
    };

    Ok(PruneDemo {
        n_samples: baseline.n_samples(),
        terms: baseline.model.terms.iter().map(|t| t.to_string()).collect(),
        left_share: fraction_tagged(segments, &tags, &all, Basin::Left),
        effective_p: fast.config.p,
        samples: projected.iter().step_by(stride).copied().collect(),
        sample_basins: (0..baseline.n_samples()).step_by(stride).map(basin_at).collect(),
        atoms: atom_points,
        fastcan: selected(&fast.indices),
        random: selected(&random.indices),
    })
}

#[derive(Debug, Serialize)]
pub struct BatchPlan {
    pub p: usize,
    pub t: usize,
    pub entries: Vec<Vec<usize>>,
}

/// Effective batch size and the per-atom, per-batch allocation.
pub fn batch_report(n: usize, q: usize, m: usize, p: Option<usize>) -> Result<BatchPlan, String> {
    if n == 0 || q == 0 || m == 0 {
        return Err("n, q and m must be positive".into());
    }
    let p = resolve_batch_size(n, q, m, p);
    let b = build_batch_matrix(n, q, p).map_err(|e| e.to_string())?;
    Ok(BatchPlan { p: b.p, t: b.t, entries: b.entries })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// `p = 0` means "use the default rule".
fn optional(p: usize) -> Option<usize> {
    (p > 0).then_some(p)
}

#[wasm_bindgen]
pub fn phase_portrait(forced: bool, per_side: usize, duration: f64) -> Result<String, JsValue> {
    to_js(portrait_report(forced, per_side, duration))
}

#[wasm_bindgen]
pub fn prune_demo(dataset: &str, data_seed: u32, n: usize, q: usize, p: usize, seed: u32) -> Result<String, JsValue> {
    to_js(prune_report(dataset, data_seed.into(), n, q, optional(p), seed.into()))
}

#[wasm_bindgen]
pub fn batch_plan(n: usize, q: usize, m: usize, p: usize) -> Result<String, JsValue> {
    to_js(batch_report(n, q, m, optional(p)))
}
