use std::fs;
use std::path::{Path, PathBuf};

use narx_prune::datasets::{
    generate_adse, generate_sdse, load_dataset, sine_demo, write_dataset, Basin, Dataset, Member, Role,
};
use narx_prune::eval::{
    fraction_tagged, free_run_metrics, pca_project, run_trials, sweep, write_pca_csv, write_sweep_csv,
    write_trials_csv, Baseline, FreeRunMetrics, PointKind, SweepSpec, TrialSet, TrialSpec,
};
use narx_prune::pruning::{minibatch_fastcan, prune_random, BatchMatrix};
use narx_prune::{KMeansOptions, LibraryConfig, Preset, PruneMethod, TermLibrary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{
    parse_grid, DatasetKind, EvaluateArgs, FitArgs, GenerateArgs, PcaArgs, PruneArgs, PruneParams, SweepArgs,
    Synthetic,
};
use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Options that do not change results and are not echoed.
pub struct Context {
    pub out: PathBuf,
    pub timings: bool,
}

/// Header shared by every JSON artifact.
#[derive(Debug, Serialize, Deserialize)]
struct Envelope<C> {
    format_version: u32,
    command: String,
    config: C,
}

fn envelope<C: Serialize>(command: &str, config: &C) -> CliResult<serde_json::Map<String, Value>> {
    let value = serde_json::to_value(Envelope {
        format_version: FORMAT_VERSION,
        command: command.to_string(),
        config,
    })
    .map_err(CliError::internal)?;
    match value {
        Value::Object(map) => Ok(map),
        _ => unreachable!("envelope serialises to an object"),
    }
}

fn write_json<C: Serialize, B: Serialize>(ctx: &Context, file: &str, command: &str, config: &C, body: &B) -> CliResult<PathBuf> {
    let mut map = envelope(command, config)?;
    match serde_json::to_value(body).map_err(CliError::internal)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    let path = ctx.out.join(file);
    let text = serde_json::to_string_pretty(&Value::Object(map)).map_err(CliError::internal)? + "\n";
    fs::write(&path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn create_out(ctx: &Context) -> CliResult<()> {
    fs::create_dir_all(&ctx.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", ctx.out.display())))
}

fn write_csv(ctx: &Context, file: &str, fill: impl FnOnce(&mut Vec<u8>) -> narx_prune::Result<()>) -> CliResult<PathBuf> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let path = ctx.out.join(file);
    fs::write(&path, buf).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn generate(ctx: &Context, args: &GenerateArgs) -> CliResult<Vec<PathBuf>> {
    create_out(ctx)?;
    let dataset = match args.dataset {
        DatasetKind::Sdse => generate_sdse(args.seed)?,
        DatasetKind::Adse => generate_adse(args.seed)?,
        DatasetKind::SineDemo => Dataset {
            name: "sine-demo".into(),
            members: vec![Member {
                series: sine_demo(),
                role: Role::Train,
                tag: None,
            }],
        },
    };
    let manifest = write_dataset(&ctx.out, &dataset, Some(args.seed))?;
    let echo = write_json(
        ctx,
        "generate.json",
        "generate",
        args,
        &serde_json::json!({ "manifest": "manifest.json", "members": dataset.members.len() }),
    )?;
    Ok(vec![manifest, echo])
}

/// Library settings after applying the preset and explicit overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelSettings {
    preset: Preset,
    library: LibraryConfig,
    terms: usize,
}

fn settings(args: &FitArgs) -> CliResult<ModelSettings> {
    let preset = args.preset.unwrap_or(match args.dataset {
        Some(Synthetic::Adse) => Preset::Adse,
        _ => Preset::Sdse,
    });
    let base = preset.library_config();
    let library = LibraryConfig::new(
        args.n_y.unwrap_or(base.n_y),
        args.n_u.unwrap_or(base.n_u),
        args.degree.unwrap_or(base.degree),
    )?;
    let terms = args.terms.unwrap_or(preset.n_terms());
    if terms == 0 {
        return Err(CliError::usage("--terms must be at least 1"));
    }
    Ok(ModelSettings {
        preset,
        library,
        terms,
    })
}

fn load_source(args: &FitArgs) -> CliResult<Dataset> {
    match (&args.manifest, args.dataset) {
        (Some(path), _) => Ok(load_dataset(path)?),
        (None, Some(Synthetic::Sdse)) => Ok(generate_sdse(args.data_seed)?),
        (None, Some(Synthetic::Adse)) => Ok(generate_adse(args.data_seed)?),
        (None, None) => Err(CliError::usage("either --dataset or --manifest is required")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TermEntry {
    index: usize,
    term: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelBody {
    settings: ModelSettings,
    n_samples: usize,
    terms: Vec<TermEntry>,
    intercept: f64,
    coefficients: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct FitReportBody<'a> {
    terms: &'a [TermEntry],
    selection_scores: Vec<f64>,
    train_samples: usize,
    train_one_step_r2: f64,
    test_free_run: Vec<FreeRunMetrics>,
}

pub fn fit_baseline(ctx: &Context, args: &FitArgs) -> CliResult<Vec<PathBuf>> {
    let settings = settings(args)?;
    let dataset = load_source(args)?;
    let train = dataset.train();
    if train.is_empty() {
        return Err(CliError::data("data set has no training members"));
    }
    let library = TermLibrary::build_pooled(&train, settings.library)?;
    let selection = narx_prune::narx::select_terms_scored(&library, settings.terms)?;
    let baseline = Baseline::with_terms(library, selection.indices.clone())?;

    let terms: Vec<TermEntry> = baseline
        .term_indices
        .iter()
        .map(|&i| TermEntry {
            index: i,
            term: baseline.library.descriptors[i].to_string(),
        })
        .collect();
    let report = FitReportBody {
        terms: &terms,
        selection_scores: selection.scores,
        train_samples: baseline.n_samples(),
        train_one_step_r2: baseline.train_r2(),
        test_free_run: dataset.test().iter().map(|s| free_run_metrics(&baseline.model, s)).collect(),
    };
    create_out(ctx)?;
    let report_path = write_json(ctx, "fit_report.json", "fit-baseline", args, &report)?;
    let body = ModelBody {
        settings,
        n_samples: baseline.n_samples(),
        terms,
        intercept: baseline.model.intercept,
        coefficients: baseline.model.coefficients.clone(),
    };
    let model_path = write_json(ctx, "model.json", "fit-baseline", args, &body)?;
    Ok(vec![model_path, report_path])
}

/// A baseline rebuilt from the data source recorded in `model.json`.
struct Loaded {
    preset: Preset,
    baseline: Baseline,
    tags: Vec<Option<Basin>>,
}

fn load_model(path: &Path) -> CliResult<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct ModelFile {
        format_version: u32,
        config: FitArgs,
        #[serde(flatten)]
        body: ModelBody,
    }
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{} is not a model file: {e}", path.display())))?;
    if file.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "unsupported model format version {}",
            file.format_version
        )));
    }
    let dataset = load_source(&file.config)?;
    let train = dataset.train();
    let library = TermLibrary::build_pooled(&train, file.body.settings.library)?;
    let indices: Vec<usize> = file.body.terms.iter().map(|t| t.index).collect();
    if indices.iter().any(|&i| i >= library.n_terms()) {
        return Err(CliError::data("model terms do not fit the rebuilt library"));
    }
    let baseline = Baseline::with_terms(library, indices)?;
    let stored = std::iter::once(file.body.intercept).chain(file.body.coefficients.iter().copied());
    let drift = baseline
        .model
        .coefficient_vector()
        .iter()
        .zip(stored)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0f64, f64::max);
    if baseline.n_samples() != file.body.n_samples || drift > 1e-9 {
        return Err(CliError::data(
            "model does not match its data source (data changed since fit-baseline?)",
        ));
    }
    Ok(Loaded {
        preset: file.body.settings.preset,
        baseline,
        tags: dataset.train_tags(),
    })
}

fn trial_spec(loaded: &Loaded, method: PruneMethod, params: &PruneParams, trials: usize, timed: bool) -> TrialSpec {
    TrialSpec {
        method,
        n: params.n,
        q: (method == PruneMethod::MinibatchFastcan).then(|| params.atoms.unwrap_or(loaded.preset.atoms())),
        p: if method == PruneMethod::MinibatchFastcan {
            params.batch_size
        } else {
            None
        },
        trials,
        base_seed: params.seed,
        kmeans: KMeansOptions::default(),
        timed,
    }
}

#[derive(Debug, Serialize)]
struct PruneBody {
    method: PruneMethod,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_matrix: Option<BatchMatrix>,
    selected_indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dictionary_atoms: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left_fraction: Option<f64>,
    refit_coefficients: Vec<f64>,
    baseline_coefficients: Vec<f64>,
    r2_coefficients: f64,
}

pub fn prune(ctx: &Context, args: &PruneArgs) -> CliResult<Vec<PathBuf>> {
    let loaded = load_model(&args.model)?;
    let b = &loaded.baseline;
    let spec = trial_spec(&loaded, args.method, &args.params, 1, false);
    let result = narx_prune::eval::prune(b, &spec, args.params.seed)?;
    let refit = b.refit(&result.indices)?;
    let reference = b.model.coefficient_vector();
    let r2 = narx_prune::coefficient_r2(&reference, &refit.coefficient_vector())?;
    let left_fraction = loaded
        .tags
        .iter()
        .any(Option::is_some)
        .then(|| fraction_tagged(&b.library.segments, &loaded.tags, &result.indices, Basin::Left));
    let body = PruneBody {
        method: args.method,
        n: args.params.n,
        atoms: result.config.q,
        effective_batch_size: result.config.p,
        batch_matrix: result.batches,
        selected_indices: result.indices,
        dictionary_atoms: result.dictionary.map(|d| d.atoms),
        left_fraction,
        refit_coefficients: refit.coefficient_vector(),
        baseline_coefficients: reference,
        r2_coefficients: r2,
    };
    create_out(ctx)?;
    Ok(vec![write_json(ctx, "prune.json", "prune", args, &body)?])
}

#[derive(Debug, Serialize)]
struct TrialsBody<'a> {
    baseline_coefficients: &'a [f64],
    results: &'a [TrialSet],
}

pub fn evaluate(ctx: &Context, args: &EvaluateArgs) -> CliResult<Vec<PathBuf>> {
    if args.methods.is_empty() {
        return Err(CliError::usage("--methods must name at least one method"));
    }
    let loaded = load_model(&args.model)?;
    let sets = args
        .methods
        .iter()
        .map(|&m| run_trials(&loaded.baseline, &trial_spec(&loaded, m, &args.params, args.trials, ctx.timings)))
        .collect::<narx_prune::Result<Vec<_>>>()?;
    create_out(ctx)?;
    let reference = loaded.baseline.model.coefficient_vector();
    let json = write_json(
        ctx,
        "trials.json",
        "evaluate",
        args,
        &TrialsBody {
            baseline_coefficients: &reference,
            results: &sets,
        },
    )?;
    let csv = write_csv(ctx, "trials.csv", |buf| write_trials_csv(buf, &sets))?;
    Ok(vec![json, csv])
}

pub fn run_sweep(ctx: &Context, args: &SweepArgs) -> CliResult<Vec<PathBuf>> {
    let axis = args.axis.parse().map_err(|e: narx_prune::Error| CliError::usage(e.to_string()))?;
    let grid = parse_grid(&args.grid).map_err(CliError::usage)?;
    let loaded = load_model(&args.model)?;
    let spec = SweepSpec {
        axis,
        grid,
        methods: args.methods.clone(),
        n: args.params.n,
        q: args.params.atoms.unwrap_or(loaded.preset.atoms()),
        p: args.params.batch_size,
        trials: args.trials,
        base_seed: args.params.seed,
        kmeans: KMeansOptions::default(),
    };
    let report = sweep(&loaded.baseline, &spec)?;
    create_out(ctx)?;
    let json = write_json(ctx, "sweep.json", "sweep", args, &report)?;
    let csv = write_csv(ctx, "sweep.csv", |buf| write_sweep_csv(buf, &report))?;
    Ok(vec![json, csv])
}

#[derive(Debug, Serialize)]
struct PcaBody {
    atoms: usize,
    effective_batch_size: Option<usize>,
    components: [Vec<f64>; 2],
    variances: [f64; 2],
    r2_fastcan: f64,
    r2_random: f64,
    csv: &'static str,
}

pub fn pca(ctx: &Context, args: &PcaArgs) -> CliResult<Vec<PathBuf>> {
    let loaded = load_model(&args.model)?;
    let b = &loaded.baseline;
    let q = args.params.atoms.unwrap_or(loaded.preset.atoms());
    let fast = minibatch_fastcan(
        &b.samples,
        q,
        args.params.n,
        args.params.batch_size,
        args.params.seed,
        &KMeansOptions::default(),
    )?;
    let random = prune_random(b.n_samples(), args.params.n, args.params.seed)?;
    let atoms = fast.dictionary.as_ref().map(|d| d.atoms.clone()).unwrap_or_default();
    let atom_refs: Vec<&[f64]> = atoms.iter().map(Vec::as_slice).collect();
    let (projection, samples, atom_xy) = pca_project(&b.samples, &atom_refs)?;

    let mut rows: Vec<([f64; 2], PointKind)> = samples.iter().map(|&xy| (xy, PointKind::Sample)).collect();
    rows.extend(atom_xy.iter().map(|&xy| (xy, PointKind::Atom)));
    rows.extend(fast.indices.iter().map(|&j| (samples[j], PointKind::SelectedFastcan)));
    rows.extend(random.indices.iter().map(|&j| (samples[j], PointKind::SelectedRandom)));

    let reference = b.model.coefficient_vector();
    let score = |idx: &[usize]| -> CliResult<f64> {
        Ok(narx_prune::coefficient_r2(&reference, &b.refit(idx)?.coefficient_vector())?)
    };
    let body = PcaBody {
        atoms: q,
        effective_batch_size: fast.config.p,
        components: projection.components.clone(),
        variances: projection.variances,
        r2_fastcan: score(&fast.indices)?,
        r2_random: score(&random.indices)?,
        csv: "pca.csv",
    };
    create_out(ctx)?;
    let csv = write_csv(ctx, "pca.csv", |buf| write_pca_csv(buf, &rows))?;
    let json = write_json(ctx, "pca.json", "pca", args, &body)?;
    Ok(vec![csv, json])
}

fn config<C: DeserializeOwned>(value: Value) -> CliResult<C> {
    serde_json::from_value(value).map_err(|e| CliError::data(format!("artifact config is invalid: {e}")))
}

pub fn replay(ctx: &Context, artifact: &Path) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(artifact)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", artifact.display())))?;
    let env: Envelope<Value> = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{} is not an artifact: {e}", artifact.display())))?;
    if env.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!("unsupported format version {}", env.format_version)));
    }
    match env.command.as_str() {
        "generate" => generate(ctx, &config(env.config)?),
        "fit-baseline" => fit_baseline(ctx, &config(env.config)?),
        "prune" => prune(ctx, &config(env.config)?),
        "evaluate" => evaluate(ctx, &config(env.config)?),
        "sweep" => run_sweep(ctx, &config(env.config)?),
        "pca" => pca(ctx, &config(env.config)?),
        other => Err(CliError::data(format!("unknown command {other:?} in artifact"))),
    }
}
