//! Acceptance checks. Runs without the libtest harness so every check prints
//! its verdict line even when it passes; exits non-zero if any check fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use narx_prune::datasets::{
    equilibria, generate_adse, generate_sdse, simulate_dse, sine_demo, stable_equilibria, Basin,
    SimulationConfig,
};
use narx_prune::dictionary::{learn_dictionary, KMeansOptions};
use narx_prune::eval::{fraction_tagged, run_trials, Summary, TrialSpec};
use narx_prune::fastcan::{select_greedy, SelectionProblem};
use narx_prune::pruning::resolve_batch_size;
use narx_prune::termlib::build_shift_matrix;
use narx_prune::{Baseline, LibraryConfig, Preset, PruneMethod, SampleMatrix, TermLibrary, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn main() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("batch-size rule", batch_size_rule),
        ("term count", term_count),
        ("time-shift table", time_shift_table),
        ("selector oracle", selector_oracle),
        ("full-set refit", full_set_refit),
        ("directional comparison", directional_comparison),
        ("imbalanced coverage", imbalanced_coverage),
        ("ODE fidelity", ode_fidelity),
        ("dictionary degenerate modes", dictionary_modes),
        ("command determinism", command_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn batch_size_rule() -> Check {
    let expected = [(15, 7), (20, 5), (25, 4), (5, 10)];
    for (q, p) in expected {
        let got = resolve_batch_size(100, q, 10, None);
        ensure(got == p, || format!("q={q}: got p={got}, expected {p}"))?;
    }
    Ok("(15,7) (20,5) (25,4) (5,10) at n=100, m=10".into())
}

fn term_count() -> Check {
    let factorial = |k: usize| (1..=k).product::<usize>();
    let cfg = LibraryConfig::new(4, 4, 3).map_err(|e| e.to_string())?;
    let total = cfg.term_count() + 1;
    ensure(total == 165 && factorial(11) / (factorial(8) * factorial(3)) == 165, || {
        format!("lags 4/4 cubic: {total} terms")
    })?;
    let series = TimeSeries::uniform(
        0.0,
        1.0,
        (0..16).map(|k| (k as f64 * 0.7).sin()).collect(),
        (0..16).map(|k| (k as f64 * 0.3).cos()).collect(),
        "enumeration",
    )
    .map_err(|e| e.to_string())?;
    let mut cases = 0;
    for n in 1..=10 {
        for degree in 1..=4 {
            let want = common::oracle::multiset_count(n, degree);
            let cfg = LibraryConfig::new(n.div_ceil(2), n / 2, degree).map_err(|e| e.to_string())?;
            let built = TermLibrary::build(&series, cfg).map_err(|e| e.to_string())?;
            ensure(cfg.term_count() == want && built.n_terms() == want, || {
                format!("n={n}, degree={degree}: formula {} built {} enumerated {want}", cfg.term_count(), built.n_terms())
            })?;
            cases += 1;
        }
    }
    Ok(format!("165 terms; {cases} (n, degree) pairs match enumeration"))
}

fn time_shift_table() -> Check {
    let shift = build_shift_matrix(&sine_demo(), 20, 0).map_err(|e| e.to_string())?;
    ensure(shift.n_samples() == 80, || format!("{} usable samples", shift.n_samples()))?;
    let last = shift.n_samples() - 1;
    // (lag, sample, quoted value)
    let quoted = [
        (20, 0, 0.000),
        (19, 0, 0.063),
        (18, 0, 0.127),
        (17, 0, 0.189),
        (1, last, -0.063),
        (2, last, -0.127),
        (3, last, -0.189),
        (20, last, -0.955),
    ];
    for (lag, j, want) in quoted {
        let got = shift.lagged[lag - 1][j];
        ensure(((got * 1000.0).round() / 1000.0 - want).abs() < 1e-12, || {
            format!("y(k-{lag}) at sample {j}: {got:.4} vs {want}")
        })?;
    }
    Ok("80 samples; 8 quoted entries match to 3 decimals".into())
}

fn selector_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let instances = 200;
    for case in 0..instances {
        let obs = rng.random_range(4..=12);
        let n_cand = rng.random_range(1..=40);
        let n_tgt = rng.random_range(1..=3);
        let mut col = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let cands: Vec<Vec<f64>> = (0..n_cand).map(|_| col(obs)).collect();
        let targets: Vec<Vec<f64>> = (0..n_tgt).map(|_| col(obs)).collect();
        // stop one short of the centred rank so the last step is not a tie
        let k = rng.random_range(1..=n_cand.min(obs - 2));
        let problem = SelectionProblem::new(
            cands.iter().map(Vec::as_slice),
            targets.iter().map(Vec::as_slice),
            k,
        );
        let got = select_greedy(&problem).map_err(|e| e.to_string())?.indices;
        let want = common::oracle::greedy_selection(&cands, &targets, k);
        ensure(got == want, || format!("instance {case}: {got:?} vs oracle {want:?}"))?;
    }
    Ok(format!("{instances} random instances identical"))
}

fn full_set(baseline: &Baseline) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for method in [PruneMethod::MinibatchFastcan, PruneMethod::Random] {
        let spec = spec(method, baseline.n_samples(), Some(3), 1, 0);
        let set = run_trials(baseline, &spec).map_err(|e| e.to_string())?;
        let r2 = set.reports[0]
            .r2_coefficients
            .ok_or_else(|| format!("{method}: {:?}", set.reports[0].error))?;
        worst = worst.max((r2 - 1.0).abs());
    }
    Ok(worst)
}

fn spec(method: PruneMethod, n: usize, q: Option<usize>, trials: usize, base_seed: u64) -> TrialSpec {
    TrialSpec {
        method,
        n,
        q: q.filter(|_| method == PruneMethod::MinibatchFastcan),
        p: None,
        trials,
        base_seed,
        kmeans: KMeansOptions::default(),
        timed: false,
    }
}

fn baseline(train: &[TimeSeries], preset: Preset) -> Result<Baseline, String> {
    let lib = TermLibrary::build_pooled(train, preset.library_config()).map_err(|e| e.to_string())?;
    Baseline::fit(lib, preset.n_terms()).map_err(|e| e.to_string())
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn full_set_refit() -> Check {
    let dir = scratch();
    let cases = [
        (Preset::Sdse, generate_sdse(0).map_err(|e| e.to_string())?.train()),
        (Preset::Adse, generate_adse(0).map_err(|e| e.to_string())?.train()),
        (Preset::Emps, common::emps_bench(0, dir.path()).train),
        (Preset::Whs, common::whs_bench(0, dir.path()).train),
    ];
    let mut worst = 0.0f64;
    for (preset, train) in cases {
        let dev = full_set(&baseline(&train, preset)?)?;
        ensure(dev <= 1e-9, || format!("{preset}: |R^2 - 1| = {dev:e}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("all four presets, max |R^2 - 1| = {worst:.1e}"))
}

/// Median and SD for both methods over ten trials.
fn compare(b: &Baseline, q: usize, seed: u64) -> Result<(Summary, Summary), String> {
    let run = |m| run_trials(b, &spec(m, 100, Some(q), 10, seed)).map_err(|e| e.to_string());
    Ok((run(PruneMethod::MinibatchFastcan)?.summary, run(PruneMethod::Random)?.summary))
}

fn favourable(fast: &Summary, random: &Summary) -> bool {
    matches!((fast.median, random.median, fast.sd, random.sd),
        (Some(fm), Some(rm), Some(fs), Some(rs)) if fm > rm && fs < rs)
}

fn directional_comparison() -> Check {
    let dir = scratch();
    let seeds = 0..5u64;
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, preset) in [("SDSE", Preset::Sdse), ("EMPS stand-in", Preset::Emps)] {
        let mut wins = 0;
        let mut detail = Vec::new();
        for seed in seeds.clone() {
            let train = match preset {
                Preset::Sdse => generate_sdse(seed).map_err(|e| e.to_string())?.train(),
                _ => common::emps_bench(seed, dir.path()).train,
            };
            let b = baseline(&train, preset)?;
            let (fast, random) = compare(&b, preset.atoms(), seed)?;
            let win = favourable(&fast, &random);
            wins += win as usize;
            detail.push(format!(
                "s{seed} med {:.4}/{:.4} sd {:.4}/{:.4}{}",
                fast.median.unwrap_or(f64::NAN),
                random.median.unwrap_or(f64::NAN),
                fast.sd.unwrap_or(f64::NAN),
                random.sd.unwrap_or(f64::NAN),
                if win { "" } else { " x" }
            ));
        }
        ok &= wins >= 4;
        lines.push(format!("{label} {wins}/5 [{}]", detail.join("; ")));
    }
    let summary = format!("fastcan/random; need >= 4/5 each: {}", lines.join(" | "));
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn imbalanced_coverage() -> Check {
    let ds = generate_adse(0).map_err(|e| e.to_string())?;
    let b = baseline(&ds.train(), Preset::Adse)?;
    let tags = ds.train_tags();
    let all: Vec<usize> = (0..b.n_samples()).collect();
    let share = fraction_tagged(&b.library.segments, &tags, &all, Basin::Left);
    let left = |m| -> Result<Vec<f64>, String> {
        let set = run_trials(&b, &spec(m, 100, Some(20), 10, 0)).map_err(|e| e.to_string())?;
        Ok(set
            .reports
            .iter()
            .map(|r| fraction_tagged(&b.library.segments, &tags, &r.selected_indices, Basin::Left))
            .collect())
    };
    let fast = left(PruneMethod::MinibatchFastcan)?;
    let random = left(PruneMethod::Random)?;
    let above = fast.iter().filter(|&&f| f > share).count();
    let random_mean = random.iter().sum::<f64>() / random.len() as f64;
    let detail = format!(
        "left share {share:.3}; fastcan above share in {above}/10 (mean {:.3}); random mean {random_mean:.3} (limit {:.3})",
        fast.iter().sum::<f64>() / 10.0,
        3.0 * share
    );
    if above >= 8 && random_mean <= 3.0 * share {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0, "bracket [{lo}, {hi}] does not change sign");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ode_fidelity() -> Check {
    let g = |y: f64| -y + y * y + y * y * y;
    let oracle = [bisect(g, -2.0, -1.0), bisect(g, -0.5, 0.3), bisect(g, 0.3, 1.0)];
    let found = equilibria();
    for (a, b) in found.iter().zip(&oracle) {
        ensure((a - b).abs() < 1e-9, || format!("equilibrium {a} vs bisection {b}"))?;
    }
    let (left, right) = stable_equilibria();
    let sqrt5 = 5f64.sqrt();
    ensure(
        (left - (-1.0 - sqrt5) / 2.0).abs() < 1e-9 && (right - (-1.0 + sqrt5) / 2.0).abs() < 1e-9,
        || format!("stable points {left}, {right}"),
    )?;

    let mut ics = Vec::new();
    for centre in [left, right] {
        for i in 0..=10 {
            for j in 0..=10 {
                ics.push((centre - 0.5 + 0.1 * i as f64, -0.5 + 0.1 * j as f64));
            }
        }
    }
    let run = |substeps| {
        simulate_dse(&SimulationConfig {
            initial_conditions: ics.clone(),
            dt: SimulationConfig::DEFAULT_DT,
            substeps,
            duration: 10.0,
            forced: true,
            seed: 0,
        })
        .map_err(|e| e.to_string())
    };
    let coarse = run(1)?;
    let fine = run(2)?;
    let worst = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a.y.last().unwrap() - b.y.last().unwrap()).abs())
        .fold(0.0f64, f64::max);
    ensure(worst < 1e-5, || format!("step halving moved a 10 s endpoint by {worst:e}"))?;
    Ok(format!(
        "equilibria within 1e-9 of bisection; worst step-halving change {worst:.1e} over {} initial conditions",
        ics.len()
    ))
}

fn dictionary_modes() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let points: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let x = SampleMatrix::from_points(points);

    let small = x.subset(&(0..40).collect::<Vec<_>>());
    let exact = learn_dictionary(&small, 40, 1, &KMeansOptions::default()).map_err(|e| e.to_string())?;
    ensure(exact.inertia == 0.0, || format!("q = N inertia {}", exact.inertia))?;

    let one = learn_dictionary(&x, 1, 2, &KMeansOptions::default()).map_err(|e| e.to_string())?;
    let mean = x.mean();
    let dev = one.atoms[0]
        .iter()
        .zip(&mean)
        .map(|(a, m)| (a - m).abs())
        .fold(0.0f64, f64::max);
    ensure(dev < 1e-6, || format!("q = 1 atom is {dev:e} from the mean"))?;

    let full = learn_dictionary(&x, 8, 3, &KMeansOptions::full_batch(50)).map_err(|e| e.to_string())?;
    for w in full.history.windows(2) {
        ensure(w[1] <= w[0], || format!("inertia rose from {} to {}", w[0], w[1]))?;
    }
    Ok(format!(
        "q=N inertia 0; q=1 within {dev:.1e} of the mean; {} full-batch steps non-increasing",
        full.history.len()
    ))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_narx-prune")
}

fn run_in(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("NARX_PRUNE_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn command_determinism() -> Check {
    let script: &[&[&str]] = &[
        &["--out", "sdse", "generate", "sdse", "--seed", "3"],
        &["--out", "adse", "generate", "adse", "--seed", "3"],
        &["--out", "sine", "generate", "sine-demo"],
        &["--out", "fit", "fit-baseline", "--manifest", "sdse/manifest.json"],
        &["--out", "fit_adse", "fit-baseline", "--dataset", "adse", "--data-seed", "3"],
        &["--out", "prune_fc", "prune", "--model", "fit/model.json", "--seed", "5"],
        &["--out", "prune_rand", "prune", "--model", "fit/model.json", "--method", "random", "--seed", "5"],
        &["--out", "prune_adse", "prune", "--model", "fit_adse/model.json", "--atoms", "20"],
        &["--out", "eval", "evaluate", "--model", "fit/model.json", "--trials", "3", "--seed", "7"],
        &["--out", "sweep", "sweep", "--model", "fit/model.json", "--axis", "atom-size", "--grid", "5:15:5", "--trials", "2"],
        &["--out", "pca", "pca", "--model", "fit/model.json", "--seed", "1"],
        &["--out", "replayed", "replay", "eval/trials.json"],
    ];
    let a = scratch();
    let b = scratch();
    for dir in [a.path(), b.path()] {
        for args in script {
            run_in(dir, args)?;
        }
    }
    let listing = files(a.path());
    ensure(listing == files(b.path()), || "runs produced different file sets".into())?;
    for rel in &listing {
        let x = fs::read(a.path().join(rel)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join(rel)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{} differs between runs", rel.display()))?;
    }
    let replayed = fs::read(a.path().join("replayed/trials.json")).map_err(|e| e.to_string())?;
    let original = fs::read(a.path().join("eval/trials.json")).map_err(|e| e.to_string())?;
    ensure(replayed == original, || "replay did not reproduce trials.json".into())?;
    Ok(format!("{} commands, {} artifacts byte-identical across two runs", script.len(), listing.len()))
}
