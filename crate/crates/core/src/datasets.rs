//! Data sources: the dual-stable-equilibria oscillator
//! `y'' + y' - y + y^2 + y^3 = u`, the sinusoid used to illustrate time-shift
//! redundancy, and benchmark recordings stored as CSV.

use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::termlib::{TimeSeries, STEP_RTOL};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Forcing applied to the oscillator, `0.1 cos(0.2 pi t)`.
pub fn forcing(t: f64) -> f64 {
    0.1 * (0.2 * std::f64::consts::PI * t).cos()
}

/// Right-hand side of the oscillator as a first-order system in `(y, y')`.
#[inline]
pub fn dse_rhs(state: [f64; 2], u: f64) -> [f64; 2] {
    let [y, v] = state;
    [v, u - v + y - y * y - y * y * y]
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(state: [f64; 2], t: f64, dt: f64, forced: bool) -> [f64; 2] {
    let u = |t: f64| if forced { forcing(t) } else { 0.0 };
    let add = |s: [f64; 2], k: [f64; 2], h: f64| [s[0] + h * k[0], s[1] + h * k[1]];
    let k1 = dse_rhs(state, u(t));
    let k2 = dse_rhs(add(state, k1, dt / 2.0), u(t + dt / 2.0));
    let k3 = dse_rhs(add(state, k2, dt / 2.0), u(t + dt / 2.0));
    let k4 = dse_rhs(add(state, k3, dt), u(t + dt));
    [
        state[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        state[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Lyapunov-style energy `y'^2/2 - y^2/2 + y^3/3 + y^4/4`; non-increasing
/// along unforced trajectories.
pub fn dse_energy(state: [f64; 2]) -> f64 {
    let [y, v] = state;
    0.5 * v * v - 0.5 * y * y + y.powi(3) / 3.0 + 0.25 * y.powi(4)
}

/// Equilibria of the unforced system, `-y + y^2 + y^3 = 0`, by Newton's method
/// from a bracketing start for each root, in increasing order.
pub fn equilibria() -> [f64; 3] {
    let f = |y: f64| -y + y * y + y * y * y;
    let df = |y: f64| -1.0 + 2.0 * y + 3.0 * y * y;
    let newton = |mut y: f64| {
        for _ in 0..100 {
            let step = f(y) / df(y);
            y -= step;
            if step.abs() < 1e-16 * y.abs().max(1.0) {
                break;
            }
        }
        y
    };
    [newton(-2.0), newton(0.1), newton(1.0)]
}

/// Stable equilibria `(left, right)`: the roots where the potential curves upward.
pub fn stable_equilibria() -> (f64, f64) {
    let [left, _, right] = equilibria();
    (left, right)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basin {
    Left,
    Right,
}

impl Basin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Basin::Left => "left",
            Basin::Right => "right",
        }
    }

    pub fn equilibrium(&self) -> f64 {
        let (l, r) = stable_equilibria();
        match self {
            Basin::Left => l,
            Basin::Right => r,
        }
    }
}

impl fmt::Display for Basin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which stable equilibrium an unforced trajectory from `state` settles at.
pub fn basin_of(state: [f64; 2], dt: f64) -> Basin {
    let mut s = state;
    let mut t = 0.0;
    // the slow eigenvalue at either stable point has real part -1/2
    for _ in 0..((200.0 / dt).round() as usize) {
        s = rk4_step(s, t, dt, false);
        t += dt;
    }
    if s[0] < 0.0 {
        Basin::Left
    } else {
        Basin::Right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// `(y0, y'0)` pairs, one trajectory each.
    pub initial_conditions: Vec<(f64, f64)>,
    /// Sampling interval.
    pub dt: f64,
    /// RK4 steps per sampling interval.
    #[serde(default = "one")]
    pub substeps: usize,
    pub duration: f64,
    pub forced: bool,
    pub seed: u64,
}

impl SimulationConfig {
    pub const DEFAULT_DT: f64 = 0.1;
    pub const DEFAULT_SUBSTEPS: usize = 1;
    pub const DEFAULT_DURATION: f64 = 50.0;

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "need dt > 0 and duration >= dt (dt = {}, duration = {})",
                self.dt, self.duration
            )));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be at least 1".into()));
        }
        if self.initial_conditions.is_empty() {
            return Err(Error::InvalidConfig("no initial conditions".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Integration step.
    pub fn step(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

fn one() -> usize {
    1
}

/// Integrates one trajectory per initial condition and samples it at every step.
pub fn simulate_dse(config: &SimulationConfig) -> Result<Vec<TimeSeries>> {
    config.validate()?;
    config
        .initial_conditions
        .iter()
        .enumerate()
        .map(|(idx, &(y0, v0))| {
            let (t, y, _) = integrate(config, [y0, v0], idx)?;
            let u = t
                .iter()
                .map(|&t| if config.forced { forcing(t) } else { 0.0 })
                .collect();
            TimeSeries::new(t, u, y, format!("dse/{idx:03}"))
        })
        .collect()
}

fn integrate(config: &SimulationConfig, init: [f64; 2], idx: usize) -> Result<(Vec<f64>, Vec<f64>, [f64; 2])> {
    let steps = config.n_steps();
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut s = init;
    for k in 0..=steps {
        let tk = k as f64 * config.dt;
        if !(s[0].is_finite() && s[1].is_finite()) {
            return Err(Error::NonFiniteState {
                trajectory: idx,
                time: tk,
            });
        }
        t.push(tk);
        y.push(s[0]);
        if k < steps {
            let h = config.step();
            for j in 0..config.substeps {
                s = rk4_step(s, tk + j as f64 * h, h, config.forced);
            }
        }
    }
    Ok((t, y, s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub series: TimeSeries,
    pub role: Role,
    pub tag: Option<Basin>,
}

/// A collection of trajectories, pooled per role.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub members: Vec<Member>,
}

impl Dataset {
    pub fn train(&self) -> Vec<TimeSeries> {
        self.by_role(Role::Train).map(|m| m.series.clone()).collect()
    }

    pub fn test(&self) -> Vec<TimeSeries> {
        self.by_role(Role::Test).map(|m| m.series.clone()).collect()
    }

    /// Tags of the training members, in pooling order.
    pub fn train_tags(&self) -> Vec<Option<Basin>> {
        self.by_role(Role::Train).map(|m| m.tag).collect()
    }

    fn by_role(&self, role: Role) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(move |m| m.role == role)
    }
}

/// Recipe for a generated dual-equilibria data set.
#[derive(Clone, Debug, PartialEq)]
pub struct DseRecipe {
    pub name: &'static str,
    pub left: usize,
    pub right: usize,
    /// Test trajectories per basin.
    pub test_per_basin: usize,
    /// Half-width of the initial-condition box around each equilibrium.
    pub box_half_width: f64,
    pub dt: f64,
    pub substeps: usize,
    pub duration: f64,
}

impl DseRecipe {
    pub const SDSE: DseRecipe = DseRecipe {
        name: "sdse",
        left: 5,
        right: 5,
        test_per_basin: 1,
        box_half_width: 0.5,
        dt: SimulationConfig::DEFAULT_DT,
        substeps: SimulationConfig::DEFAULT_SUBSTEPS,
        duration: SimulationConfig::DEFAULT_DURATION,
    };

    pub const ADSE: DseRecipe = DseRecipe {
        name: "adse",
        left: 2,
        right: 98,
        ..Self::SDSE
    };

    /// Draws initial conditions (rejecting draws that settle in the other
    /// basin) and integrates the forced trajectories.
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plan = Vec::new();
        for (role, left, right) in [
            (Role::Train, self.left, self.right),
            (Role::Test, self.test_per_basin, self.test_per_basin),
        ] {
            plan.extend(std::iter::repeat_n((role, Basin::Left), left));
            plan.extend(std::iter::repeat_n((role, Basin::Right), right));
        }

        let mut counters = [0usize; 2];
        let mut members = Vec::with_capacity(plan.len());
        for (role, basin) in plan {
            let config = SimulationConfig {
                initial_conditions: vec![],
                dt: self.dt,
                substeps: self.substeps,
                duration: self.duration,
                forced: true,
                seed,
            };
            let centre = basin.equilibrium();
            let mut attempts = 0;
            let (t, y) = loop {
                attempts += 1;
                if attempts > 1000 {
                    return Err(Error::InvalidConfig(format!(
                        "could not place an initial condition in the {basin} basin"
                    )));
                }
                let y0 = centre + rng.random_range(-self.box_half_width..=self.box_half_width);
                let v0 = rng.random_range(-self.box_half_width..=self.box_half_width);
                let (t, y, end) = integrate(&config, [y0, v0], members.len())?;
                if basin_of(end, config.step()) == basin {
                    break (t, y);
                }
            };
            let counter = &mut counters[role as usize];
            let meta = format!(
                "{}/{}/{:03}/{}",
                self.name,
                match role {
                    Role::Train => "train",
                    Role::Test => "test",
                },
                *counter,
                basin
            );
            *counter += 1;
            let u = t.iter().map(|&t| forcing(t)).collect();
            members.push(Member {
                series: TimeSeries::new(t, u, y, meta)?,
                role,
                tag: Some(basin),
            });
        }
        Ok(Dataset {
            name: self.name.to_string(),
            members,
        })
    }
}

/// Ten forced trajectories, five settling at each equilibrium, plus one test
/// trajectory per basin.
pub fn generate_sdse(seed: u64) -> Result<Dataset> {
    DseRecipe::SDSE.generate(seed)
}

/// A hundred forced trajectories, two left and ninety-eight right, plus one
/// test trajectory per basin.
pub fn generate_adse(seed: u64) -> Result<Dataset> {
    DseRecipe::ADSE.generate(seed)
}

/// `sin(2 pi t)` at 100 points spanning `[0, 1]` s, zero input.
pub fn sine_demo() -> TimeSeries {
    let n = 100;
    let t: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let y = t.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
    TimeSeries::new(t, vec![0.0; n], y, "sine-demo").expect("uniform grid")
}

/// Column mapping for benchmark CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub t: String,
    pub u: String,
    pub y: String,
    #[serde(default = "default_step_rtol")]
    pub step_rtol: f64,
}

fn default_step_rtol() -> f64 {
    STEP_RTOL
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            t: "t".into(),
            u: "u".into(),
            y: "y".into(),
            step_rtol: STEP_RTOL,
        }
    }
}

pub fn load_benchmark_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let cols = [column(&schema.t)?, column(&schema.u)?, column(&schema.y)?];

    let (mut t, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [0.0; 3];
        for (v, &c) in values.iter_mut().zip(&cols) {
            let field = record
                .get(c)
                .ok_or_else(|| parse_err(line, format!("missing field {c}")))?;
            *v = field
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
        }
        t.push(values[0]);
        u.push(values[1]);
        y.push(values[2]);
    }
    let meta = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TimeSeries::with_tolerance(t, u, y, meta, schema.step_rtol)
}

/// Writes `t,u,y` with shortest round-trip float formatting and LF endings.
pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    w.write_record(["t", "u", "y"]).map_err(|e| csv_io(path, e))?;
    for k in 0..series.len() {
        w.write_record([
            series.t[k].to_string(),
            series.u[k].to_string(),
            series.y[k].to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Basin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<CsvSchema>,
}

/// Lists the member CSVs of a data set. Training members are pooled with lags
/// masked at member boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub members: Vec<ManifestEntry>,
}

/// Writes one CSV per member plus `manifest.json`; returns the manifest path.
pub fn write_dataset(dir: &Path, dataset: &Dataset, seed: Option<u64>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.members.len());
    let mut counters = [0usize; 2];
    for m in &dataset.members {
        let role = match m.role {
            Role::Train => "train",
            Role::Test => "test",
        };
        let counter = &mut counters[m.role as usize];
        let file = format!("{}_{role}_{:03}.csv", dataset.name, *counter);
        *counter += 1;
        write_series_csv(&dir.join(&file), &m.series)?;
        entries.push(ManifestEntry {
            file,
            role: m.role,
            tag: m.tag,
            columns: None,
        });
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        dataset: dataset.name.clone(),
        seed,
        dt: dataset.members.first().map(|m| m.series.dt()),
        members: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported manifest version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads every member listed in a manifest; paths resolve against its directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let default_schema = CsvSchema::default();
    let members = manifest
        .members
        .iter()
        .map(|e| {
            let schema = e.columns.as_ref().unwrap_or(&default_schema);
            let mut series = load_benchmark_csv(&base.join(&e.file), schema)?;
            series.meta = format!("{}/{}", manifest.dataset, e.file);
            Ok(Member {
                series,
                role: e.role,
                tag: e.tag,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !members.iter().any(|m| m.role == Role::Train) {
        return Err(Error::InvalidConfig("manifest lists no training members".into()));
    }
    Ok(Dataset {
        name: manifest.dataset,
        members,
    })
}
