//! Stand-in benchmark recordings.
//!
//! The real EMPS and Wiener-Hammerstein files are not redistributable, so the
//! tests simulate systems of the same structure, write them in the documented
//! CSV layout and read them back through the normal loader.

#![allow(dead_code)]

use std::path::Path;

use narx_prune::datasets::{load_benchmark_csv, write_series_csv, CsvSchema};
use narx_prune::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Prismatic drive under PD position control: viscous and smoothed Coulomb
/// friction plus an offset force. Input is the drive voltage (force divided
/// by the actuator gain), output the measured position.
pub fn emps_like(seed: u64, duration: f64, meta: &str) -> TimeSeries {
    const MASS: f64 = 95.1;
    const FV: f64 = 203.5;
    const FC: f64 = 20.4;
    const OFFSET: f64 = -3.2;
    const KP: f64 = 1.6e4;
    const KD: f64 = 1.2e3;
    const GAIN: f64 = 35.15;
    let sub = 10;
    let h = 1e-3;
    let dt = h * sub as f64;
    let steps = (duration / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs: Vec<(f64, f64, f64)> = (0..4)
        .map(|i| {
            let f = 0.1 + 0.15 * i as f64 + rng.random_range(0.0..0.05);
            (f, 0.05 / (1.0 + i as f64), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let reference = |t: f64| -> f64 {
        0.1 + freqs
            .iter()
            .map(|(f, a, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
            .sum::<f64>()
    };
    let force = |t: f64, q: f64, v: f64| KP * (reference(t) - q) - KD * v;
    let accel = |tau: f64, v: f64| (tau - FV * v - FC * (v / 1e-3).tanh() - OFFSET) / MASS;

    let noise_y = Normal::new(0.0, 2e-5).unwrap();
    let noise_u = Normal::new(0.0, 0.5).unwrap();
    let (mut q, mut v) = (reference(0.0), 0.0);
    let (mut u, mut y) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let tau = force(t0, q, v);
        u.push((tau + noise_u.sample(&mut rng)) / GAIN);
        y.push(q + noise_y.sample(&mut rng));
        // force is held over the sampling interval
        for _ in 0..sub {
            let f = |_: f64, v: f64| [v, accel(tau, v)];
            let k1 = f(q, v);
            let k2 = f(q + 0.5 * h * k1[0], v + 0.5 * h * k1[1]);
            let k3 = f(q + 0.5 * h * k2[0], v + 0.5 * h * k2[1]);
            let k4 = f(q + h * k3[0], v + h * k3[1]);
            q += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            v += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
    }
    TimeSeries::uniform(0.0, dt, u, y, meta).unwrap()
}

/// Second-order filter, static nonlinearity, second-order filter, driven by
/// low-passed Gaussian noise.
pub fn whs_like(seed: u64, len: usize, meta: &str) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = Normal::new(0.0, 1.0).unwrap();
    let mut u = Vec::with_capacity(len);
    let mut lp = 0.0;
    for _ in 0..len {
        lp = 0.7 * lp + 0.3 * white.sample(&mut rng);
        u.push(lp);
    }
    let filter = |x: &[f64], a: [f64; 2], b: [f64; 2]| -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut v = b[0] * x[k];
            if k >= 1 {
                v += b[1] * x[k - 1] + a[0] * out[k - 1];
            }
            if k >= 2 {
                v += a[1] * out[k - 2];
            }
            out[k] = v;
        }
        out
    };
    let w = filter(&u, [1.2, -0.5], [0.4, 0.2]);
    let z: Vec<f64> = w.iter().map(|&x| x - 0.25 * x * x * x + 0.1 * x * x).collect();
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let y: Vec<f64> = filter(&z, [0.9, -0.3], [0.5, 0.1])
        .into_iter()
        .map(|v| v + noise.sample(&mut rng))
        .collect();
    TimeSeries::uniform(0.0, 1.28e-5, u, y, meta).unwrap()
}

/// Writes the series and reads it back through the benchmark loader.
pub fn roundtrip(dir: &Path, name: &str, series: &TimeSeries) -> TimeSeries {
    let path = dir.join(format!("{name}.csv"));
    write_series_csv(&path, series).unwrap();
    load_benchmark_csv(&path, &CsvSchema::default()).unwrap()
}

pub struct Bench {
    pub train: Vec<TimeSeries>,
    pub test: Vec<TimeSeries>,
}

pub fn emps_bench(seed: u64, dir: &Path) -> Bench {
    Bench {
        train: vec![roundtrip(dir, "emps_train", &emps_like(seed, 25.0, "emps/train"))],
        test: vec![roundtrip(
            dir,
            "emps_test",
            &emps_like(seed.wrapping_add(7919), 10.0, "emps/test"),
        )],
    }
}

pub fn whs_bench(seed: u64, dir: &Path) -> Bench {
    Bench {
        train: vec![roundtrip(dir, "whs_train", &whs_like(seed, 3000, "whs/train"))],
        test: vec![roundtrip(
            dir,
            "whs_test",
            &whs_like(seed.wrapping_add(7919), 1000, "whs/test"),
        )],
    }
}

pub mod oracle;
