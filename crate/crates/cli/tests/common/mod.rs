#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn grst() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grst"))
}

/// Runs `grst` with `args` inside `dir`.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    grst()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn grst")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Tick CSV of `days` sessions with a tick every 30 s from 10:58 to 16:02.
///
/// Each day drifts by `drift` per tick; regime `b` days use `drift_b`.
pub fn tick_csv(
    path: &Path,
    days: usize,
    seed: u64,
    b_days: usize,
    drift: f64,
    drift_b: f64,
) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut text = String::from("date,time,price\n");
    for d in 0..days {
        let mu = if d < b_days { drift_b } else { drift };
        let mut price = 100.0;
        let mut secs = 10 * 3600 + 58 * 60;
        while secs <= 16 * 3600 + 2 * 60 {
            price += mu + noise.sample(&mut rng);
            text.push_str(&format!(
                "2024-02-{:02},{:02}:{:02}:{:02},{price}\n",
                d + 1,
                secs / 3600,
                secs / 60 % 60,
                secs % 60
            ));
            secs += 30;
        }
    }
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Schedule of the caption figure: four Gaussians at t = 0.1, 0.15, 0.55, 0.68.
pub const FIG_SCHEDULE: &str = r#"[
  {"t": 0.1, "mu": 1.0, "sigma": 0.15},
  {"t": 0.15, "mu": -3.5, "sigma": 0.6},
  {"t": 0.55, "mu": 2.0, "sigma": 0.75},
  {"t": 0.68, "mu": -0.5, "sigma": 0.25}
]"#;

/// Arithmetic Brownian motion from 100 with absolute volatility 20 on `n` uniform points in (0, 1].
pub fn brownian_schedule(n: usize) -> String {
    let entries: Vec<String> = (1..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            format!(r#"{{"t": {t}, "mu": 100.0, "sigma": {}}}"#, 20.0 * t.sqrt())
        })
        .collect();
    format!("[{}]", entries.join(","))
}
