//! One function per pipeline stage. Stages exchange JSON files.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use grst_core::baselines::{
    bachelier, black_scholes, crr_params, jr_params, price_multiplicative, tian_params,
    trigeorgis_params_with, TrigeorgisDrift,
};
use grst_core::marginal::{
    component_marginals, default_scale, feature_matrix, fit_mixture_em, ingest_series, read_ticks,
    scale_series, BarSeries, EmOptions, MixtureFit, SessionConfig,
};
use grst_core::{
    build_grst_n, build_mixture, price_mixture, price_tree, schedule_residuals, ExerciseStyle,
    GaussianSpec, GrstMixture, MarginalSchedule, OptionContract, OptionKind,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::json(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::json(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

fn out_path(cfg: &RunConfig, out: Option<&Path>, default: &str) -> Result<PathBuf, CliError> {
    match out {
        Some(p) => Ok(p.to_path_buf()),
        None => Ok(cfg
            .path_opt("out")?
            .unwrap_or_else(|| PathBuf::from(default))),
    }
}

fn parse_time(
    cfg: &RunConfig,
    key: &str,
    default: chrono::NaiveTime,
) -> Result<chrono::NaiveTime, CliError> {
    match cfg.str_opt(key)? {
        None => Ok(default),
        Some(s) => chrono::NaiveTime::parse_from_str(&s, "%H:%M")
            .or_else(|_| chrono::NaiveTime::parse_from_str(&s, "%H:%M:%S"))
            .map_err(|_| CliError::Config(format!("key '{key}' must be HH:MM, got '{s}'"))),
    }
}

pub fn ingest(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let data = cfg.path_required("data")?;
    let defaults = SessionConfig::default();
    let session = SessionConfig {
        session_start: parse_time(cfg, "session.start", defaults.session_start)?,
        session_end: parse_time(cfg, "session.end", defaults.session_end)?,
        interval_minutes: cfg.u64_or(
            "session.interval_minutes",
            u64::from(defaults.interval_minutes),
        )? as u32,
        max_missing_frac: cfg.f64_or("session.max_missing_frac", defaults.max_missing_frac)?,
    };
    let scale = cfg.f64_or("scale", default_scale())?;

    let file = File::open(&data).map_err(|e| CliError::io(&data, e))?;
    let ticks = read_ticks(BufReader::new(file))?;
    let ingested = ingest_series(&ticks, &session)?;
    let bars = scale_series(&ingested.bars, scale)?;

    let out = out_path(cfg, out, "bars.json")?;
    write_json(&out, &bars)?;
    let report = serde_json::json!({
        "days_kept": bars.num_days(),
        "days_dropped": ingested.dropped,
    });
    write_json(&out.with_extension("report.json"), &report)?;
    println!(
        "ingested {} day(s), dropped {}, {} points per day -> {}",
        bars.num_days(),
        ingested.dropped.len(),
        bars.days[0].prices.len(),
        out.display()
    );
    for d in &ingested.dropped {
        println!(
            "dropped {}: {}/{} grid points unobserved",
            d.date, d.missing, d.grid_len
        );
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let bars: BarSeries = read_json(&cfg.path_required("bars")?)?;
    let window = cfg.usize_or("window", 9)?;
    let k = cfg.usize_or("components", 2)?;
    let defaults = EmOptions::default();
    let opts = EmOptions {
        max_iter: cfg.usize_or("em.max_iter", defaults.max_iter)?,
        tol: cfg.f64_or("em.tol", defaults.tol)?,
        restarts: cfg.usize_or("em.restarts", defaults.restarts)?,
        seed: match seed {
            Some(s) => s,
            None => cfg.u64_or("em.seed", defaults.seed)?,
        },
        var_floor: cfg.f64_or("em.var_floor", defaults.var_floor)?,
    };
    let y = feature_matrix(&bars, window)?;
    let fit = fit_mixture_em(&y, k, &opts)?;
    let out = out_path(cfg, out, "fit.json")?;
    write_json(&out, &fit)?;
    println!(
        "fit K={} on {}x{} rows: loglik {} after {} iterations{}",
        fit.k,
        y.rows(),
        y.cols(),
        fit.loglik,
        fit.iters,
        if fit.converged {
            ""
        } else {
            " (not converged)"
        }
    );
    for c in &fit.degenerate {
        println!("warning: component {c} is degenerate");
    }
    Ok(())
}

fn build_from_config(cfg: &RunConfig) -> Result<(GrstMixture, Vec<MarginalSchedule>), CliError> {
    let k = cfg.usize_or("tree.k", 3)?;
    let root = cfg.f64_or("tree.root", 0.0)?;
    if let Some(path) = cfg.path_opt("fit")? {
        let fit: MixtureFit = read_json(&path)?;
        let t0 = cfg.f64_or("tree.t0", 0.0)?;
        let dt = cfg.f64_or("tree.dt", 1.0 / 252.0)?;
        let schedules: Vec<MarginalSchedule> = component_marginals(&fit, t0, dt)?
            .iter()
            .map(|s| s.shifted(root))
            .collect();
        let mix = build_mixture(&schedules, &fit.weights, root, k)?;
        Ok((mix, schedules))
    } else if let Some(path) = cfg.path_opt("schedule")? {
        let entries: Vec<GaussianSpec> = read_json(&path)?;
        let schedule = MarginalSchedule::new(entries)?;
        let mix = build_mixture(std::slice::from_ref(&schedule), &[1.0], root, k)?;
        Ok((mix, vec![schedule]))
    } else {
        Err(CliError::Config(
            "build needs either 'fit' or 'schedule'".into(),
        ))
    }
}

fn write_dot(dir: &Path, mix: &GrstMixture) -> Result<(), CliError> {
    for (i, tree) in mix.components().iter().enumerate() {
        let name = format!("component_{i}");
        write_text(&dir.join(format!("{name}.dot")), &tree.to_dot(&name))?;
    }
    Ok(())
}

pub fn build(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let (mix, schedules) = build_from_config(cfg)?;
    let out = out_path(cfg, out, "mixture.json")?;
    write_json(&out, &mix)?;
    if let Some(dir) = cfg.path_opt("dot_dir")? {
        write_dot(&dir, &mix)?;
    }
    for (c, (tree, sched)) in mix.components().iter().zip(&schedules).enumerate() {
        for (t, dm, dv) in schedule_residuals(tree, sched)? {
            println!("component {c} t={t} |dmean|={dm:e} |dvar|={dv:e}");
        }
    }
    println!(
        "built {} component(s), {} layers each -> {}",
        mix.len(),
        mix.components()[0].num_layers(),
        out.display()
    );
    Ok(())
}

fn contract_from_config(cfg: &RunConfig, default_expiry: f64) -> Result<OptionContract, CliError> {
    if let Some(path) = cfg.path_opt("contract_file")? {
        return read_json(&path);
    }
    let kind = match cfg.str_or("contract.kind", "call")?.as_str() {
        "call" => OptionKind::Call,
        "put" => OptionKind::Put,
        other => {
            return Err(CliError::Config(format!(
                "contract.kind must be call or put, got '{other}'"
            )))
        }
    };
    let exercise = match cfg.str_or("contract.exercise", "european")?.as_str() {
        "european" => ExerciseStyle::European,
        "american" => ExerciseStyle::American,
        other => {
            return Err(CliError::Config(format!(
                "contract.exercise must be european or american, got '{other}'"
            )))
        }
    };
    let strike = cfg.f64_required("contract.strike")?;
    let expiry = cfg.f64_or("contract.expiry", default_expiry)?;
    Ok(OptionContract::new(kind, strike, expiry, exercise)?)
}

pub fn price(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let mix: GrstMixture = read_json(&cfg.path_required("mixture")?)?;
    let contract = contract_from_config(cfg, mix.components()[0].final_time())?;
    let r = cfg.f64_or("r", 0.0)?;
    let result = price_mixture(&mix, &contract, r)?;
    let out = out_path(cfg, out, "price.json")?;
    write_json(&out, &result)?;
    println!(
        "price {} root_delta {} -> {}",
        result.price,
        result.root_delta,
        out.display()
    );
    Ok(())
}

pub fn export(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let mix: GrstMixture = read_json(&cfg.path_required("mixture")?)?;
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => cfg
            .path_opt("dot_dir")?
            .unwrap_or_else(|| PathBuf::from("dot")),
    };
    write_dot(&dir, &mix)?;
    println!("wrote {} DOT file(s) to {}", mix.len(), dir.display());
    Ok(())
}

/// Standard contract for the convergence report.
const BENCH_S0: f64 = 100.0;
const BENCH_STRIKE: f64 = 100.0;
const BENCH_RATE: f64 = 0.05;
const BENCH_SIGMA: f64 = 0.2;
const BENCH_T: f64 = 1.0;
/// Additive scenario: absolute volatility, zero rate, four schedule points.
const BENCH_SIGMA_ABS: f64 = 20.0;
const BENCH_SEGMENTS: usize = 4;

fn grst_bench_price(n: usize) -> Result<f64, CliError> {
    if !n.is_multiple_of(BENCH_SEGMENTS) || !(n / BENCH_SEGMENTS).is_multiple_of(2) {
        return Err(CliError::Config(format!(
            "GRST bench needs steps divisible by {}, got {n}",
            2 * BENCH_SEGMENTS
        )));
    }
    let entries = (1..=BENCH_SEGMENTS)
        .map(|i| {
            let t = BENCH_T * i as f64 / BENCH_SEGMENTS as f64;
            GaussianSpec::new(t, BENCH_S0, BENCH_SIGMA_ABS * t.sqrt())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tree = build_grst_n(
        &MarginalSchedule::new(entries)?,
        BENCH_S0,
        n / BENCH_SEGMENTS + 1,
    )?;
    let call = OptionContract::european(OptionKind::Call, BENCH_STRIKE, BENCH_T)?;
    Ok(price_tree(&tree, &call, 0.0)?.price)
}

pub fn bench_report(steps: &[usize], drift: TrigeorgisDrift) -> Result<String, CliError> {
    let call = OptionContract::european(OptionKind::Call, BENCH_STRIKE, BENCH_T)?;
    let bs = black_scholes(
        BENCH_S0,
        BENCH_STRIKE,
        BENCH_RATE,
        BENCH_SIGMA,
        BENCH_T,
        OptionKind::Call,
    )?;
    let bach = bachelier(
        BENCH_S0,
        BENCH_STRIKE,
        0.0,
        BENCH_SIGMA_ABS,
        BENCH_T,
        OptionKind::Call,
    )?;
    let params = |name: &str, dt: f64| match name {
        "crr" => crr_params(BENCH_SIGMA, BENCH_RATE, dt),
        "tian" => tian_params(BENCH_SIGMA, BENCH_RATE, dt),
        "jr" => jr_params(BENCH_SIGMA, BENCH_RATE, dt),
        _ => trigeorgis_params_with(BENCH_SIGMA, BENCH_RATE, dt, drift),
    };

    let mut csv = String::from("model,n,price,reference,abs_error\n");
    for &n in steps {
        let dt = BENCH_T / n as f64;
        for name in ["crr", "tian", "jr", "trigeorgis"] {
            let p = params(name, dt)?;
            let price = price_multiplicative(&p, n, BENCH_S0, &call, BENCH_RATE)?.price;
            writeln!(csv, "{name},{n},{price},{bs},{}", (price - bs).abs()).expect("string write");
        }
        let price = grst_bench_price(n)?;
        writeln!(csv, "grst,{n},{price},{bach},{}", (price - bach).abs()).expect("string write");
    }
    Ok(csv)
}

pub fn bench(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let steps = cfg
        .usize_list("bench.steps")?
        .unwrap_or_else(|| vec![64, 128, 256, 512, 1024]);
    let drift = match cfg.str_or("bench.trigeorgis", "printed")?.as_str() {
        "printed" => TrigeorgisDrift::AsPrinted,
        "standard" => TrigeorgisDrift::Standard,
        other => {
            return Err(CliError::Config(format!(
                "bench.trigeorgis must be printed or standard, got '{other}'"
            )))
        }
    };
    let csv = bench_report(&steps, drift)?;
    let out = out_path(cfg, out, "bench.csv")?;
    write_text(&out, &csv)?;
    println!(
        "wrote {} rows -> {}",
        csv.lines().count() - 1,
        out.display()
    );
    Ok(())
}
