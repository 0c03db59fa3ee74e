//! The `sep-ergo` command line.
//!
//! Exit codes: 0 success, 1 a validation check failed, 2 configuration
//! error, 3 resource cap exceeded.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{Charge, Config};
use crate::dynamics::{gillespie_with, trajectory::TrajectoryHeader, trajectory::TrajectoryWriter, Process, ProcessState};
use crate::ensembles::MeasureSpec;
use crate::error::{invalid, Error, Result};
use crate::lattice::TorusLattice;
use crate::metrics::{
    dbar_bound_series, duality_check, fit_decay_exponent, oracle_compare, pinned_initial, theoretical_exponent,
    variance_bound_check, with_workers, DualityMode, Engine, EstimateSeries,
};
use crate::oracle::{
    box_points, build_generator, cross_channel_check, lemma21_check, liggett_check, liggett_subset_check,
    superadditivity_defect, GeneratorRates, OracleReport,
};
use crate::rng::{replica_rng, Purpose};

pub use config::{ExperimentConfig, Side, TimeGrid, CSV_CONFIG_PREFIX};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_OUT: &str = "sep-ergo-out";

#[derive(Debug, Parser)]
#[command(name = "sep-ergo", version, about = "Exclusion-process decay experiments and exact checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the d-bar upper bound on a time grid and fit its decay exponent.
    Decay(Common),
    /// Run the pinned oracle and property suite.
    Validate(Common),
    /// Simulate one process and write a binary trajectory.
    Simulate(Common),
    /// Compare simulated state laws with exact transient laws on a tiny torus.
    OracleCompare(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config, or an earlier output to rerun.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N", env = "SEP_ERGO_WORKERS")]
    workers: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, Option<usize>, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        let workers = self.workers.or(cfg.workers);
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((cfg, workers, out))
    }
}

/// Map a library error to an exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResourceLimit(_) => EXIT_RESOURCE,
        Error::Invariant(_) => EXIT_CHECK_FAILED,
        Error::InvalidArgument(_) | Error::OutOfRange(_) | Error::Parse(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Decay(c) => c.resolve().and_then(|(cfg, w, out)| cmd_decay(cfg, w, &out)),
        Command::Validate(c) => c.resolve().and_then(|(cfg, w, out)| cmd_validate(cfg, w, &out)),
        Command::Simulate(c) => c.resolve().and_then(|(cfg, w, out)| cmd_simulate(cfg, w, &out)),
        Command::OracleCompare(c) => c.resolve().and_then(|(cfg, w, out)| cmd_oracle_compare(cfg, w, &out)),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("sep-ergo: {e}");
            exit_code(&e)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

/// Slope band reported as the decay check for dimension `d`.
pub fn decay_band(d: usize) -> Result<(f64, f64)> {
    let g = theoretical_exponent(d)?;
    Ok(match d {
        1 => (-0.35, -0.15),
        _ => (-g - 0.15, -g + 0.15),
    })
}

/// `estimate · t^γ / √A` as its own series, error bars scaled alike.
fn ratio_series(series: &EstimateSeries) -> EstimateSeries {
    let mut r = series.clone();
    for i in 0..r.len() {
        let scale = if series.estimate[i] > 0.0 {
            series.ratio_to_envelope[i] / series.estimate[i]
        } else {
            0.0
        };
        r.estimate[i] = series.ratio_to_envelope[i];
        r.stderr[i] = series.stderr[i] * scale;
    }
    r
}

/// Resolve the decay config fully so that it can be embedded and rerun.
pub fn resolve_decay(cfg: &ExperimentConfig) -> Result<(ExperimentConfig, TorusLattice)> {
    let diff = cfg.diff_law()?;
    let times = cfg.times_or(&[])?;
    let horizon = *times.last().expect("nonempty grid");
    let (lattice, _) = cfg.lattice(horizon, None)?;
    let replicas = cfg.replicas.ok_or_else(|| invalid!("config is missing `replicas`"))?;
    if replicas < 2 {
        return Err(invalid!("need at least 2 replicas, got {replicas}"));
    }
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let window = cfg
        .fit_window
        .unwrap_or([positive.first().copied().unwrap_or(0.0), horizon]);
    let resolved = ExperimentConfig {
        dimension: Some(lattice.dim()),
        side: Some(Side::Fixed(lattice.side())),
        epsilon: cfg.epsilon,
        measure: Some(diff.mu().clone()),
        rho: Some(diff.rho()),
        times: Some(TimeGrid::List(times)),
        replicas: Some(replicas),
        seed: Some(cfg.seed.unwrap_or(DEFAULT_SEED)),
        engine: Some(cfg.engine.unwrap_or(Engine::Stirring)),
        fit_window: Some(window),
        process: None,
        annihilation_rate: None,
        workers: None,
        out: None,
    };
    if cfg.process.is_some() || cfg.annihilation_rate.is_some() {
        return Err(invalid!("`process` and `annihilation_rate` do not apply to decay"));
    }
    Ok((resolved, lattice))
}

fn cmd_decay(cfg: ExperimentConfig, workers: Option<usize>, out: &Path) -> Result<bool> {
    let (resolved, lattice) = resolve_decay(&cfg)?;
    let diff = resolved.diff_law()?;
    let times = resolved.times_or(&[])?;
    let seed = resolved.seed.expect("resolved");
    let engine = resolved.engine.expect("resolved");
    let replicas = resolved.replicas.expect("resolved");
    let series = with_workers(workers, || dbar_bound_series(&diff, &lattice, &times, replicas, seed, engine))??;
    let [lo, hi] = resolved.fit_window.expect("resolved");
    let band = decay_band(lattice.dim())?;
    let fit = fit_decay_exponent(&series, (lo, hi));
    let ratio_fit = fit_decay_exponent(&ratio_series(&series), (lo, hi));

    fs::create_dir_all(out)?;
    let config_json = resolved.to_json();
    let mut csv = format!("{CSV_CONFIG_PREFIX}{config_json}\n");
    for row in series.csv_rows() {
        csv.push_str(&row);
        csv.push('\n');
    }
    fs::write(out.join("decay.csv"), csv)?;

    let fit_json = match &fit {
        Ok(f) => json!({
            "slope": f.slope,
            "half_width": f.half_width,
            "intercept": f.intercept,
            "points": f.points,
            "dropped": f.dropped,
            "method": f.method,
            "window": [lo, hi],
            "band": [band.0, band.1],
            "pass": f.slope >= band.0 && f.slope <= band.1,
        }),
        Err(e) => json!({ "error": e.to_string(), "pass": false }),
    };
    let ratio_json = match &ratio_fit {
        Ok(f) => json!({ "slope": f.slope, "half_width": f.half_width, "pass": f.slope.abs() <= 0.1 }),
        Err(e) => json!({ "error": e.to_string(), "pass": false }),
    };
    let report = json!({
        "command": "decay",
        "config": serde_json::from_str::<serde_json::Value>(&config_json).expect("valid json"),
        "config_hash": resolved.hash(),
        "seed": seed,
        "lattice": to_value(&lattice),
        "engine": engine,
        "gamma": theoretical_exponent(lattice.dim())?,
        "series": to_value(&series),
        "fit": fit_json,
        "ratio_fit": ratio_json,
    });
    write_json(&out.join("decay.json"), &report)?;
    match &fit {
        Ok(f) => println!(
            "decay: slope {:.4} ± {:.4} (band [{}, {}]) over {} points on {}^{}",
            f.slope,
            f.half_width,
            band.0,
            band.1,
            f.points,
            lattice.side(),
            lattice.dim()
        ),
        Err(e) => println!("decay: no fit ({e})"),
    }
    Ok(true)
}

/// The validate suite, one report per check instance.
pub fn validation_suite(cfg: &ExperimentConfig) -> Result<Vec<OracleReport>> {
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let (small, _) = cfg.lattice(1.0, Some(3))?;
    let rates = GeneratorRates {
        annihilation: cfg.annihilation_rate.unwrap_or(2.0),
    };
    let mut reports = Vec::new();

    for p in Process::ALL {
        let q = build_generator(p, &small)?;
        reports.push(OracleReport::upper(
            &format!("generator_row_sums_{}", p.name()),
            Some(small),
            0.0,
            q.max_row_sum(),
            1e-12,
        ));
    }
    reports.extend(lemma21_check(&small, &[0.1, 1.0, 5.0], rates, 1e-9)?);

    let ring5 = TorusLattice::new(1, 5)?;
    let square3 = TorusLattice::new(2, 3)?;
    for lat in [ring5, square3] {
        for t in [0.5, 1.0, 2.0] {
            let r = liggett_check(&lat, &[t])?;
            reports.push(OracleReport::upper("liggett_pointwise", Some(lat), t, r.max_violation, 1e-10));
            let r = liggett_subset_check(&lat, &[t])?;
            reports.push(OracleReport::upper("liggett_set_form", Some(lat), t, r.max_violation, 1e-10));
            let c = cross_channel_check(&lat, &[t])?;
            reports.push(OracleReport::upper("cross_channel_factorization", Some(lat), t, c, 1e-10));
        }
    }

    let ring4 = TorusLattice::new(1, 4)?;
    for (name, mu) in [
        ("bernoulli", MeasureSpec::bernoulli(0.3)),
        ("markov", MeasureSpec::markov(0.3, 0.45)),
    ] {
        for t in [0.5, 2.0] {
            let r = duality_check(&mu, &ring4, (0, 1), t, DualityMode::Oracle)?;
            reports.push(OracleReport::upper(
                &format!("self_duality_{name}"),
                Some(ring4),
                t,
                r.discrepancy,
                r.tolerance,
            ));
        }
    }

    let nested = vec![
        (box_points(&[1]), box_points(&[2])),
        (box_points(&[2]), box_points(&[4])),
        (box_points(&[3]), box_points(&[6])),
        (box_points(&[2]), box_points(&[5])),
    ];
    let pairs = [
        (MeasureSpec::markov(0.3, 0.45), MeasureSpec::bernoulli(0.4)),
        (MeasureSpec::block_xor(0.2, 1), MeasureSpec::bernoulli(0.32)),
    ];
    for (mu, nu) in &pairs {
        let d = superadditivity_defect(mu, nu, &nested)?;
        reports.push(OracleReport::upper("superadditivity", None, 0.0, d, 1e-12));
    }

    let diff = crate::DiffLawSpec::matched(MeasureSpec::bernoulli(0.5))?;
    let times = [1.0, 4.0, 16.0];
    let lat = TorusLattice::new(1, TorusLattice::light_cone_side(16.0, 1e-6)?)?;
    let region = lat.box_sites(16)?;
    for r in variance_bound_check(&diff, &lat, &region, &times, 10_000, seed)? {
        let rel = if r.estimate > 0.0 { r.stderr / r.estimate } else { 0.0 };
        reports.push(OracleReport {
            check: "lemma_3_3_second_moment".into(),
            lattice: Some(lat),
            t: r.t,
            statistic: r.estimate - r.bound * (1.0 + 4.0 * rel),
            tolerance: 0.0,
            pass: r.pass,
        });
    }
    Ok(reports)
}

fn cmd_validate(cfg: ExperimentConfig, workers: Option<usize>, out: &Path) -> Result<bool> {
    let reports = with_workers(workers, || validation_suite(&cfg))??;
    let failures: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} (t={}, statistic={:e}, tolerance={:e})", r.check, r.t, r.statistic, r.tolerance))
        .collect();
    fs::create_dir_all(out)?;
    write_json(
        &out.join("validate.json"),
        &json!({
            "command": "validate",
            "config": to_value(&cfg),
            "config_hash": cfg.hash(),
            "checks": to_value(&reports),
            "failures": failures,
        }),
    )?;
    println!("validate: {}/{} checks passed", reports.len() - failures.len(), reports.len());
    for f in &failures {
        eprintln!("FAILED {f}");
    }
    Ok(failures.is_empty())
}

fn initial_state(process: Process, cfg: &ExperimentConfig, lattice: &TorusLattice, seed: u64, replica: u64) -> Result<ProcessState> {
    let diff = cfg.diff_law()?;
    let mut init_rng = replica_rng(seed, replica, Purpose::Initial);
    let mut ref_rng = replica_rng(seed, replica, Purpose::Reference);
    Ok(match process {
        Process::Sep => ProcessState::Sep(diff.mu().sample_with(lattice, &mut init_rng)?),
        Process::Coupled => ProcessState::Coupled {
            eta: diff.mu().sample_with(lattice, &mut init_rng)?,
            zeta: MeasureSpec::bernoulli(diff.rho()).sample_with(lattice, &mut ref_rng)?,
        },
        Process::Annihilation => ProcessState::Annihilation(diff.sample_with(lattice, &mut init_rng, &mut ref_rng)?),
        Process::Free => {
            let xi: Config<Charge> = diff.sample_with(lattice, &mut init_rng, &mut ref_rng)?;
            ProcessState::Free(xi.to_two_species())
        }
    })
}

fn cmd_simulate(cfg: ExperimentConfig, workers: Option<usize>, out: &Path) -> Result<bool> {
    let process = cfg.process.ok_or_else(|| invalid!("config is missing `process`"))?;
    let diff = cfg.diff_law()?;
    let times = cfg.times_or(&[])?;
    let horizon = *times.last().expect("nonempty");
    let (lattice, _) = cfg.lattice(horizon, None)?;
    let replicas = cfg.replicas.unwrap_or(1);
    if replicas == 0 {
        return Err(invalid!("replicas must be at least 1"));
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let resolved = ExperimentConfig {
        dimension: Some(lattice.dim()),
        side: Some(Side::Fixed(lattice.side())),
        measure: Some(diff.mu().clone()),
        rho: Some(diff.rho()),
        times: Some(TimeGrid::List(times.clone())),
        replicas: Some(replicas),
        seed: Some(seed),
        process: Some(process),
        epsilon: cfg.epsilon,
        ..Default::default()
    };
    let runs = with_workers(workers, || {
        use rayon::prelude::*;
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let init = initial_state(process, &cfg, &lattice, seed, r)?;
                let mut rng = replica_rng(seed, r, Purpose::Dynamics);
                gillespie_with(process, &init, horizon, &times, &mut rng)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    fs::create_dir_all(out)?;
    let header = TrajectoryHeader {
        dimension: lattice.dim(),
        side: lattice.side(),
        process,
        config: serde_json::from_str(&resolved.to_json()).expect("valid json"),
    };
    let file = BufWriter::new(fs::File::create(out.join("trajectory.bin"))?);
    let mut w = TrajectoryWriter::new(file, &header)?;
    for (r, traj) in runs.iter().enumerate() {
        for (t, state) in &traj.snapshots {
            w.write_state(r as u32, *t, state)?;
        }
    }
    w.into_inner()?;
    println!(
        "simulate: {} replica(s) of {} on {}^{}, {} snapshots each",
        replicas,
        process.name(),
        lattice.side(),
        lattice.dim(),
        times.len()
    );
    Ok(true)
}

fn cmd_oracle_compare(cfg: ExperimentConfig, workers: Option<usize>, out: &Path) -> Result<bool> {
    let times = cfg.times_or(&[1.0])?;
    if times.len() != 1 {
        return Err(invalid!("oracle-compare takes a single time"));
    }
    let t = times[0];
    let (lattice, _) = cfg.lattice(t, Some(3))?;
    let replicas = cfg.replicas.unwrap_or(100_000);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let processes = match cfg.process {
        Some(p) => vec![p],
        None => Process::ALL.to_vec(),
    };
    let engines = match cfg.engine {
        Some(e) => vec![e],
        None => vec![Engine::Gillespie, Engine::Stirring],
    };
    let mut reports = Vec::new();
    for p in processes {
        let init = pinned_initial(p, &lattice)?;
        for &e in &engines {
            if e == Engine::Stirring && p == Process::Coupled {
                if cfg.engine.is_some() {
                    return Err(invalid!("the coupled process needs engine \"gillespie\""));
                }
                continue;
            }
            reports.push(with_workers(workers, || oracle_compare(&init, t, replicas, seed, e))??);
        }
    }
    fs::create_dir_all(out)?;
    let ok = reports.iter().all(|r| r.pass);
    write_json(
        &out.join("oracle_compare.json"),
        &json!({
            "command": "oracle-compare",
            "config": to_value(&cfg),
            "config_hash": cfg.hash(),
            "lattice": to_value(&lattice),
            "reports": to_value(&reports),
        }),
    )?;
    for r in &reports {
        println!(
            "{} {:<12} {:<9} max scaled error {:.3}",
            if r.pass { "PASS" } else { "FAIL" },
            r.process.name(),
            r.engine.name(),
            r.max_scaled_error
        );
    }
    Ok(ok)
}
