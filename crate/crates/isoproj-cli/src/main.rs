//! Command-line interface: `fit`, `test`, `simulate`, and `rates`.
//!
//! Every subcommand takes an explicit seed and writes deterministic JSON/CSV
//! (timings go to stderr). A flat `key = value` config file can prefill any
//! flag; command-line flags override it. `ISOPROJ_THREADS` bounds the rayon
//! worker pool without changing results.

mod config;
mod output;
mod parse;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use isoproj::{
    calibrate_m0, draw_projection_posterior, load_dataset, run_power_study, run_rate_study,
    separation_curve, summarize, test_adaptive, test_fixedj, DesignSpec, ErrorDist, PriorSpec,
    PriorType, ProjectionMetric, SimConfig, TestConfig, TestMode,
};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(
    name = "isoproj",
    version,
    about = "Bayesian monotone regression via the projection-posterior",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fit the projection-posterior to a CSV dataset (x,y per row)
    Fit(FitArgs),
    /// Test monotonicity of the regression function
    Test(TestArgs),
    /// Monte Carlo size/power study of the monotonicity test
    Simulate(SimArgs),
    /// Posterior contraction rate study with a fitted log-log slope
    Rates(RatesArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Config file with `key = value` lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file with one x,y pair per row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of bins: "auto" (= ceil(n^{1/3})) or an integer
    #[arg(long, default_value = "auto")]
    j: String,
    /// Prior family: type1 (equispaced), type2 (design knots), type3 (random J)
    #[arg(long, default_value = "type1")]
    prior: String,
    /// Sigma handling: "plugin", "fixed:<v>", or "ig:<b1>,<b2>"
    #[arg(long, default_value = "plugin")]
    sigma: String,
    /// Projection metric: l2 or l1
    #[arg(long, default_value = "l2")]
    metric: String,
    /// Posterior draws
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Credible level of the pointwise band
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Evaluation grid size for the summary curves
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
    /// Write the report JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the summary curves as CSV (x,mean,median,lo,hi)
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file with one x,y pair per row (omit with --calibrate-m0)
    #[arg(long)]
    data: Option<PathBuf>,
    /// fixedj (L1 distance, fixed bins) or adaptive (Hellinger, random J)
    #[arg(long, default_value = "fixedj")]
    mode: String,
    /// Reject when the near-cone posterior mass falls below gamma
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Fixed-J slack constant M_n (default: log log n)
    #[arg(long)]
    m_n: Option<f64>,
    /// Adaptive-test constant M0
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    /// Override the fixed-J bin count
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points of the bounded sigma posterior (adaptive mode)
    #[arg(long, default_value_t = 25)]
    sigma_grid: usize,
    /// Calibrate M0 on null simulations instead of testing a dataset
    #[arg(long, default_value_t = false)]
    calibrate_m0: bool,
    /// Null truth for calibration (see --help of simulate for names)
    #[arg(long, default_value = "constant:0")]
    truth: String,
    /// Noise level for calibration data
    #[arg(long, default_value_t = 0.5)]
    sigma0: f64,
    /// Sample size for calibration data
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Calibration replications
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Truth: linear, square, step, constant:<c>, neglinear, nonsmooth,
    /// or sine:<amplitude>,<cycles>
    #[arg(long, default_value = "linear")]
    truth: String,
    #[arg(long, default_value_t = 0.5)]
    sigma0: f64,
    /// Comma-separated sample sizes
    #[arg(long, default_value = "500,1000,2000,4000")]
    n_grid: String,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value = "fixedj")]
    mode: String,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Power-vs-separation curve at these separations (comma-separated)
    /// instead of a fixed-truth study
    #[arg(long)]
    separations: Option<String>,
    /// Sample size for the separation curve
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monotone truth (same names as simulate)
    #[arg(long, default_value = "linear")]
    truth: String,
    #[arg(long, default_value_t = 0.5)]
    sigma0: f64,
    #[arg(long, default_value = "500,1000,2000,4000,8000")]
    n_grid: String,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Posterior draws per replication
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// type1 or type2
    #[arg(long, default_value = "type1")]
    prior: String,
    /// Error metric: l1emp, l1design, or lp:<p>
    #[arg(long, default_value = "l1emp")]
    metric: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-ready CSV (n,median_error,iqr,median_draw_error)
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    if let Ok(threads) = std::env::var("ISOPROJ_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: ISOPROJ_THREADS must be a positive integer");
                return 1;
            }
        }
    }

    let argv = match config::argv_with_config(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let usage_ok =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok { 0 } else { 1 };
        }
    };

    let started = Instant::now();
    let result = match cli.cmd {
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Test(a) => cmd_test(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Rates(a) => cmd_rates(a),
    };
    match result {
        Ok(()) => {
            eprintln!("completed in {:.2}s", started.elapsed().as_secs_f64());
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

/// 2 for data problems (missing/malformed input), 1 otherwise.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(e) = err.downcast_ref::<isoproj::Error>() {
        match e {
            isoproj::Error::Io { .. }
            | isoproj::Error::MalformedRow { .. }
            | isoproj::Error::EmptyDataset
            | isoproj::Error::PredictorOutOfRange { .. } => 2,
            _ => 1,
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        2
    } else {
        1
    }
}

fn require_data(data: &Option<PathBuf>) -> anyhow::Result<&PathBuf> {
    data.as_ref().ok_or_else(|| anyhow!("--data is required"))
}

fn cmd_fit(a: FitArgs) -> anyhow::Result<()> {
    let path = require_data(&a.data)?;
    let data = load_dataset(path)?;
    let n = data.n();
    let mut prior = parse::prior_family(&a.prior, n)?;
    if a.j != "auto" {
        let j: usize = a
            .j
            .parse()
            .map_err(|_| anyhow!("--j must be \"auto\" or a positive integer"))?;
        prior.prior_type = match prior.prior_type {
            PriorType::Type1 { .. } => PriorType::Type1 { j_bins: j },
            PriorType::Type2 { .. } => PriorType::Type2 { j_bins: j },
            PriorType::Type3 { .. } => {
                return Err(anyhow!("--j is fixed-J only; type3 draws J from its posterior"))
            }
        };
    }
    prior.sigma_mode = parse::sigma_mode(&a.sigma)?;
    let metric = match a.metric.as_str() {
        "l2" => ProjectionMetric::L2,
        "l1" => ProjectionMetric::L1,
        other => return Err(anyhow!("unknown projection metric {other:?}")),
    };

    let samples = draw_projection_posterior(&data, &prior, a.samples, metric, a.seed)?;
    let summary = summarize(&samples, a.grid_size, a.level, None)?;

    if let Some(curve_path) = &a.curve {
        let mut csv = String::from("x,mean,median,lo,hi\n");
        for (k, &x) in summary.grid.iter().enumerate() {
            csv.push_str(&format!(
                "{x},{},{},{},{}\n",
                summary.mean_curve[k],
                summary.median_curve[k],
                summary.lower_band[k],
                summary.upper_band[k]
            ));
        }
        std::fs::write(curve_path, csv)
            .with_context(|| format!("writing {}", curve_path.display()))?;
    }

    let report = json!({
        "schema": 1,
        "command": "fit",
        "n": n,
        "prior": a.prior,
        "j": a.j,
        "sigma": a.sigma,
        "metric": a.metric,
        "samples": a.samples,
        "seed": a.seed,
        "summary": summary,
    });
    output::emit_json(&report, a.out.as_deref())
}

fn cmd_test(a: TestArgs) -> anyhow::Result<()> {
    let mode = parse::test_mode(&a.mode)?;
    let cfg = TestConfig {
        mode,
        gamma: a.gamma,
        m_n: a.m_n,
        m0: a.m0,
        sample_count: a.samples,
        measure: isoproj::DesignMeasure::Uniform,
        sigma_grid_points: a.sigma_grid,
    };

    if a.calibrate_m0 {
        if mode != TestMode::AdaptiveHellinger {
            return Err(anyhow!("--calibrate-m0 applies to the adaptive test"));
        }
        let sim_cfg = SimConfig {
            truth: parse::truth(&a.truth)?,
            error_dist: ErrorDist::Normal { sigma0: a.sigma0 },
            design: DesignSpec::FixedGrid,
            n_grid: vec![a.n],
            reps: a.reps,
            seed: a.seed,
            k_bound: None,
        };
        let m0 = calibrate_m0(&sim_cfg, &cfg)?;
        let report = json!({
            "schema": 1,
            "command": "test",
            "calibrated_m0": m0,
            "truth": a.truth,
            "n": a.n,
            "reps": a.reps,
            "sigma0": a.sigma0,
            "gamma": a.gamma,
            "seed": a.seed,
        });
        return output::emit_json(&report, a.out.as_deref());
    }

    let path = require_data(&a.data)?;
    let data = load_dataset(path)?;
    let n = data.n();
    let result = match mode {
        TestMode::FixedJL1 => {
            let mut prior = PriorSpec::type1_default(n);
            if let Some(j) = a.j {
                prior.prior_type = PriorType::Type1 { j_bins: j };
            }
            test_fixedj(&data, &prior, &cfg, a.seed)?
        }
        TestMode::AdaptiveHellinger => {
            if a.j.is_some() {
                return Err(anyhow!("--j is fixed-J only; the adaptive test draws J"));
            }
            test_adaptive(&data, &PriorSpec::type3_default(n), &cfg, a.seed)?
        }
    };
    let report = json!({
        "schema": 1,
        "command": "test",
        "n": n,
        "mode": a.mode,
        "gamma": a.gamma,
        "samples": a.samples,
        "seed": a.seed,
        "result": result,
    });
    output::emit_json(&report, a.out.as_deref())
}

fn cmd_simulate(a: SimArgs) -> anyhow::Result<()> {
    let mode = parse::test_mode(&a.mode)?;
    let cfg = TestConfig {
        mode,
        gamma: a.gamma,
        m_n: None,
        m0: a.m0,
        sample_count: a.samples,
        measure: isoproj::DesignMeasure::Uniform,
        sigma_grid_points: if mode == TestMode::AdaptiveHellinger { 25 } else { 0 },
    };
    let sim_cfg = SimConfig {
        truth: parse::truth(&a.truth)?,
        error_dist: ErrorDist::Normal { sigma0: a.sigma0 },
        design: DesignSpec::FixedGrid,
        n_grid: parse::n_grid(&a.n_grid)?,
        reps: a.reps,
        seed: a.seed,
        k_bound: None,
    };

    if let Some(seps) = &a.separations {
        let seps = parse::f64_list(seps)?;
        let points = separation_curve(&sim_cfg, a.n, &seps, &cfg)?;
        if let Some(csv_path) = &a.csv {
            let mut csv = String::from("separation,power,mc_se\n");
            for p in &points {
                csv.push_str(&format!("{},{},{}\n", p.separation, p.power, p.mc_se));
            }
            std::fs::write(csv_path, csv)
                .with_context(|| format!("writing {}", csv_path.display()))?;
        }
        let report = json!({
            "schema": 1,
            "command": "simulate",
            "mode": a.mode,
            "n": a.n,
            "reps": a.reps,
            "sigma0": a.sigma0,
            "seed": a.seed,
            "separation_curve": points,
        });
        return output::emit_json(&report, a.out.as_deref());
    }

    let cells = run_power_study(&sim_cfg, &cfg)?;
    if let Some(csv_path) = &a.csv {
        let mut csv = String::from("setting,n,rejection_rate,mc_se\n");
        for c in &cells {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                output::csv_field(&c.setting),
                c.n,
                c.rejection_rate,
                c.mc_se
            ));
        }
        std::fs::write(csv_path, csv)
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    let report = json!({
        "schema": 1,
        "command": "simulate",
        "truth": a.truth,
        "mode": a.mode,
        "reps": a.reps,
        "sigma0": a.sigma0,
        "seed": a.seed,
        "cells": cells,
    });
    output::emit_json(&report, a.out.as_deref())
}

fn cmd_rates(a: RatesArgs) -> anyhow::Result<()> {
    let sim_cfg = SimConfig {
        truth: parse::truth(&a.truth)?,
        error_dist: ErrorDist::Normal { sigma0: a.sigma0 },
        design: DesignSpec::FixedGrid,
        n_grid: parse::n_grid(&a.n_grid)?,
        reps: a.reps,
        seed: a.seed,
        k_bound: None,
    };
    let family = parse::rate_prior(&a.prior)?;
    let metric = parse::rate_metric(&a.metric)?;
    let report = run_rate_study(&sim_cfg, family, metric, a.draws)?;

    if let Some(csv_path) = &a.csv {
        let mut csv = String::from("n,median_error,iqr,median_draw_error\n");
        for c in &report.cells {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                c.n, c.median_error, c.iqr, c.median_draw_error
            ));
        }
        std::fs::write(csv_path, csv)
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    for c in &report.cells {
        eprintln!("n={}: {:.1}ms", c.n, c.runtime_ms);
    }
    let out = json!({
        "schema": 1,
        "command": "rates",
        "truth": a.truth,
        "prior": a.prior,
        "metric": a.metric,
        "reps": a.reps,
        "draws": a.draws,
        "sigma0": a.sigma0,
        "seed": a.seed,
        "report": report,
    });
    output::emit_json(&out, a.out.as_deref())
}
