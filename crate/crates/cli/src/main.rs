//! `stochot`: run experiments, fit and score transport kernels from the
//! command line.
//!
//! Exit codes: 0 on success, 2 for bad arguments, configs or input files,
//! 3 when a numerical routine fails.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochot_core::corruption::{corrupt, AdversaryStrategy, CorruptionBudget};
use stochot_core::error_metric::ErrorEvaluator;
use stochot_core::estimators::{fit, EstimatorConfig, EstimatorKind, FittedEstimator};
use stochot_core::experiments::{
    build_instance, emit_csv, emit_svg_plot, read_rows_csv, run_experiment, summarize, summary_to_csv,
    BootstrapConfig, ExperimentConfig, PlotSpec, Setting,
};
use stochot_core::io::{read_json, read_measure, write_json, write_measure};
use stochot_core::kernels::{KernelPipeline, MonteCarloConfig};
use stochot_core::measures::DiscreteMeasure;
use stochot_core::ot::{exact_ot, sinkhorn};
use stochot_core::rng::stream;
use stochot_core::Error;

#[derive(Parser)]
#[command(name = "stochot", version, about = "Stochastic optimal-transport map estimation")]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML or JSON config.
    Run(RunArgs),
    /// Score a kernel on (μ, ν) and print the E_p report as JSON.
    Eval(EvalArgs),
    /// Solve the transport problem between two measures.
    Solve(SolveArgs),
    /// Corrupt a sample under a TV/W_p budget.
    Corrupt(CorruptArgs),
    /// Plot a results CSV as an SVG of error curves.
    Plot(PlotArgs),
    /// Generate the measures of a synthetic setting.
    Gen(GenArgs),
    /// Fit an estimator on two samples and save the kernel.
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; the summary goes next to it as `<stem>_summary.csv`.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Also write an SVG plot of E_p.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    /// Kernel pipeline JSON, or the output of `fit`.
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Monte-Carlo draws for kernels with continuous stages.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Solve the entropic problem with this regularization instead.
    #[arg(long)]
    tau: Option<f64>,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// relocate, shift or composite.
    #[arg(long, default_value = "composite")]
    adversary: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Metrics to draw; repeat the flag for several.
    #[arg(long, default_values_t = vec!["ep".to_string()])]
    metric: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// a, b, checkerboard or stripes.
    #[arg(long)]
    setting: String,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long = "N", default_value_t = 2000)]
    n_atoms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// entropic, rounding-cubic, rounding-shell, nn, cdf1d, robust-conv or null.
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    xs: PathBuf,
    #[arg(long)]
    ys: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    output: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::SupportCap { .. } => 3,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("STOCHOT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("STOCHOT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a reader that stops early (`| head`) is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    log::info!("resolved config: {}", serde_json::to_string(&cfg)?);
    let out = run_experiment(&cfg)?;
    for (k, v) in &out.metadata {
        log::info!("{k} = {v}");
    }
    emit_csv(&out.rows, &out.metadata, &args.out)?;
    let summary = summarize(&out.rows, &cfg.bootstrap, cfg.master_seed)?;
    std::fs::write(summary_path(&args.out), summary_to_csv(&summary, &cfg.bootstrap.quantiles))?;
    if let Some(svg) = &args.svg {
        let mut spec = PlotSpec::new("ep");
        spec.title = format!("setting {}: E_p vs n", cfg.setting);
        emit_svg_plot(&summary, &spec, svg)?;
    }
    eprintln!("wrote {} rows to {}", out.rows.len(), args.out.display());
    Ok(())
}

fn load_kernel(path: &Path) -> Result<KernelPipeline, Error> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("pipeline").is_some() {
        let fitted: FittedEstimator = serde_json::from_value(value)?;
        Ok(fitted.pipeline)
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    let mu = read_measure(&args.mu)?;
    let nu = read_measure(&args.nu)?;
    let kernel = load_kernel(&args.kernel)?;
    let mc = MonteCarloConfig {
        samples: args.samples,
        seed: args.seed,
        ..MonteCarloConfig::default()
    };
    let report = ErrorEvaluator::new(mu, nu, args.p)?.evaluate(&kernel, &mc)?;
    print_json(&report)
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let mu = read_measure(&args.mu)?;
    let nu = read_measure(&args.nu)?;
    let plan = match args.tau {
        None => exact_ot(&mu, &nu, args.p)?,
        Some(tau) => {
            let sol = sinkhorn(&mu, &nu, args.p, tau, 1e-9, 100_000)?;
            if !sol.converged {
                log::warn!("Sinkhorn stopped after {} iterations without converging", sol.iterations);
            }
            sol.plan
        }
    };
    match &args.out {
        Some(path) => write_json(path, &plan.record()),
        None => print_json(&plan.record()),
    }
}

fn corrupt_cmd(args: CorruptArgs) -> Result<(), Error> {
    let clean = read_measure(&args.input)?;
    let budget = CorruptionBudget::new(args.eps, args.rho, args.p)?;
    let strategy: AdversaryStrategy = args.adversary.parse()?;
    let samples = corrupt(clean.points(), &budget, &strategy, &mut stream(args.seed, &[]))?;
    write_measure(&args.output, &DiscreteMeasure::uniform(samples)?)
}

fn plot(args: PlotArgs) -> Result<(), Error> {
    let (_, rows) = read_rows_csv(&args.input)?;
    let boot = BootstrapConfig {
        resamples: args.bootstrap,
        ..BootstrapConfig::default()
    };
    let summary = summarize(&rows, &boot, args.seed)?;
    let spec = PlotSpec {
        title: args.title.unwrap_or_else(|| format!("{} vs n", args.metric.join(", "))),
        metrics: args.metric,
    };
    emit_svg_plot(&summary, &spec, &args.output)
}

fn gen(args: GenArgs) -> Result<(), Error> {
    let setting: Setting = args.setting.parse()?;
    if setting == Setting::Custom {
        return Err(Error::InvalidParameter("custom measures are read from files, not generated".into()));
    }
    let cfg = ExperimentConfig {
        setting,
        d: vec![args.d],
        n_atoms: args.n_atoms,
        p: args.p,
        master_seed: args.seed,
        grid_points: args.n_atoms,
        ..ExperimentConfig::default()
    };
    let inst = build_instance(&cfg, args.d)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_measure(&args.out_dir.join("mu.csv"), &inst.mu)?;
    write_measure(&args.out_dir.join("nu.csv"), &inst.nu)?;
    if let Some(t) = &inst.t_star {
        write_json(&args.out_dir.join("t_star.json"), t)?;
    }
    if let Some(k) = &inst.kappa_star {
        write_json(&args.out_dir.join("kappa_star.json"), k)?;
    }
    Ok(())
}

fn fit_cmd(args: FitArgs) -> Result<(), Error> {
    let kind: EstimatorKind = args.estimator.parse()?;
    let mut cfg = EstimatorConfig::with_p(args.p);
    for pair in &args.params {
        cfg.set_pair(pair)?;
    }
    let xs = read_measure(&args.xs)?;
    let ys = read_measure(&args.ys)?;
    if !xs.is_uniform() || !ys.is_uniform() {
        log::warn!("estimators treat the input files as unweighted samples; weights are ignored");
    }
    let fitted = fit(kind, xs.points(), ys.points(), &cfg)?;
    for (k, v) in &fitted.params {
        log::info!("{} {k} = {v}", fitted.name);
    }
    write_json(&args.output, &fitted)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version and 2 for usage errors
            e.exit();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = configure_threads().and_then(|_| match cli.command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Solve(a) => solve(a),
        Command::Corrupt(a) => corrupt_cmd(a),
        Command::Plot(a) => plot(a),
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit_cmd(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
