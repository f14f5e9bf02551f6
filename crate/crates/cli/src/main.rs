use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cascade_guard::cascade::{registry, AlgoParams};
use cascade_guard::data::{
    gen_adversarial, gen_imagenet_like, gen_synthetic, inject_noise, load_dataset, save_dataset,
    QueryKind, QuerySpec,
};
use cascade_guard::estimation::TestKind;
use cascade_guard::harness::{
    run_once, run_trials, sweep, validate_estimators, DatasetSpec, ExperimentConfig,
    ExperimentReport, SweepAxis, SweepSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const SEED_ENV: &str = "CASCADE_GUARD_SEED";

#[derive(Parser)]
#[command(
    name = "cascade-guard",
    version,
    about = "Cascade threshold selection with statistical guarantees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated or transformed dataset as CSV.
    Gen(GenArgs),
    /// Run one seeded selection and print the outcome as JSON.
    Run(ExperimentArgs),
    /// Run repeated trials and write a JSON report plus per-run CSV.
    Bench(ExperimentArgs),
    /// Run one benchmark per value of a parameter.
    Sweep(SweepArgs),
    /// Check estimator false-positive rates by Monte Carlo.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Synthetic,
    ImagenetLike,
    Adversarial,
    Noise,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    pos_frac: f64,
    #[arg(long, default_value_t = 50)]
    positives: usize,
    #[arg(long, default_value_t = 0.95)]
    min_score: f64,
    /// Input dataset for the adversarial and noise transforms.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    start_rank: usize,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (replaces the config's dataset).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    query: Option<QueryKind>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Method name, e.g. pt-a, at-aa, rt-u, or a short form like `a`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    estimator: Option<TestKind>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    axis: Option<SweepAxis>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    /// Effective config: file, then environment seed, then flags.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => {
                let dataset = self
                    .dataset
                    .clone()
                    .context("--dataset or --config is required")?;
                let kind = self.query.context("--query or --config is required")?;
                let target = self.target.context("--target or --config is required")?;
                let method = self
                    .method
                    .clone()
                    .context("--method or --config is required")?;
                let query = QuerySpec {
                    kind,
                    target,
                    delta: self.delta.unwrap_or(0.1),
                    budget: self.budget,
                };
                ExperimentConfig::new(DatasetSpec::File { path: dataset }, query, &method)
            }
        };
        if let Ok(raw) = std::env::var(SEED_ENV) {
            config.base_seed = raw
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer"))?;
        }
        if let Some(path) = &self.dataset {
            config.dataset = DatasetSpec::File { path: path.clone() };
        }
        if let Some(kind) = self.query {
            config.query.kind = kind;
        }
        if let Some(t) = self.target {
            config.query.target = t;
        }
        if let Some(d) = self.delta {
            config.query.delta = d;
        }
        if self.budget.is_some() {
            config.query.budget = self.budget;
        }
        if let Some(m) = &self.method {
            config.method = m.clone();
        }
        let p: &mut AlgoParams = &mut config.params;
        if let Some(v) = self.m {
            p.m = v;
        }
        if self.c.is_some() {
            p.c = self.c;
        }
        if let Some(v) = self.eta {
            p.eta = v;
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(v) = self.r {
            p.r = v;
        }
        if let Some(v) = self.estimator {
            p.estimator = v;
        }
        if let Some(v) = self.runs {
            config.runs = v;
        }
        if let Some(v) = self.seed {
            config.base_seed = v;
        }
        if self.out.is_some() {
            config.out = self.out.clone();
        }
        if self.jobs.is_some() {
            config.jobs = self.jobs;
        }
        config.validate()?;
        config.method = registry()
            .resolve(&config.method, config.query.kind)?
            .name()
            .to_string();
        Ok(config)
    }
}

fn jobs(config: &ExperimentConfig) -> usize {
    config
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn summary(report: &ExperimentReport) -> String {
    let a = &report.aggregates;
    let util = a
        .mean_utility
        .map_or("undefined".to_string(), |u| format!("{u:.4}"));
    let mut line = format!(
        "{} {}: runs={} mean_utility={util} met_fraction={:.3} mean_cost={:.1}",
        report.config.method,
        report.config.query.kind,
        report.runs.len(),
        a.met_fraction,
        a.mean_cost
    );
    if let Some(d) = a.met_fraction_dense {
        line.push_str(&format!(" met_fraction_dense={d:.3}"));
    }
    line
}

fn gen(args: &GenArgs) -> Result<()> {
    let input = || -> Result<_> {
        let path = args
            .input
            .as_ref()
            .context("--input is required for this kind")?;
        Ok(load_dataset(path)?)
    };
    let ds = match args.kind {
        GenKind::Synthetic => gen_synthetic(args.n, args.pos_frac, args.seed)?,
        GenKind::ImagenetLike => {
            gen_imagenet_like(args.n, args.positives, args.min_score, args.seed)?
        }
        GenKind::Adversarial => gen_adversarial(&input()?, args.start_rank, args.width)?,
        GenKind::Noise => inject_noise(&input()?, args.sigma, args.seed)?,
    };
    save_dataset(&ds, &args.out)?;
    println!(
        "wrote {} records ({} positives) to {}",
        ds.len(),
        ds.positives(),
        args.out.display()
    );
    Ok(())
}

fn run(args: &ExperimentArgs) -> Result<()> {
    let config = args.resolve()?;
    let ds = config.build_dataset()?;
    let (outcome, record) = run_once(&config, &ds, 0)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "config": config,
        "outcome": outcome,
        "evaluation": record,
    }))?;
    match &config.out {
        Some(path) => {
            std::fs::write(path, json + "\n")?;
            println!("wrote outcome to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn bench(args: &ExperimentArgs) -> Result<()> {
    let config = args.resolve()?;
    let ds = config.build_dataset()?;
    let report = run_trials(&config, &ds, jobs(&config))?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.json"));
    let csv = report.write(&out)?;
    println!("{}", summary(&report));
    println!("wrote {} and {}", out.display(), csv.display());
    Ok(())
}

fn value_label(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let config = args.experiment.resolve()?;
    let spec = match (args.axis, &args.values, &config.sweep) {
        (Some(axis), Some(values), _) => SweepSpec {
            axis,
            values: values.clone(),
        },
        (None, None, Some(spec)) => spec.clone(),
        (Some(axis), None, Some(spec)) => SweepSpec {
            axis,
            values: spec.values.clone(),
        },
        (None, Some(values), Some(spec)) => SweepSpec {
            axis: spec.axis,
            values: values.clone(),
        },
        _ => bail!("sweep needs --axis and --values or a sweep block in the config"),
    };
    let ds = config.build_dataset()?;
    let reports = sweep(&config, &ds, &spec, jobs(&config))?;
    let base = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep.json"));
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sweep")
        .to_string();
    let dir = base.parent().unwrap_or(Path::new(""));
    for (value, report) in spec.values.iter().zip(&reports) {
        let path = dir.join(format!("{stem}_{}{}.json", spec.axis, value_label(*value)));
        report.write(&path)?;
        println!(
            "{}={value}: {} -> {}",
            spec.axis,
            summary(report),
            path.display()
        );
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let summary = validate_estimators(args.trials, args.seed)?;
    for c in &summary.cases {
        println!(
            "{:<14} mu={:<5} m={:<4} alpha={:<5} rate={:.4} bound={:.4} {}",
            c.point.kind,
            c.point.mu,
            c.point.m,
            c.point.alpha,
            c.rate,
            c.bound,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    println!(
        "{}",
        if summary.pass {
            "all estimators within bounds"
        } else {
            "estimator validation FAILED"
        }
    );
    Ok(summary.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Sweep(a) => sweep_cmd(a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
