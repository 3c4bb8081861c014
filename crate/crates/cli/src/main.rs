//! `aftint`: simulate, fit, tune, evaluate and benchmark penalized
//! integrative AFT models.

mod config;
mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};

use aft_integrative::eval::{repeated_split_eval, run_benchmark, tune_and_fit, write_benchmark, BenchmarkOptions};
use aft_integrative::sim::{gen_replicate, write_replicate};
use aft_integrative::tuning::{cross_validate, fit_fixed, to_original_scale, Method};
use aft_integrative::{load_studies, CoefMatrix, MultiStudy, SolverOptions};

use config::{read_toml, to_toml, BenchmarkFile, SimFile, TuneFile};
use output::{file_digest, header, write_coefficients, write_cv_tables, write_json, write_rows, Selected};

#[derive(Parser)]
#[command(name = "aftint", version, about = "Penalized integrative AFT survival analysis")]
struct Cli {
    /// Worker threads for CV folds and benchmark replicates (default: all cores).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Args, Clone, Serialize)]
struct SolverArgs {
    /// Largest relative coefficient change of a full sweep that counts as converged.
    #[arg(long, default_value_t = SolverOptions::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_sweeps)]
    max_sweeps: usize,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be positive, got {}", self.tol);
        }
        if self.max_sweeps == 0 {
            bail!("--max-sweeps must be at least 1");
        }
        Ok(SolverOptions {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            active_set: true,
            debug_checks: false,
        })
    }
}

#[derive(Args, Clone)]
struct TuneArgs {
    /// Tuning config (keys as printed by `aftint defaults tune`).
    #[arg(long)]
    tune: Option<PathBuf>,
    /// Number of CV folds, overriding the tuning config.
    #[arg(long)]
    folds: Option<usize>,
}

impl TuneArgs {
    fn load(&self) -> Result<TuneFile> {
        let mut t: TuneFile = match &self.tune {
            Some(p) => read_toml(p)?,
            None => TuneFile::default(),
        };
        if let Some(k) = self.folds {
            t.folds = k;
        }
        Ok(t)
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Study CSV files (columns time,status,x1..xp; one file per study).
    #[arg(required = true)]
    data: Vec<PathBuf>,
    /// glasso, gmcp, gscad, cmcp, sgmcp, meta or pooled.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Seed for CV folds and random splits.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replicate into per-study CSVs plus truth.csv.
    Simulate {
        /// Simulation config (keys as printed by `aftint defaults simulate`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicate index within the seed.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a method, by cross-validation or at a fixed --lambda.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Fixed path level; skips cross-validation.
        #[arg(long)]
        lambda: Option<f64>,
        /// Concavity with --lambda.
        #[arg(long, default_value_t = 3.0)]
        a: f64,
        /// Secondary ratio with --lambda (cmcp, sgmcp).
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        #[command(flatten)]
        tune: TuneArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validation table and selected tuning point only.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tune: TuneArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated random-split logrank evaluation of a method.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Number of random splits.
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[command(flatten)]
        tune: TuneArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulation benchmark over settings, methods and replicates.
    Benchmark {
        /// Benchmark config (see `aftint defaults benchmark`); defaults to
        /// the 24 published designs.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated methods, overriding the config.
        #[arg(long, value_parser = parse_method, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Reseeds setting k with seed + k.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        tune: TuneArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print default configuration files.
    Defaults {
        #[arg(value_enum)]
        kind: Option<DefaultsKind>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DefaultsKind {
    Simulate,
    Tune,
    Benchmark,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.parallel {
        if n == 0 {
            bail!("--parallel must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    match cli.command {
        Command::Simulate { config, seed, replicate, out } => simulate(config.as_deref(), seed, replicate, &out),
        Command::Fit { data, lambda, a, ratio, tune, solver, out } => {
            fit_cmd(&data, lambda, a, ratio, &tune, &solver, &out)
        }
        Command::Cv { data, tune, solver, out } => cv_cmd(&data, &tune, &solver, &out),
        Command::Evaluate { data, replicates, train_fraction, tune, solver, out } => {
            evaluate_cmd(&data, replicates, train_fraction, &tune, &solver, &out)
        }
        Command::Benchmark { config, method, replicates, seed, tune, solver, out } => {
            benchmark_cmd(config.as_deref(), &method, replicates, seed, &tune, &solver, &out)
        }
        Command::Defaults { kind } => defaults(kind),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn simulate(config: Option<&Path>, seed: Option<u64>, replicate: u64, out: &Path) -> Result<i32> {
    let mut file: SimFile = match config {
        Some(p) => read_toml(p)?,
        None => SimFile::default(),
    };
    if let Some(s) = seed {
        file.seed = s;
    }
    let cfg = file.to_config()?;
    let head = header(cfg.seed, &(&file, replicate))?;
    let rep = gen_replicate(&cfg, replicate)?;
    create_dir(out)?;
    let paths = write_replicate(out, &rep, &[head])?;
    for (m, rate) in rep.censoring_rates().iter().enumerate() {
        println!("study {}: n = {}, censoring rate {:.3}", m + 1, rep.data.study(m).n(), rate);
    }
    println!("overall censoring rate {:.3}", rep.overall_censoring());
    println!("wrote {} study files and truth.csv to {}", paths.len(), out.display());
    Ok(0)
}

/// Configuration identity of a data-driven command.
#[derive(Serialize)]
struct RunIdentity<'a, T: Serialize> {
    command: &'a str,
    method: Method,
    data: Vec<String>,
    tune: &'a TuneFile,
    solver: &'a SolverArgs,
    extra: T,
}

fn identity<'a, T: Serialize>(
    command: &'a str,
    data: &DataArgs,
    tune: &'a TuneFile,
    solver: &'a SolverArgs,
    extra: T,
) -> Result<RunIdentity<'a, T>> {
    Ok(RunIdentity {
        command,
        method: data.method,
        data: data.data.iter().map(|p| file_digest(p)).collect::<Result<_>>()?,
        tune,
        solver,
        extra,
    })
}

fn load(data: &DataArgs) -> Result<MultiStudy> {
    load_studies(&data.data).context("cannot load study data")
}

#[derive(Serialize)]
struct TuningPoint {
    lambda: f64,
    secondary: Option<f64>,
    a: Option<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    method: Method,
    studies: usize,
    p: usize,
    objective: f64,
    kkt_residual: f64,
    converged: bool,
    cross_validated: bool,
    tuning: Vec<TuningPoint>,
    intercepts: Vec<f64>,
    selected: Selected,
}

fn fit_cmd(
    data: &DataArgs,
    lambda: Option<f64>,
    a: f64,
    ratio: f64,
    tune: &TuneArgs,
    solver: &SolverArgs,
    out: &Path,
) -> Result<i32> {
    let ms = load(data)?;
    let tf = tune.load()?;
    let opts = solver.options()?;
    let method = data.method;
    let head = header(data.seed, &identity("fit", data, &tf, solver, (lambda, a, ratio))?)?;
    create_dir(out)?;
    let summary = match lambda {
        Some(l) => {
            let (coef, original, objective, kkt, converged) =
                fixed_fit(&ms, method, l, a, ratio, tf.path_length(method), &opts)?;
            write_coefficients(&out.join("coefficients.csv"), &head, &original)?;
            FitSummary {
                method,
                studies: ms.m(),
                p: ms.p(),
                objective,
                kkt_residual: kkt,
                converged,
                cross_validated: false,
                tuning: vec![TuningPoint {
                    lambda: l,
                    secondary: method.is_two_parameter().then_some(ratio),
                    a: method.uses_a().then_some(a),
                }],
                intercepts: original.iter().map(|o| o.0).collect(),
                selected: Selected::from(&coef.support()),
            }
        }
        None => {
            let fit = tune_and_fit(&ms, method, &tf.grid(method)?, data.seed, &opts)?;
            write_coefficients(&out.join("coefficients.csv"), &head, &fit.original)?;
            write_cv_tables(&out.join("cv_table.csv"), &head, &fit.cv_tables)?;
            FitSummary {
                method,
                studies: ms.m(),
                p: ms.p(),
                objective: fit.objective,
                kkt_residual: fit.kkt_residual,
                converged: fit.converged,
                cross_validated: true,
                tuning: fit
                    .tuning
                    .iter()
                    .map(|&(lambda, secondary, a)| TuningPoint { lambda, secondary, a })
                    .collect(),
                intercepts: fit.original.iter().map(|o| o.0).collect(),
                selected: Selected::from(&fit.coef.support()),
            }
        }
    };
    write_json(&out.join("summary.json"), &head, &summary)?;
    println!(
        "{method}: objective {:.6}, KKT residual {:.2e}, {} selected pairs over {} covariates{}",
        summary.objective,
        summary.kkt_residual,
        summary.selected.pairs,
        summary.selected.overall.len(),
        if summary.converged { "" } else { " (not converged)" }
    );
    Ok(if summary.converged { 0 } else { 3 })
}

type FixedFit = (CoefMatrix, Vec<(f64, Vec<f64>)>, f64, f64, bool);

/// Warm-started path fit at a fixed level; meta analysis fits each study.
fn fixed_fit(
    ms: &MultiStudy,
    method: Method,
    lambda: f64,
    a: f64,
    ratio: f64,
    path_length: usize,
    opts: &SolverOptions,
) -> Result<FixedFit> {
    if method != Method::Meta {
        let (std, res) = fit_fixed(ms, method, lambda, a, ratio, path_length, opts)?;
        let original = to_original_scale(&std, &res.coef)?;
        let objective = res.objective();
        return Ok((res.coef, original, objective, res.kkt_residual, res.converged));
    }
    let mut coef = CoefMatrix::zeros(ms.p(), ms.m());
    let mut original = Vec::with_capacity(ms.m());
    let (mut objective, mut kkt, mut converged) = (0.0, 0.0f64, true);
    for (m, s) in ms.studies().iter().enumerate() {
        let single = MultiStudy::new(vec![s.clone()])?;
        let (std, res) = fit_fixed(&single, Method::Gmcp, lambda, a, ratio, path_length, opts)?;
        for j in 0..ms.p() {
            coef.set(j, m, res.coef.get(j, 0));
        }
        original.push(to_original_scale(&std, &res.coef)?.remove(0));
        objective += s.n() as f64 / ms.n() as f64 * res.objective();
        kkt = kkt.max(res.kkt_residual);
        converged &= res.converged;
    }
    Ok((coef, original, objective, kkt, converged))
}

fn cv_cmd(data: &DataArgs, tune: &TuneArgs, solver: &SolverArgs, out: &Path) -> Result<i32> {
    let ms = load(data)?;
    let tf = tune.load()?;
    let opts = solver.options()?;
    let method = data.method;
    let head = header(data.seed, &identity("cv", data, &tf, solver, ())?)?;
    let grid = tf.grid(method)?;
    create_dir(out)?;

    #[derive(Serialize)]
    struct Best {
        study: Option<usize>,
        lambda: f64,
        secondary: Option<f64>,
        a: Option<f64>,
        cv_mean: f64,
        cv_sd: f64,
    }
    let outcomes = if method == Method::Meta {
        let mut v = Vec::with_capacity(ms.m());
        for s in ms.studies() {
            let single = MultiStudy::new(vec![s.clone()])?;
            v.push(cross_validate(&single, Method::Gmcp, &grid, data.seed, &opts)?);
        }
        v
    } else {
        vec![cross_validate(&ms, method, &grid, data.seed, &opts)?]
    };
    let tables: Vec<_> = outcomes.iter().map(|o| o.table.clone()).collect();
    write_cv_tables(&out.join("cv_table.csv"), &head, &tables)?;
    let best: Vec<Best> = outcomes
        .iter()
        .enumerate()
        .map(|(m, o)| Best {
            study: (method == Method::Meta).then_some(m + 1),
            lambda: o.best_point.lambda,
            secondary: o.best_point.secondary,
            a: o.best_point.a,
            cv_mean: o.best_point.mean,
            cv_sd: o.best_point.sd,
        })
        .collect();
    for b in &best {
        let o = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{method}{}: lambda {:.6}, secondary {}, a {}, CV loss {:.6} ({:.6})",
            b.study.map_or(String::new(), |s| format!(" study {s}")),
            b.lambda,
            o(b.secondary),
            o(b.a),
            b.cv_mean,
            b.cv_sd
        );
    }
    #[derive(Serialize)]
    struct CvSummary {
        method: Method,
        best: Vec<Best>,
    }
    write_json(&out.join("summary.json"), &head, &CvSummary { method, best })?;
    Ok(0)
}

fn evaluate_cmd(
    data: &DataArgs,
    replicates: usize,
    train_fraction: f64,
    tune: &TuneArgs,
    solver: &SolverArgs,
    out: &Path,
) -> Result<i32> {
    let ms = load(data)?;
    let tf = tune.load()?;
    let opts = solver.options()?;
    let head = header(
        data.seed,
        &identity("evaluate", data, &tf, solver, (replicates, train_fraction))?,
    )?;
    let report = repeated_split_eval(
        &ms,
        data.method,
        &tf.grid(data.method)?,
        replicates,
        train_fraction,
        data.seed,
        &opts,
    )?;
    create_dir(out)?;
    let rows: Vec<String> = report
        .per_repeat
        .iter()
        .enumerate()
        .map(|(r, v)| format!("{},{v}", r + 1))
        .collect();
    write_rows(&out.join("evaluation.csv"), &head, "repeat,logrank", &rows)?;
    write_json(&out.join("summary.json"), &head, &report)?;
    println!(
        "{}: mean logrank {:.3} (sd {:.3}) over {} splits, {} with a degenerate study split",
        data.method,
        report.mean,
        report.sd,
        report.per_repeat.len(),
        report.degenerate_repeats
    );
    Ok(0)
}

fn benchmark_cmd(
    config: Option<&Path>,
    methods: &[Method],
    replicates: Option<usize>,
    seed: Option<u64>,
    tune: &TuneArgs,
    solver: &SolverArgs,
    out: &Path,
) -> Result<i32> {
    let mut file: BenchmarkFile = match config {
        Some(p) => read_toml(p)?,
        None => BenchmarkFile::default(),
    };
    if let Some(s) = seed {
        for (k, setting) in file.setting.iter_mut().enumerate() {
            setting.seed = s.wrapping_add(k as u64);
        }
    }
    if let Some(r) = replicates {
        file.replicates = r;
    }
    if !methods.is_empty() {
        file.methods = methods.iter().map(|m| m.name().to_string()).collect();
    }
    if file.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let methods = file.parsed_methods()?;
    if methods.is_empty() {
        bail!("no methods to benchmark");
    }
    let settings = file.settings()?;
    let tf = tune.load()?;
    let options = BenchmarkOptions {
        single: tf.grid(Method::Gmcp)?,
        double: tf.grid(Method::Cmcp)?,
        solver: solver.options()?,
    };
    let head = header(seed.unwrap_or(settings[0].1.seed), &(&file, &tf, solver))?;
    let output = run_benchmark(&settings, &methods, file.replicates, &options)?;
    write_benchmark(out, &output, &[head])?;
    output.write_table(std::io::stdout().lock())?;
    let failed = output.failures().count();
    if failed > 0 {
        eprintln!(
            "{failed} runs failed; see {}",
            out.join("failures.csv").display()
        );
        return Ok(2);
    }
    Ok(0)
}

fn defaults(kind: Option<DefaultsKind>) -> Result<i32> {
    let sim = || -> Result<String> {
        Ok(format!(
            "# Simulation config for `aftint simulate --config`.\n\
             # correlation: ar<rho> with 0 <= rho < 1, or banded1..banded3\n\
             # sparsity: homogeneity or heterogeneity\n\
             # signal: low, high, or a coefficient sd\n{}",
            to_toml(&SimFile::default())?
        ))
    };
    let tune = || -> Result<String> {
        let s = SolverOptions::default();
        Ok(format!(
            "# Tuning config for `--tune`. Solver defaults: --tol {} --max-sweeps {}\n{}",
            s.tol,
            s.max_sweeps,
            to_toml(&TuneFile::default())?
        ))
    };
    let bench = || -> Result<String> {
        Ok(format!(
            "# Benchmark config for `aftint benchmark --config`. Each [[setting]]\n\
             # takes the simulation keys plus an optional label.\n{}",
            to_toml(&BenchmarkFile::default())?
        ))
    };
    match kind {
        Some(DefaultsKind::Simulate) => print!("{}", sim()?),
        Some(DefaultsKind::Tune) => print!("{}", tune()?),
        Some(DefaultsKind::Benchmark) => print!("{}", bench()?),
        None => print!("{}\n{}", sim()?, tune()?),
    }
    Ok(0)
}
