mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrl_core::design::{frontier_csv, pareto_frontier, tradeoff_design};
use mrl_core::ext::fmt_g17;
use mrl_core::hinf::{spectral_value_set_contour, CONTOUR_GRID};
use mrl_core::noise::worst_case_noise;
use mrl_core::problem::{make_quadratic_from_spectrum, Problem, ProblemSpec, QuadraticProblem};
use mrl_core::sim::{run_inexact_gmm, section6_experiment, Section6Config, ZeroNoise};
use mrl_core::{
    mi_search, preset_params, robustness_report, AlgoParams, Family, Method, MrlError, RobustnessReport, SpectrumModel,
};
use serde::Serialize;

use output::{manifest_path, write_atomic, RunManifest};

#[derive(Parser, Serialize)]
#[command(name = "mrl", version, about = "Robustness analysis and design of momentum methods")]
struct Cli {
    /// worker threads (falls back to MRL_THREADS, then all cores)
    #[arg(long, global = true, env = "MRL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// H∞ norm, rate, worst frequency/eigenvalue and stability radii
    Report {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-vs-robustness trade-off design against NAG
    Design {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, conflicts_with = "eps")]
        epsilon: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, default_value_t = 14)]
        grid: usize,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pareto frontier of rate vs H∞ for one family
    Pareto {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "gmm")]
        family: Family,
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Almost-worst-case noise sequence
    Noise {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// horizon; default is where the kernel falls below 1e-6
        #[arg(long = "K")]
        k: Option<usize>,
        /// keep the unnormalized kernel instead of unit ℓ2 norm
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inexact GMM runs
    Simulate {
        #[arg(long)]
        preset: Option<Preset>,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value = "worst")]
        noise: NoiseKind,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long = "K", default_value_t = 1000)]
        k: usize,
        /// start at x* + offset·1
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a certified ℓ2-gain bound on strongly convex smooth functions
    Bound {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Boundaries of spectral value sets for a list of perturbation sizes
    Specset {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = CONTOUR_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preset {
    Section6,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NoiseKind {
    None,
    Worst,
}

#[derive(Args, Serialize)]
struct ProblemArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L")]
    ell: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// problem spec JSON file, overrides --mu/--L/--dim
    #[arg(long)]
    problem: Option<PathBuf>,
    /// dense Q as CSV (header "d", row-major entries)
    #[arg(long)]
    q_csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ParamArgs {
    #[arg(long, conflicts_with = "alpha")]
    method: Option<String>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
}

/// Bad input: exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl ProblemArgs {
    fn load_spec(&self) -> Result<Option<ProblemSpec>> {
        self.problem
            .as_ref()
            .map(|p| {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| config_err(format!("problem spec {}: {e}", p.display())))
            })
            .transpose()
    }

    fn mu_l(&self) -> Result<SpectrumModel> {
        match (self.mu, self.ell) {
            (Some(mu), Some(l)) => Ok(SpectrumModel::new(mu, l)?),
            _ => Err(config_err("need --mu and --L (or --problem / --q-csv)")),
        }
    }

    fn spectrum(&self) -> Result<SpectrumModel> {
        if self.q_csv.is_some() {
            return Ok(self.quadratic(2)?.spectrum());
        }
        match self.load_spec()? {
            Some(ProblemSpec::Spectrum { mu, ell, .. }) | Some(ProblemSpec::ScvxTest { mu, ell, .. }) => {
                Ok(SpectrumModel::new(mu, ell)?)
            }
            Some(spec @ ProblemSpec::CyclicLaplacian { .. }) => match spec.build()? {
                Problem::Quadratic(q) => Ok(q.spectrum()),
                Problem::Scvx(_) => unreachable!(),
            },
            None => self.mu_l(),
        }
    }

    fn build(&self, default_dim: usize) -> Result<Problem> {
        if let Some(path) = &self.q_csv {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(Problem::Quadratic(QuadraticProblem::from_q_csv(&text)?));
        }
        match self.load_spec()? {
            Some(spec) => Ok(spec.build()?),
            None => {
                let spec = self.mu_l()?;
                Ok(Problem::Quadratic(make_quadratic_from_spectrum(&spec, self.dim.unwrap_or(default_dim), self.seed)?))
            }
        }
    }

    fn quadratic(&self, default_dim: usize) -> Result<QuadraticProblem> {
        match self.build(default_dim)? {
            Problem::Quadratic(q) => Ok(q),
            Problem::Scvx(_) => Err(config_err("this command needs a quadratic problem")),
        }
    }
}

impl ParamArgs {
    fn resolve(&self, spec: &SpectrumModel) -> Result<AlgoParams> {
        if let Some(name) = &self.method {
            if self.family.is_some() || self.beta.is_some() || self.nu.is_some() {
                return Err(config_err("--method cannot be combined with --family/--beta/--nu"));
            }
            let m: Method = name.parse()?;
            return Ok(preset_params(m, spec)?);
        }
        let alpha = self.alpha.ok_or_else(|| config_err("need --method or --alpha"))?;
        let beta = self.beta.unwrap_or(0.0);
        let family =
            self.family.unwrap_or(if self.beta.is_none() && self.nu.is_none() { Family::Gd } else { Family::Gmm });
        let p = match family {
            Family::Gd => AlgoParams::gd(alpha),
            Family::Hb => AlgoParams::hb(alpha, beta),
            Family::Nag => AlgoParams::nag(alpha, beta),
            Family::Tmm => AlgoParams::tmm(alpha, beta, self.nu.unwrap_or(0.0)),
            Family::Gmm => AlgoParams::gmm(alpha, beta, self.nu.unwrap_or(0.0)),
        };
        Ok(p?)
    }
}

#[derive(Serialize)]
struct ReportOut<'a> {
    method: Option<&'a str>,
    params: AlgoParams,
    #[serde(flatten)]
    report: RobustnessReport,
}

/// Where a command's primary output goes.
enum Sink<'a> {
    Stdout,
    File(&'a Path),
}

impl<'a> Sink<'a> {
    fn from(out: &'a Option<PathBuf>) -> Self {
        out.as_deref().map_or(Sink::Stdout, Sink::File)
    }

    fn emit(&self, contents: &str) -> Result<Vec<PathBuf>> {
        match self {
            Sink::Stdout => {
                print!("{contents}");
                Ok(Vec::new())
            }
            Sink::File(p) => {
                write_atomic(p, contents.as_bytes())?;
                Ok(vec![p.to_path_buf()])
            }
        }
    }
}

fn json(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let start = Instant::now();
    let (name, seed, out) = match &cli.command {
        Command::Report { problem, out, .. } => ("report", Some(problem.seed), out),
        Command::Design { problem, out, .. } => ("design", Some(problem.seed), out),
        Command::Pareto { problem, out, .. } => ("pareto", Some(problem.seed), out),
        Command::Noise { problem, out, .. } => ("noise", Some(problem.seed), out),
        Command::Simulate { problem, out, .. } => ("simulate", Some(problem.seed), out),
        Command::Bound { problem, out, .. } => ("bound", Some(problem.seed), out),
        Command::Specset { problem, out, .. } => ("specset", Some(problem.seed), out),
    };
    let manifest = RunManifest::new(name, serde_json::to_value(&cli.command)?, seed);
    let outputs = execute(&cli.command)?;
    if let Some(out) = out {
        let m = manifest.finish(outputs, start.elapsed());
        write_atomic(&manifest_path(out), json(&m)?.as_bytes())?;
    }
    Ok(())
}

fn execute(cmd: &Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Report { problem, params, out } => {
            let spec = problem.spectrum()?;
            let p = params.resolve(&spec)?;
            let report = robustness_report(&p, &spec);
            Sink::from(out).emit(&json(&ReportOut { method: params.method.as_deref(), params: p, report })?)
        }
        Command::Design { problem, epsilon, eps, grid, budget, out } => {
            let spec = problem.spectrum()?;
            let text = match (epsilon, eps) {
                (Some(e), None) => json(&tradeoff_design(&spec, *e, *grid, *budget)?)?,
                (None, Some(list)) => {
                    let res = list
                        .iter()
                        .map(|&e| tradeoff_design(&spec, e, *grid, *budget))
                        .collect::<Result<Vec<_>, _>>()?;
                    json(&res)?
                }
                _ => bail!(config_err("need --epsilon or --eps")),
            };
            Sink::from(out).emit(&text)
        }
        Command::Pareto { problem, family, grid, out } => {
            let spec = problem.spectrum()?.extremes_only();
            let f = pareto_frontier(&spec, *family, *grid)?;
            Sink::from(out).emit(&frontier_csv(&f))
        }
        Command::Noise { problem, params, h, k, raw, out } => {
            let q = problem.quadratic(2)?;
            let p = params.resolve(&q.spectrum())?;
            let seq = worst_case_noise(&p, &q, *h, *k, !raw)?;
            Sink::from(out).emit(&seq.to_csv())
        }
        Command::Simulate { preset: Some(Preset::Section6), problem, h, out, .. } => {
            let dir = out.as_deref().ok_or_else(|| config_err("--preset section6 needs --out <dir>"))?;
            let mut cfg = Section6Config { h: *h, ..Section6Config::default() };
            if let Some(d) = problem.dim {
                cfg.dim = d;
            }
            let bundles = section6_experiment(&cfg)?;
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut outputs = Vec::new();
            let mut summary = String::from("panel,method,total,peak,steps\n");
            for b in &bundles {
                for r in &b.runs {
                    let path = dir.join(format!("panel{}_{}.csv", b.panel, r.method));
                    write_atomic(&path, r.trace.to_csv().as_bytes())?;
                    outputs.push(path);
                    let _ = writeln!(
                        summary,
                        "{},{},{},{},{}",
                        b.panel,
                        r.method,
                        fmt_g17(r.trace.total()),
                        fmt_g17(r.trace.peak()),
                        r.trace.steps()
                    );
                }
            }
            let manifests: Vec<_> = bundles.iter().map(|b| b.manifest(&cfg)).collect();
            for (name, body) in [("bundles.json", json(&manifests)?), ("summary.csv", summary)] {
                let path = dir.join(name);
                write_atomic(&path, body.as_bytes())?;
                outputs.push(path);
            }
            Ok(outputs)
        }
        Command::Simulate { preset: None, problem, params, noise, h, k, offset, out } => {
            let prob = problem.build(2)?;
            let oracle = prob.oracle();
            let spec = match &prob {
                Problem::Quadratic(q) => q.spectrum(),
                Problem::Scvx(_) => problem.spectrum()?,
            };
            let p = params.resolve(&spec)?;
            let (xs, _) = oracle.optimum();
            let x0 = xs.add_scalar(*offset);
            let trace = match (noise, &prob) {
                (NoiseKind::None, _) => run_inexact_gmm(&p, oracle, &x0, &mut ZeroNoise, *k)?,
                (NoiseKind::Worst, Problem::Quadratic(q)) => {
                    let seq = worst_case_noise(&p, q, *h, None, true)?;
                    run_inexact_gmm(&p, oracle, &x0, &mut &seq, *k)?
                }
                (NoiseKind::Worst, Problem::Scvx(_)) => {
                    bail!(config_err("--noise worst needs a quadratic problem"))
                }
            };
            Sink::from(out).emit(&trace.to_csv())
        }
        Command::Bound { problem, params, budget, out } => {
            let spec = problem.spectrum()?.extremes_only();
            let p = params.resolve(&spec)?;
            let cert = mi_search(&p, &spec, *budget, problem.seed);
            Sink::from(out).emit(&json(&cert)?)
        }
        Command::Specset { problem, params, eps, grid, out } => {
            let q = problem.quadratic(2)?;
            let p = params.resolve(&q.spectrum())?;
            let mut csv = String::from("eps,contour,closed,x,y\n");
            for &e in eps {
                for (i, line) in spectral_value_set_contour(&p, &q, e, *grid)?.iter().enumerate() {
                    for (x, y) in &line.points {
                        let _ = writeln!(csv, "{},{i},{},{},{}", fmt_g17(e), line.closed, fmt_g17(*x), fmt_g17(*y));
                    }
                }
            }
            Sink::from(out).emit(&csv)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<MrlError>() {
        Some(
            MrlError::InvalidSpectrum(_)
            | MrlError::InvalidParams(_)
            | MrlError::DimensionMismatch { .. }
            | MrlError::Parse(_)
            | MrlError::UnknownMethod(_)
            | MrlError::CostGuard(_),
        ) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
