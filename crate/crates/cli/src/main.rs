//! `csbm-gcn`: simulations and asymptotic theory of ridge-regressed linear
//! graph convolutions on contextual stochastic block models.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 empty
//! result, 5 solver divergence.

mod commands;
mod config;
mod error;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::config::{resolve, RawConfig};
use crate::error::CliResult;
use crate::table::{emit, Format, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "csbm-gcn", version, about = "CSBM graph-convolution ridge regression lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run trials at a single parameter point.
    Simulate(CommonArgs),
    /// Run trials over the grid of every list-valued parameter.
    Sweep(CommonArgs),
    /// Evaluate the asymptotic theory over a grid (no sampling).
    Theory(CommonArgs),
    /// Compare binary and Gaussian adjacency ensembles across sizes.
    Universality(UniversalityArgs),
    /// Scan the self-loop intensity c of the filter A + cI.
    Selfloop(SelfLoopArgs),
    /// Eigen-decompose a symmetric adjacency matrix.
    Spectrum(SpectrumArgs),
}

/// Options shared by every subcommand. Parameter flags accept
/// comma-separated lists and `start:step:stop` ranges.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Config file (`key = value` lines, or a previous run's manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of nodes (even).
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Ratio N / F.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Graph signal-to-noise ratio.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Feature signal-to-noise ratio.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Average degree.
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    /// Training ratio.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Ridge strength.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Adjacency ensemble: bs, bn, gs or gn.
    #[arg(long)]
    ensemble: Option<String>,
    /// Master seed (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Trials per point.
    #[arg(long)]
    trials: Option<String>,
    /// Graph filter: one-hop, two-hop, identity or coefficients `c0;c1;...`.
    #[arg(long, allow_hyphen_values = true)]
    filter: Option<String>,
    /// How r is interpreted: objective (default) or hamiltonian.
    #[arg(long = "ridge-convention")]
    ridge_convention: Option<String>,
    /// Output file; a manifest is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Run trials one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct UniversalityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Strictly increasing node counts (at least four).
    #[arg(long = "n-list")]
    n_list: Option<String>,
}

#[derive(Debug, Args)]
struct SelfLoopArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Values of c (must contain negative and positive values).
    #[arg(long = "c-grid", allow_hyphen_values = true)]
    c_grid: Option<String>,
    /// Attach the ridgeless self-loop theory (mu = 0 only).
    #[arg(long = "with-theory")]
    with_theory: bool,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Self-loop intensity of the filter A + cI.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    /// Eigenvalue indices `a,b` whose distortion ratio is reported.
    #[arg(long)]
    band: Option<String>,
}

impl CommonArgs {
    /// Config file entries overridden by the flags that were given.
    fn raw_config(&self, extra: &[(&str, Option<&str>)]) -> CliResult<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let mut flags = RawConfig::default();
        let pairs = [
            ("n", self.n.as_deref()),
            ("gamma", self.gamma.as_deref()),
            ("lambda", self.lambda.as_deref()),
            ("mu", self.mu.as_deref()),
            ("d", self.d.as_deref()),
            ("tau", self.tau.as_deref()),
            ("r", self.r.as_deref()),
            ("ensemble", self.ensemble.as_deref()),
            ("seed", self.seed.as_deref()),
            ("trials", self.trials.as_deref()),
            ("filter", self.filter.as_deref()),
            ("ridge_convention", self.ridge_convention.as_deref()),
            ("parallel", self.serial.then_some("false")),
        ];
        for (key, value) in pairs.iter().chain(extra) {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        raw.merge(&flags);
        Ok(raw)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (name, common, extra): (&str, &CommonArgs, Vec<(&str, Option<&str>)>) = match &cli.command {
        Command::Simulate(a) => ("simulate", a, vec![]),
        Command::Sweep(a) => ("sweep", a, vec![]),
        Command::Theory(a) => ("theory", a, vec![]),
        Command::Universality(a) => ("universality", &a.common, vec![("n_list", a.n_list.as_deref())]),
        Command::Selfloop(a) => (
            "selfloop",
            &a.common,
            vec![
                ("c_grid", a.c_grid.as_deref()),
                ("with_theory", a.with_theory.then_some("true")),
            ],
        ),
        Command::Spectrum(a) => (
            "spectrum",
            &a.common,
            vec![("c", a.c.as_deref()), ("band", a.band.as_deref())],
        ),
    };
    let resolved = resolve(&common.raw_config(&extra)?)?;
    let output = match &cli.command {
        Command::Simulate(_) => commands::simulate(&resolved)?,
        Command::Sweep(_) => commands::run_sweep(&resolved)?,
        Command::Theory(_) => commands::theory(&resolved)?,
        Command::Universality(_) => commands::universality(&resolved)?,
        Command::Selfloop(_) => commands::selfloop(&resolved)?,
        Command::Spectrum(_) => commands::spectrum(&resolved)?,
    };
    let manifest = RunManifest {
        command: name.to_string(),
        config: resolved.entries.clone(),
        seed: resolved.base.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: Vec::new(),
        metadata: Default::default(),
    };
    emit(&output, common.format, common.out.as_deref(), manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
