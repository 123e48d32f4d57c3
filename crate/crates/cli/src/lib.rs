//! Command-line workflows over the `rydion` physics crate: trap summaries, Stark
//! shifts, Franck-Condon tables, spectra, micromotion analysis, Rabi dynamics
//! and figure data.

pub mod commands;
pub mod config;
pub mod failure;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, load_valid_config, ToolkitConfig, ValidationReport, CONFIG_ENV};
use crate::failure::CliError;
use crate::output::{emit, Format, Report};

#[derive(Debug, Parser)]
#[command(
    name = "rydion",
    version,
    about = "Polarizable-ion trap, spectrum and dynamics toolkit"
)]
pub struct Cli {
    /// Config file (TOML, or JSON when the name ends in .json).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Drop the intrinsic-micromotion factor from the mean square field.
    #[arg(long, global = true)]
    pub no_mm_correction: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gradients, secular frequencies and Mathieu q of the configured trap.
    TrapInfo,
    /// Stark-modified frequencies, equilibria and minimum offsets per state.
    StarkShift(FieldArgs),
    /// Franck-Condon overlaps between the transition's lower and upper oscillators.
    FcMatrix {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = AxisArg::X)]
        axis: AxisArg,
    },
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    /// Turning point of a quadratic shift-versus-control scan.
    MicromotionFit {
        /// CSV with columns control, shift_hz and optionally sigma_hz.
        #[arg(long)]
        input: PathBuf,
    },
    /// Largest residual rms field compatible with a shift of `fraction` linewidths.
    MmLimit {
        #[arg(long, default_value_t = 100e3)]
        linewidth_hz: f64,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        /// Polarizability difference, C m^2/V; taken from the transition when absent.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Thermally averaged qubit population with Monte Carlo bands.
    Rabi {
        /// Add the nominal curve and the reference-occupation populations of all levels.
        #[arg(long)]
        full: bool,
    },
    /// Plot-ready data for one of the figures.
    Figure {
        #[arg(value_enum)]
        name: FigureName,
        #[command(flatten)]
        args: FigureArgs,
    },
    /// Lists schema violations and physics warnings of a config.
    Validate {
        /// Config to check; defaults to --config.
        path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct FieldArgs {
    /// Offset field along x, V/m; defaults to the spectrum block.
    #[arg(long, allow_hyphen_values = true)]
    pub ex: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub ey: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SpectrumCommand {
    /// Synthetic scan with projection noise (columns detuning_hz, signal, trials).
    Synthesize {
        #[arg(long, value_enum, default_value_t = KindArg::Depletion)]
        kind: KindArg,
    },
    /// Fit a recorded scan with line weights from the config.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = LineModelArg::Fixed)]
        line_model: LineModelArg,
        #[arg(long, value_enum, default_value_t = KindArg::Depletion)]
        kind: KindArg,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct FigureArgs {
    /// fig1b: largest phonon number.
    #[arg(long, default_value_t = 10)]
    pub n_max: u32,
    /// fig2b: half width of the control sweep, V/m.
    #[arg(long, default_value_t = 2.0)]
    pub sweep: f64,
    /// fig2b: number of sweep points.
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    /// fig2b: control value of the field null, V/m.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub null: f64,
    /// fig2b: Gaussian noise on each shift, Hz.
    #[arg(long, default_value_t = 10e3)]
    pub noise_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Survival,
    Depletion,
}

impl From<KindArg> for rydion::SignalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Survival => rydion::SignalKind::Survival,
            KindArg::Depletion => rydion::SignalKind::Depletion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LineModelArg {
    Fixed,
    CenterShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Fig1b,
    Fig2b,
    Fig3,
    Fig4,
}

/// Settings shared by every subcommand after the config is loaded.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ToolkitConfig,
    pub seed: u64,
    pub micromotion_correction: bool,
}

impl Context {
    fn new(config: ToolkitConfig, cli: &Cli) -> Self {
        Self {
            seed: cli.seed.unwrap_or(config.defaults.seed),
            micromotion_correction: config.defaults.micromotion_correction && !cli.no_mm_correction,
            config,
        }
    }
}

fn config_path(cli: &Cli) -> Result<&Path, CliError> {
    cli.config.as_deref().ok_or_else(|| {
        CliError::config(format!(
            "no config given: pass --config or set {CONFIG_ENV}"
        ))
    })
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let cfg = load_valid_config(config_path(cli)?)?;
    Ok(Context::new(cfg, cli))
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Validate { path } => {
            let path = match path {
                Some(p) => p.as_path(),
                None => config_path(cli)?,
            };
            let report = match load_config(path) {
                Ok(cfg) => cfg.validate(),
                Err(e) => ValidationReport {
                    violations: vec![e.message],
                    warnings: Vec::new(),
                },
            };
            Ok(Report::Validation(report))
        }
        Command::MmLimit {
            linewidth_hz,
            fraction,
            alpha: Some(alpha),
        } => commands::mm_limit(*alpha, *linewidth_hz, *fraction),
        Command::MmLimit {
            linewidth_hz,
            fraction,
            alpha: None,
        } => {
            let ctx = context(cli)?;
            let (lower, upper) = ctx.config.transition_states()?;
            commands::mm_limit(
                upper.polarizability - lower.polarizability,
                *linewidth_hz,
                *fraction,
            )
        }
        command => {
            let ctx = context(cli)?;
            match command {
                Command::TrapInfo => commands::trap_info(&ctx),
                Command::StarkShift(f) => commands::stark_shift(&ctx, f),
                Command::FcMatrix { field, n_max, axis } => {
                    commands::fc_matrix(&ctx, field, *n_max, *axis)
                }
                Command::Spectrum(SpectrumCommand::Synthesize { kind }) => {
                    commands::spectrum_synthesize(&ctx, (*kind).into())
                }
                Command::Spectrum(SpectrumCommand::Fit {
                    input,
                    line_model,
                    kind,
                }) => commands::spectrum_fit(&ctx, input, *line_model, (*kind).into()),
                Command::MicromotionFit { input } => commands::micromotion_fit(&ctx, input),
                Command::Rabi { full } => commands::rabi(&ctx, *full),
                Command::Figure { name, args } => commands::figure(&ctx, *name, args),
                Command::Validate { .. } | Command::MmLimit { .. } => unreachable!(),
            }
        }
    }
}

/// Runs the parsed command and writes its output.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let report = execute(cli)?;
    emit(&report, cli.format, cli.out.as_deref())
}
