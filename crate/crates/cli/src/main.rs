//! `acim-lab`: assemble Ulam matrices, compute invariant densities and run
//! the diagnostics from the command line. Flags are long-form; a JSON file
//! passed with `--config` overrides them key by key.

mod commands;
mod config;
mod error;
mod funcs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use acim_core::SamplingMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Context;
use crate::config::{parse_param, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "acim-lab", version, about = "Ulam discretization and invariant densities of piecewise expanding maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Registry name or JSON map file.
    #[arg(long, global = true)]
    map: Option<String>,
    /// Map parameter, `key=value`; repeatable.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Cells per axis.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Sample points per cell.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    sampling: Option<Sampling>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// L¹ tolerance of the density iteration.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// JSON object whose keys override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Mc,
    Lattice,
}

#[derive(Subcommand)]
enum Command {
    /// The map registry.
    Maps {
        #[command(subcommand)]
        action: MapsAction,
    },
    /// Matrix assembly.
    Ulam {
        #[command(subcommand)]
        action: UlamAction,
    },
    /// Invariant density by power iteration (density.csv).
    Acim,
    /// Leading eigenvalues, cyclic groups and ergodic components.
    Spectrum {
        #[arg(long)]
        top: Option<usize>,
    },
    /// Correlation series C_n for two observables (decay.csv).
    Decay {
        /// cos1, sin1, a constant or box:a..b[,c..d].
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Empirical two-norm inequality on random box mixtures.
    LyCheck {
        /// Contraction rate; defaults to the measured window sum.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        hypotheses: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Hypothesis checks; writes the report.
    Check {
        #[arg(long)]
        report: Option<PathBuf>,
        /// Uniform samples for the Monte Carlo checks.
        #[arg(long)]
        check_samples: Option<usize>,
        /// Sampled lines per axis.
        #[arg(long)]
        lines: Option<usize>,
    },
    /// Closed versus restricted iterates near the singularity set (open.csv).
    Open {
        /// Hole radii, comma separated.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Shrink factor of the holes; defaults to the report's ν.
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Initial function.
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long)]
        hypotheses: Option<PathBuf>,
    },
    /// Positivity certificate for the invariant density.
    Positivity {
        #[arg(long)]
        hypotheses: Option<PathBuf>,
    },
    /// Mollified density (regularized.csv).
    Regularize {
        #[arg(long)]
        delta: Option<f64>,
        /// Density CSV to regularize instead of computing one.
        #[arg(long)]
        density: Option<PathBuf>,
    },
    /// Merges the artifacts of the output directory into summary.json.
    Report {
        /// Also draw report.svg.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Subcommand)]
enum MapsAction {
    List,
}

#[derive(Subcommand)]
enum UlamAction {
    Build {
        /// Binary matrix path (default matrix.bin in the output directory).
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
        /// Also write the entries as matrix.csv.
        #[arg(long)]
        coo: bool,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve(common: Common, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    set(&mut cfg.map, common.map);
    cfg.params.extend(common.params);
    set(&mut cfg.grid_n, common.grid_n);
    set(&mut cfg.samples, common.samples);
    set(
        &mut cfg.sampling,
        common.sampling.map(|s| match s {
            Sampling::Mc => SamplingMode::MonteCarlo,
            Sampling::Lattice => SamplingMode::CenteredLattice,
        }),
    );
    set(&mut cfg.seed, common.seed);
    set(&mut cfg.tol, common.tol);
    set(&mut cfg.max_iter, common.max_iter);
    set(&mut cfg.out_dir, common.out_dir);
    match command {
        Command::Ulam {
            action: UlamAction::Build { out, coo },
        } => {
            cfg.matrix_out = out.clone();
            cfg.coo = *coo;
        }
        Command::Spectrum { top } => set(&mut cfg.top, *top),
        Command::Decay { f, g, n_max } => {
            set(&mut cfg.f, f.clone());
            set(&mut cfg.g, g.clone());
            set(&mut cfg.n_max, *n_max);
        }
        Command::LyCheck {
            sigma,
            hypotheses,
            trials,
            n_max,
        } => {
            cfg.sigma = *sigma;
            cfg.hypotheses = hypotheses.clone();
            set(&mut cfg.trials, *trials);
            set(&mut cfg.n_max, *n_max);
        }
        Command::Check {
            report,
            check_samples,
            lines,
        } => {
            cfg.report = report.clone();
            set(&mut cfg.check_samples, *check_samples);
            set(&mut cfg.lines, *lines);
        }
        Command::Open {
            eps,
            nu,
            n_max,
            f,
            hypotheses,
        } => {
            if !eps.is_empty() {
                cfg.eps = eps.clone();
            }
            cfg.nu = *nu;
            set(&mut cfg.n_max, *n_max);
            cfg.f = f.clone();
            cfg.hypotheses = hypotheses.clone();
        }
        Command::Positivity { hypotheses } => cfg.hypotheses = hypotheses.clone(),
        Command::Regularize { delta, density } => {
            set(&mut cfg.delta, *delta);
            cfg.density = density.clone();
        }
        Command::Report { svg } => cfg.svg = *svg,
        Command::Maps { .. } | Command::Acim => {}
    }
    match &common.config {
        Some(path) => cfg.overlay_file(path),
        None => Ok(cfg),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(cli.common, &cli.command)?;
    match cli.command {
        Command::Maps {
            action: MapsAction::List,
        } => commands::maps_list(),
        Command::Report { .. } => commands::report(&cfg.out_dir, cfg.svg),
        command => {
            let ctx = Context::new(cfg)?;
            match command {
                Command::Ulam { .. } => commands::ulam_build(&ctx),
                Command::Acim => commands::acim(&ctx),
                Command::Spectrum { .. } => commands::spectrum(&ctx),
                Command::Decay { .. } => commands::decay(&ctx),
                Command::LyCheck { .. } => commands::ly_check(&ctx),
                Command::Check { .. } => commands::check(&ctx),
                Command::Open { .. } => commands::open(&ctx),
                Command::Positivity { .. } => commands::positivity(&ctx),
                Command::Regularize { .. } => commands::regularize(&ctx),
                Command::Maps { .. } | Command::Report { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acim-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
