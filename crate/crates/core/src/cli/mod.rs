//! Command-line front end: argument parsing, configuration and output.

pub mod bundle;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::sequence::SequenceKind;
use bundle::ResultBundle;
use commands::{CorrectArgs, Figure, FitModel};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "qemitter",
    version,
    about = "Driven two-level emitter simulation and analysis"
)]
pub struct Cli {
    /// TOML run configuration; omitted keys take built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for Monte-Carlo ensembles, oracles and multi-start fits.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward-model a sequence and write its trace.
    Simulate {
        #[command(subcommand)]
        kind: SimulateKind,
    },
    /// HOM visibility versus θ and collection window.
    Hom {
        /// Monte-Carlo trajectories for spot checks of the window sweep.
        #[arg(long)]
        oracle: Option<usize>,
    },
    /// Fit a model to a CSV series.
    Fit {
        #[arg(value_enum)]
        model: FitModel,
        data: PathBuf,
        /// Random restarts around the initial guess.
        #[arg(long)]
        multi_start: Option<usize>,
    },
    /// Imperfection corrections and efficiency budget.
    Correct(CorrectFlags),
    /// Run a bundled preset end to end.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimulateKind {
    Rabi {
        /// Saturation parameters (repeatable).
        #[arg(long = "s")]
        s: Vec<f64>,
    },
    RabiMap {
        #[arg(long = "s")]
        s: Option<f64>,
    },
    Ramsey,
    Hahn,
    Ple,
}

#[derive(Debug, Args, Default)]
#[command(allow_negative_numbers = true)]
pub struct CorrectFlags {
    /// Signal-to-background ratio.
    #[arg(long)]
    pub sbr: Option<f64>,
    /// g²(0) with co-polarised photons.
    #[arg(long)]
    pub g2par: Option<f64>,
    /// g²(0) with cross-polarised photons.
    #[arg(long)]
    pub g2perp: Option<f64>,
    /// Classical interference visibility loss.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Single-photon g²(0); defaults to 2/sbr when --sbr is given.
    #[arg(long)]
    pub g2: Option<f64>,
    /// Recombination beamsplitter imbalance.
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub p_detected: Option<f64>,
    #[arg(long)]
    pub branching: Option<f64>,
    #[arg(long)]
    pub quantum_efficiency: Option<f64>,
    #[arg(long)]
    pub setup_efficiency: Option<f64>,
    #[arg(long)]
    pub direction_factor: Option<f64>,
}

impl CorrectFlags {
    /// Flags take precedence over the `[corrections]` table.
    fn merged(&self, cfg: &RunConfig) -> CorrectArgs {
        let c = &cfg.corrections;
        CorrectArgs {
            sbr: self.sbr.or(c.sbr),
            g2par: self.g2par.or(c.g2par),
            g2perp: self.g2perp.or(c.g2perp),
            epsilon: self.epsilon.or(c.epsilon),
            g2: self.g2.or(c.g2),
            delta2: self.delta2.or(c.delta2),
            p_detected: self.p_detected.or(c.p_detected),
            branching: self.branching.or(c.branching),
            quantum_efficiency: self.quantum_efficiency.or(c.quantum_efficiency),
            setup_efficiency: self.setup_efficiency.or(c.setup_efficiency),
            direction_factor: self.direction_factor.or(c.direction_factor),
        }
    }
}

/// Build the bundle for `cli` without touching the filesystem beyond reading
/// inputs. The flag is false when a fit did not converge.
pub fn execute(cli: &Cli) -> Result<(ResultBundle, bool)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    let seed = cfg.ensemble.seed;
    let bundle = match &cli.command {
        Command::Simulate { kind } => match kind {
            SimulateKind::Rabi { s } => {
                if !s.is_empty() {
                    cfg.rabi.s = s.clone();
                }
                commands::simulate_rabi_cmd(&cfg)?
            }
            SimulateKind::RabiMap { s } => {
                if let Some(s) = s {
                    cfg.rabi.map_s = *s;
                }
                commands::simulate_rabi_map_cmd(&cfg)?
            }
            SimulateKind::Ramsey => commands::simulate_contrast_cmd(&cfg, SequenceKind::Ramsey)?,
            SimulateKind::Hahn => commands::simulate_contrast_cmd(&cfg, SequenceKind::Hahn)?,
            SimulateKind::Ple => commands::simulate_ple_cmd(&cfg)?,
        },
        Command::Hom { oracle } => {
            if let Some(n) = oracle {
                cfg.hom.oracle_trajectories = *n;
            }
            commands::hom_cmd(&cfg, seed)?
        }
        Command::Fit {
            model,
            data,
            multi_start,
        } => {
            if let Some(n) = multi_start {
                if *n == 0 {
                    return Err(Error::Usage("--multi-start must be >= 1".into()));
                }
                cfg.fit.multi_start = *n;
            }
            let series = commands::read_series(data, commands::fit_input_column(*model))?;
            return commands::fit_cmd(&cfg, *model, &series, seed);
        }
        Command::Correct(flags) => commands::correct_cmd(&flags.merged(&cfg))?,
        Command::Reproduce { figure } => commands::reproduce_cmd(*figure, cli.seed)?,
    };
    Ok((bundle, true))
}

/// Parse-free entry point used by the binary: run, write outputs, report.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    let out_dir = match &cli.out {
        Some(p) => p.clone(),
        None => match &cli.config {
            Some(path) => PathBuf::from(RunConfig::load(path)?.output.dir),
            None => PathBuf::from(RunConfig::default().output.dir),
        },
    };
    let (bundle, converged) = execute(cli)?;
    bundle.write(&out_dir)?;
    print!("{}", bundle.render_summary());
    if !converged {
        return Err(Error::Numerical(format!(
            "fit did not converge; diagnostics in {}",
            out_dir.join("summary.txt").display()
        )));
    }
    Ok(())
}
