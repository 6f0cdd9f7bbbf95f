//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_couplings, cmd_run, cmd_spectrum, cmd_sweep_stop, cmd_sweep_tau};
use crate::config::{ConfigLayers, ExperimentConfig};
use crate::error::CliError;
use crate::figures::cmd_figures;
use crate::sweep::thread_pool;

#[derive(Debug, Parser)]
#[command(name = "gsprobe", version, about = "Ground-state probability from post-ramp oscillations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML config file with dotted keys (all optional).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,

    /// Override a config key, e.g. `--set schedule.tau=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ramp, stop, measure and write a run record.
    Run(Common),
    /// One run per `sweep.tau` value.
    SweepTau(Common),
    /// Hold-protocol runs stopped at each `sweep.b_stop` field.
    SweepStop(Common),
    /// Lowest levels over the `spectrum.*` field grid and the coupled gap.
    Spectrum(Common),
    /// Ion positions, phonon modes, couplings and the fitted exponent.
    Couplings(Common),
    /// Data, plot scripts and SVGs for every figure.
    Figures {
        #[command(flatten)]
        common: Common,
        /// Restrict to these figures, e.g. `--only fig2 --only fig5`.
        #[arg(long)]
        only: Vec<String>,
    },
}

pub fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut layers = match &common.config {
        Some(p) => ConfigLayers::from_path(p)?,
        None => ConfigLayers::default(),
    };
    for s in &common.set {
        layers = layers.with_set(s)?;
    }
    layers.resolve()
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load_config(&c)?;
            let r = cmd_run(&cfg, &c.out)?;
            let mut msg = format!("p_ground = {:.6}", r.outcome.p_ground);
            for s in &r.outcome.series {
                msg.push_str(&format!("\ntheta = {}: amplitude = {:.6}", s.angle.label, s.amplitude.amplitude));
            }
            msg.push_str(&format!("\nwrote {}", c.out.join("record.json").display()));
            Ok(msg)
        }
        Command::SweepTau(c) => {
            let cfg = load_config(&c)?;
            let r = cmd_sweep_tau(&cfg, &c.out, &thread_pool(c.jobs)?)?;
            let failed = r.rows.iter().filter(|x| x.error.is_some()).count();
            Ok(format!("{} rows ({failed} failed) in {}", r.rows.len(), r.file.display()))
        }
        Command::SweepStop(c) => {
            let cfg = load_config(&c)?;
            let r = cmd_sweep_stop(&cfg, &c.out, &thread_pool(c.jobs)?)?;
            let failed = r.rows.iter().filter(|x| x.error.is_some()).count();
            Ok(format!("{} rows ({failed} failed) in {}", r.rows.len(), r.file.display()))
        }
        Command::Spectrum(c) => {
            let cfg = load_config(&c)?;
            let r = cmd_spectrum(&cfg, &c.out, &thread_pool(c.jobs)?)?;
            Ok(format!(
                "minimal coupled gap {:.6} at B = {:.6}; wrote {}",
                r.gap.gap_star,
                r.gap.b_star,
                c.out.display()
            ))
        }
        Command::Couplings(c) => {
            let cfg = load_config(&c)?;
            let r = cmd_couplings(&cfg, &c.out)?;
            Ok(format!("fitted alpha = {:.6}; wrote {}", r.alpha, c.out.display()))
        }
        Command::Figures { common, only } => {
            if common.config.is_some() || !common.set.is_empty() {
                return Err(CliError::Config(
                    "figures use pinned configs; --config and --set do not apply".into(),
                ));
            }
            let m = cmd_figures(&common.out, &only, &thread_pool(common.jobs)?)?;
            let mut msg = String::new();
            for e in &m.figures {
                msg.push_str(&format!("{}: {}", e.figure, e.status));
                if let Some(err) = &e.error {
                    msg.push_str(&format!(" ({err})"));
                }
                msg.push('\n');
            }
            msg.push_str(&format!("manifest in {}", common.out.join("manifest.json").display()));
            if m.failed > 0 {
                eprintln!("{msg}");
                return Err(CliError::Output(format!("{} figure(s) failed", m.failed)));
            }
            Ok(msg)
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("gsprobe: {e}");
            e.exit_code()
        }
    }
}
