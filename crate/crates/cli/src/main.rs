//! `revradon`: batch front end. Every command reads one JSON run
//! configuration; exit codes are 0 on success, 2 for invalid input, 3 for
//! numerical failure and 4 for I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revradon::commands::{
    cmd_check_bolker, cmd_condnum, cmd_predict_artifacts, cmd_reconstruct, cmd_simulate,
};
use revradon::config::RunConfig;
use revradon::Result;

#[derive(Parser)]
#[command(name = "revradon", version, about = "Radon transforms over surfaces of revolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Phantom, forward projection and noise; writes sinogram.f64.
    Simulate(Common),
    /// Invert a sinogram; writes volume.f64 and reconstruction.json.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        sinogram: PathBuf,
        /// Ground-truth volume for the relative error.
        #[arg(short, long)]
        truth: Option<PathBuf>,
    },
    /// Audit the Bolker conditions of a profile; writes bolker.json.
    CheckBolker(Common),
    /// Condition numbers of V_xi; writes cond_<family>.csv.
    Condnum(Common),
    /// Predicted mirror-artifact curve; writes artifacts.csv.
    PredictArtifacts(Common),
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let path = cmd_simulate(&c.load()?)?;
            println!("{}", path.display());
        }
        Command::Reconstruct {
            common,
            sinogram,
            truth,
        } => {
            let cfg = common.load()?;
            let report = cmd_reconstruct(&cfg, &sinogram, truth.as_deref())?;
            if let Some(e) = report.rel_error {
                println!("relative error {e:.6}");
            }
            if let Some(m) = &report.artifact_match {
                println!(
                    "artifact match {:.3} ({} of {} samples), {} off-curve maxima",
                    m.fraction,
                    m.samples_matched,
                    m.samples_in_volume,
                    m.off_curve_maxima.len()
                );
            }
            println!("{}", cfg.output_dir.display());
        }
        Command::CheckBolker(c) => {
            let report = cmd_check_bolker(&c.load()?)?;
            print!("{report}");
        }
        Command::Condnum(c) => {
            for curve in cmd_condnum(&c.load()?)? {
                println!("{}: peak {:.4e}, area {:.4e}", curve.family, curve.peak(), curve.area());
            }
        }
        Command::PredictArtifacts(c) => {
            let curve = cmd_predict_artifacts(&c.load()?)?;
            println!("{} samples", curve.samples.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
