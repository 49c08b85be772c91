//! Command-line front end. Every subcommand reads an optional TOML config
//! and accepts `--section.key value` overrides after its own arguments.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Result;
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "affine-sr", version, about = "Multi-frame super-resolution under affine motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,

    /// Config overrides such as `--regularization.lambda 0.01`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let ov = config::parse_overrides(&self.overrides)?;
        RunConfig::load(self.config.as_deref(), &ov)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic LR sequence with motions and a clean copy.
    Synth(ConfigArgs),
    /// Reconstruct an SR image from frames and a motion file.
    Reconstruct(ConfigArgs),
    /// Write one detector's footprint patch and print its statistics.
    Footprint(ConfigArgs),
    /// Sweep models x settings x lambda on a synthetic sequence.
    Bench(ConfigArgs),
    /// PSNR between two images (PGM or .f32).
    Psnr { a: PathBuf, b: PathBuf },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Synth(a) => commands::synth(&a.resolve()?, &mut out),
        Command::Reconstruct(a) => commands::reconstruct(&a.resolve()?, &mut out),
        Command::Footprint(a) => commands::footprint(&a.resolve()?, &mut out),
        Command::Bench(a) => commands::bench(&a.resolve()?, &mut out),
        Command::Psnr { a, b } => commands::psnr(&a, &b, &mut out),
    }
}
