//! `miae` command-line driver: train, encode, evaluate, quality, sweep and
//! reconstruct, each reading one TOML config plus flag overrides.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::Invocation;
use config::PipelineConfig;
use error::CliError;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "miae", version, about = "Multiple-input autoencoder pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an MIAE or MIAEFS model on data.train.
    Train(Common),
    /// Write latent representations of data.train/data.test or --data.
    Encode(Common),
    /// Grid-search a classifier on train representations and score the test set.
    Evaluate(Common),
    /// Between/within-class distance report for a labeled CSV.
    Quality(Common),
    /// Detection metrics and quality for each number of selected features.
    Sweep(Common),
    /// Reconstruct rows from the top-ranked latent features only.
    Reconstruct(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; sets the model, shuffle and classifier seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of latent features to keep, in (0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub normal_class: Option<String>,
    /// Model file; defaults to model.txt in the output directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Single input CSV for encode, quality and reconstruct.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub train_repr: Option<PathBuf>,
    #[arg(long)]
    pub test_repr: Option<PathBuf>,
    /// Comma-separated feature counts for sweep.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Comma-separated fractions for sweep.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

impl Common {
    pub fn invocation(&self) -> Result<Invocation, CliError> {
        let (mut config, raw) = match &self.config {
            Some(p) => {
                let loaded = PipelineConfig::load(p)?;
                (loaded.config, Some(loaded.raw))
            }
            None => (PipelineConfig::default(), None),
        };
        if let Some(s) = self.seed {
            config.override_seed(s);
        }
        if let Some(o) = &self.out {
            config.output.dir = o.clone();
        }
        if let Some(l) = &self.label_column {
            config.data.label_column = l.clone();
        }
        if let Some(n) = &self.normal_class {
            config.data.normal_class = Some(n.clone());
        }
        Ok(Invocation {
            config,
            config_raw: raw,
            model: self.model.clone(),
            data: self.data.clone(),
            train_repr: self.train_repr.clone(),
            test_repr: self.test_repr.clone(),
            beta: self.beta,
            ks: self.ks.clone(),
            betas: self.betas.clone(),
        })
    }
}

pub fn execute(command: &Command) -> Result<RunManifest, CliError> {
    match command {
        Command::Train(c) => commands::train(&c.invocation()?),
        Command::Encode(c) => commands::encode(&c.invocation()?),
        Command::Evaluate(c) => commands::evaluate(&c.invocation()?),
        Command::Quality(c) => commands::quality_cmd(&c.invocation()?),
        Command::Sweep(c) => commands::sweep(&c.invocation()?),
        Command::Reconstruct(c) => commands::reconstruct(&c.invocation()?),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                CliError::usage(first.trim_start_matches("error: ")).to_json_line()
            );
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            1
        }
    }
}
