use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use streamcast::Method;
use streamcast_cli::run::read_manifest_config;
use streamcast_cli::{execute, Failure, RunConfig};

#[derive(Parser)]
#[command(name = "streamcast", version, about = "Prequential benchmark for streaming point predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run methods on a CSV column and write traces, curves and a manifest.
    Run(RunArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of the recorded directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List available methods.
    Methods,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column name, or a product such as Quantity*UnitPrice.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    max_rows: Option<usize>,
    /// Comma-separated, e.g. sht,gpp_rb,conf
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    burnin_frac: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(Failure::config)?,
            None => {
                let (Some(input), Some(column)) = (&self.input, &self.column) else {
                    return Err(Failure::config(anyhow!("--input and --column are required without --config")));
                };
                RunConfig::from_toml(&format!("input = {:?}\ncolumn = {:?}\n", input.display().to_string(), column))
                    .map_err(Failure::config)?
            }
        };
        if let Some(v) = self.input {
            cfg.input = v;
        }
        if let Some(v) = self.column {
            cfg.column = v;
        }
        if self.max_rows.is_some() {
            cfg.max_rows = self.max_rows;
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.burnin_frac {
            cfg.burnin_frac = v;
        }
        if let Some(v) = self.grid_points {
            cfg.grid_points = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.output {
            cfg.output = v;
        }
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    let cfg = match command {
        Command::Methods => {
            for m in Method::ALL {
                let id = m.id();
                println!(
                    "{:<10} {:<12} {:<16} {}",
                    m.label(),
                    format!("{:?}", id.family),
                    id.variant,
                    if m.is_one_pass() { "one-pass" } else { "rep-set" }
                );
            }
            return Ok(());
        }
        Command::Run(args) => args.into_config()?,
        Command::Replay { manifest, output } => {
            let mut cfg = read_manifest_config(&manifest)?;
            if let Some(out) = output {
                cfg.output = out;
            }
            cfg
        }
    };
    let manifest = execute(&cfg)?;
    for m in &manifest.methods {
        println!("{:<10} cpe {:.6} sigma_rv {:.6}", m.label, m.cpe, m.sigma_rv);
    }
    println!("wrote {}", cfg.output.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.kind.exit_code() as u8)
        }
    }
}
