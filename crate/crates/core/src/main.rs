use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ris_cellfree::config::{load_config, parse_config, parse_methods, Method};
use ris_cellfree::experiment::run_experiment;
use ris_cellfree::output::emit_outputs;
use ris_cellfree::Error;

/// Uplink SE of RIS-aided cell-free massive MIMO.
#[derive(Debug, Parser)]
#[command(name = "ris-cellfree", version)]
struct Cli {
    /// `key = value` configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// master seed (overrides the file)
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides the file)
    #[arg(long)]
    out: Option<PathBuf>,
    /// comma-separated subset of mr, lmmse, cf
    #[arg(long, value_parser = parse_methods_arg)]
    methods: Option<Vec<Method>>,
    /// number of random network setups
    #[arg(long)]
    setups: Option<usize>,
    /// fading realizations per setup for Monte Carlo methods
    #[arg(long)]
    fading: Option<usize>,
}

fn parse_methods_arg(s: &str) -> Result<Vec<Method>, String> {
    parse_methods(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match &cli.config {
        Some(path) => load_config(path),
        None => parse_config(""),
    };
    let (mut cfg, mut sweep) = match loaded {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        sweep.out_dir = out;
    }
    if let Some(methods) = cli.methods {
        sweep.methods = methods;
    }
    if let Some(n) = cli.setups {
        cfg.n_setups = n;
    }
    if let Some(n) = cli.fading {
        cfg.n_fading = n;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let result = match run_experiment(&cfg, &sweep) {
        Ok(r) => r,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for f in &result.failures {
        eprintln!("warning: point {}={} setup {} failed: {}", sweep.variable.name(), f.sweep_value, f.setup, f.message);
    }
    let degenerate = result.degenerate_count();
    if degenerate > 0 {
        eprintln!("warning: {degenerate} degenerate SINR evaluations reported as SE 0");
    }
    match emit_outputs(&result, &sweep.out_dir) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
