use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qrbm_core::experiment::{run, spectrum_summary, sweep, ExperimentConfig};
use qrbm_core::hamiltonians::load_pauli_sum;
use qrbm_core::QrbmError;

/// Batch runner for 2-local QRBM experiments.
#[derive(Parser, Debug)]
#[command(name = "qrbm", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one experiment and write its artifacts.
    Run { config: PathBuf },
    /// Run one experiment per value of a dotted config parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path such as `hamiltonian.haldane.h1`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the spectrum of a Pauli-sum file as JSON.
    Spectrum { hamiltonian: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn fail(e: &QrbmError) -> ExitCode {
    let code = e.exit_code();
    eprintln!("{}", json!({ "error": e.to_string(), "exit_code": code }));
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli.cmd) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(&e),
    }
}

fn exec(cmd: Cmd) -> qrbm_core::Result<i32> {
    match cmd {
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run(&cfg)?;
            let line = json!({
                "dir": out.dir.display().to_string(),
                "status": if out.ok { "ok" } else { "failed" },
                "metrics": out.metrics,
                "error": out.error,
            });
            println!("{line}");
            Ok(out.exit_code)
        }
        Cmd::Sweep {
            config,
            param,
            values,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let s = sweep(&cfg, &param, &values)?;
            for p in &s.points {
                let status = match &p.outcome {
                    Ok(o) if o.ok => "ok",
                    _ => "failed",
                };
                println!("{}", json!({ "value": p.value, "status": status, "resumed": p.resumed }));
            }
            println!("{}", s.dir.join("summary.csv").display());
            // Partial failure is tolerated; it still shows in the exit status.
            Ok(if s.all_ok() { 0 } else { 3 })
        }
        Cmd::Spectrum { hamiltonian } => {
            let h = load_pauli_sum(&hamiltonian)?;
            let v = spectrum_summary(&h)?;
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
            Ok(0)
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.resolved().validate()?;
            println!("{}", json!({ "valid": true }));
            Ok(0)
        }
    }
}
