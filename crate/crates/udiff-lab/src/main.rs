//! `udiff-lab`: command-line front end for the experiments of the `udiff` library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use udiff::cli::{execute, report_command, schema_text, ExperimentConfig};

#[derive(Parser)]
#[command(name = "udiff-lab", version, about = "Ultra-differentiable perturbation theory experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ExpArgs {
    /// Config file: `key = value` text (with optional `[command]` sections) or JSON.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Parameters as `--key value`, `--key=value`, `key=value` or a bare `--flag`;
    /// `udiff-lab schema <command>` lists the keys.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Weight sequences: C, C^-1, Omega tables and condition checks.
    Weights(ExpArgs),
    /// Small divisors: Psi table and convergents.
    Dioph(ExpArgs),
    /// Dyadic arithmetic convergence test.
    Brtest(ExpArgs),
    /// Periodic normal form with the Neishtadt schedule.
    Nf(ExpArgs),
    /// KAM iteration for a perturbed kinetic Hamiltonian.
    Kam(ExpArgs),
    /// Linear diffusion examples against the integrator.
    Diffuse(ExpArgs),
    /// Synchronized coupled-map construction and drift.
    Ms(ExpArgs),
    /// Bessi-type perturbations and their norm certificates.
    Bessi(ExpArgs),
    /// Consolidates run manifests into one verdict table.
    Report {
        /// Directory for `report.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Manifest files or run directories.
        paths: Vec<PathBuf>,
    },
    /// Prints the configuration keys of a command as a `key = value` template.
    Schema { command: String },
}

fn experiment(name: &str, a: ExpArgs) -> ExitCode {
    let cfg = match ExperimentConfig::load(name, a.config.as_deref(), &a.params) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&cfg) {
        Ok(out) => {
            for v in &out.manifest.verdicts {
                println!("{} {}: {} ({})", v.status(), v.name, v.measured, v.bound);
            }
            if let Some(e) = &out.manifest.error {
                eprintln!("error: {e}");
            }
            println!("artifacts in {}", cfg.out_dir().display());
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Weights(a) => experiment("weights", a),
        Cmd::Dioph(a) => experiment("dioph", a),
        Cmd::Brtest(a) => experiment("brtest", a),
        Cmd::Nf(a) => experiment("nf", a),
        Cmd::Kam(a) => experiment("kam", a),
        Cmd::Diffuse(a) => experiment("diffuse", a),
        Cmd::Ms(a) => experiment("ms", a),
        Cmd::Bessi(a) => experiment("bessi", a),
        Cmd::Report { out, paths } => match report_command(&paths, out.as_deref()) {
            Ok((text, code)) => {
                print!("{text}");
                ExitCode::from(code as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Cmd::Schema { command } => match schema_text(&command) {
            Ok(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
