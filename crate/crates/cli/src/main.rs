use std::path::PathBuf;
use std::process::ExitCode;

use adaptforge::engine::OrbitalBasis;
use adaptforge_cli::{
    cmd_active_scan, cmd_run, cmd_sweep, default_out, plan, read_config, read_suite, CliError,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "adaptforge",
    version,
    about = "ADAPT-VQE simulator on FCIDUMP fixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Canonical,
    UhfNo,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ADAPT calculation from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_os_t = default_out())]
        out: PathBuf,
        /// Validate the config and fixture, print the plan, compute nothing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a suite file (`{"runs": [...]}`) and write comparison.csv.
    Sweep {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_os_t = default_out())]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Direct runs over a range of active-space sizes.
    ActiveScan {
        #[arg(long)]
        fixture: String,
        #[arg(long, value_enum, default_value = "canonical")]
        basis: Basis,
        #[arg(long)]
        min: usize,
        #[arg(long)]
        max: usize,
        #[arg(long, default_value_os_t = default_out())]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            dry_run,
        } => {
            let cfg = read_config(&config)?;
            if dry_run {
                print!("{}", plan(&cfg)?);
                return Ok(0);
            }
            let s = cmd_run(&cfg, &out)?;
            println!(
                "{} {}: E = {:.10} Ha, error {:.3e} Ha, {} operators ({}), wrote {}",
                s.fixture,
                s.variant,
                s.final_energy,
                s.final_error,
                s.n_operators,
                s.stop,
                out.display()
            );
            Ok(0)
        }
        Command::Sweep { suite, out, jobs } => {
            let suite = read_suite(&suite)?;
            let report = cmd_sweep(&suite, &out, jobs)?;
            for (c, r) in &report.rows {
                match r {
                    Ok(s) => println!(
                        "{} {}: {} operators to chemical accuracy",
                        c.fixture,
                        c.variant(),
                        s.operators_to_chemical_accuracy
                            .map_or_else(|| "never".to_string(), |n| n.to_string())
                    ),
                    Err(e) => eprintln!("{} {}: {e}", c.fixture, c.variant()),
                }
            }
            println!("wrote {}", out.join("comparison.csv").display());
            Ok(report.exit_code())
        }
        Command::ActiveScan {
            fixture,
            basis,
            min,
            max,
            out,
        } => {
            let basis = match basis {
                Basis::Canonical => OrbitalBasis::Canonical,
                Basis::UhfNo => OrbitalBasis::UhfNo,
            };
            for (k, s) in cmd_active_scan(&fixture, basis, min, max, &out)? {
                println!(
                    "{k} orbitals: final error {:.3e} Ha, {} operators",
                    s.final_error, s.n_operators
                );
            }
            println!("wrote {}", out.join("active_scan.csv").display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("adaptforge: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
