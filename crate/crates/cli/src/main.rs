//! `evfleet`: validate, run and sweep fleet scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evfleet::scenario::{run_scenario, sweep, validate_config, RunOptions, Scenario, ScenarioError, SweepParam};

#[derive(Parser)]
#[command(name = "evfleet", version, about = "Discrete-event simulation of electric vehicle fleets")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace); RUST_LOG overrides.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print the effective configuration.
    Validate { config: PathBuf },
    /// Run one scenario and write its CSV outputs.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write every dispatched event to events.csv.
        #[arg(long)]
        event_log: bool,
    },
    /// Run one scenario per value of a parameter and aggregate the results.
    Sweep {
        config: PathBuf,
        /// fleet.size, stations.count, stations.slot_power or stations.max_simultaneous
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn execute(command: Command) -> Result<(), ScenarioError> {
    match command {
        Command::Validate { config } => {
            let effective = validate_config(&config)?;
            println!("{effective}");
            eprintln!("{}: OK", config.display());
        }
        Command::Run { config, seed, out, event_log } => {
            let scenario = Scenario::load(&config)?;
            let report = run_scenario(&scenario, &RunOptions { seed, out_dir: Some(out.clone()), event_log })?;
            println!("{}", report.summary);
            if let Some(manifest) = &report.manifest {
                for f in &manifest.files {
                    println!("{:>10} rows  {}", f.rows, out.join(&f.name).display());
                }
            }
            println!(
                "min idle {}  delayed {}  stranded {}  mean wait {:.1}s",
                report.min_idle(),
                report.n_delayed(),
                report.n_stranded(),
                report.mean_wait_s()
            );
        }
        Command::Sweep { config, param, values, out } => {
            let param: SweepParam = param.parse()?;
            let scenario = Scenario::load(&config)?;
            let rows = sweep(&scenario, param, &values, Some(&out))?;
            println!(
                "{:>10} {:>8} {:>12} {:>10} {:>9} {:>14} {:>10}",
                param.key(),
                "min_idle",
                "mean_wait_s",
                "stranded",
                "delayed",
                "grid_wh",
                "fuel_l"
            );
            for r in &rows {
                println!(
                    "{:>10} {:>8} {:>12.1} {:>10} {:>9} {:>14.1} {:>10.3}",
                    r.value, r.min_idle, r.mean_wait_s, r.n_stranded, r.n_delayed, r.total_grid_wh, r.total_fuel_l
                );
            }
            println!("wrote {}", out.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
