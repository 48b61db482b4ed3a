//! Command-line surface of the simulator.
//!
//! Subcommands: `run`, `sweep`, `spectrum`, `fit`, `render`.
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 partial experiment (some instances failed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use colemit::harness::config::{RunConfig, Scenario};
use colemit::harness::export;
use colemit::harness::runner;
use colemit::Error;

mod fit_table;
mod render;

#[derive(Parser)]
#[command(
    name = "colemit",
    version,
    about = "Collective spontaneous emission simulator for dilute disordered atomic clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of disorder realizations.
    #[arg(long)]
    instances: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the scenario named in the config.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single-configuration scenario.
    Run(RunArgs),
    /// Execute a parameter-sweep scenario and write the combined table.
    Sweep(RunArgs),
    /// Shortcut: export the collective decay-rate spectrum.
    Spectrum(RunArgs),
    /// Fit the figure of merit from a sweep table.
    Fit {
        /// A sweep.csv produced by the fom-sweep scenario.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for fom_fit.json (default: alongside the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an exported field-map CSV as an ASCII graymap.
    Render {
        /// A field_map_*.csv file.
        #[arg(long)]
        input: PathBuf,
        /// Output PGM path (default: input with .pgm extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Numerical(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(instances) = args.instances {
        config.instances = instances;
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
        config.cloud.seed = seed;
    }
    if let Some(name) = &args.scenario {
        config.scenario = name.parse()?;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn out_dir_of(config: &RunConfig) -> Result<PathBuf, Error> {
    config.out_dir.clone().ok_or_else(|| {
        Error::config("no output directory: set run.out_dir in the config or pass --out")
    })
}

/// Returns true when the experiment completed only partially.
fn execute_run(config: &RunConfig) -> Result<bool, Error> {
    let out = out_dir_of(config)?;
    export::prepare_out_dir(&out)?;
    let staged = export::staged(&out);
    let outcome = (|| -> Result<bool, Error> {
        if config.scenario.is_sweep() {
            let result = runner::sweep(config)?;
            export::write_sweep_files(&result, &staged)?;
            Ok(result.partial())
        } else {
            let result = runner::run_experiment(config)?;
            export::write_experiment_files(&result, &staged)?;
            Ok(result.partial())
        }
    })();
    match outcome {
        Ok(partial) => {
            export::commit_out_dir(&out)?;
            log::info!("results written to {}", out.display());
            Ok(partial)
        }
        Err(e) => {
            export::discard_staging(&out);
            Err(e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run(args) => {
            init_threads(args.threads);
            let config = load_config(&args)?;
            if config.scenario.is_sweep() {
                return Err(Error::config(format!(
                    "scenario '{}' sweeps a parameter axis; use the sweep subcommand",
                    config.scenario
                )));
            }
            execute_run(&config)
        }
        Command::Sweep(args) => {
            init_threads(args.threads);
            let config = load_config(&args)?;
            if !config.scenario.is_sweep() {
                return Err(Error::config(format!(
                    "scenario '{}' is a single run; use the run subcommand",
                    config.scenario
                )));
            }
            execute_run(&config)
        }
        Command::Spectrum(args) => {
            init_threads(args.threads);
            let mut config = load_config(&args)?;
            config.scenario = Scenario::Spectrum;
            execute_run(&config)
        }
        Command::Fit { input, out } => {
            fit_table::fit_from_csv(&input, out.as_deref())?;
            Ok(false)
        }
        Command::Render { input, out } => {
            render::render_csv(&input, out.as_deref())?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            log::warn!("experiment completed partially; see metadata.json");
            ExitCode::from(3)
        }
        Err(e) => {
            log::error!("{e}");
            exit_code_for(&e)
        }
    }
}
