use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scengen_core::config::RunConfig;
use scengen_core::fixture::FixtureOptions;
use scengen_core::pipeline;
use scengen_core::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "scengen", version, about = "Synthetic scenarios for renewable generation and hydro inflows")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "SCENGEN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit marginals, network, inflow and disaggregation models.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Archive path (default: <output_dir>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate monthly and hourly scenarios from a fitted model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Scenario CSV whose evidence stations are clamped.
        #[arg(long)]
        evidence: Option<PathBuf>,
    },
    /// Compare scenarios with the historical record.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Scenario CSV or the directory holding scenarios_monthly.csv.
        #[arg(long)]
        scenarios: PathBuf,
    },
    /// Write the synthetic dataset with known ground truth.
    MakeFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        stations: usize,
        #[arg(long, default_value_t = 30)]
        years: usize,
        /// Monthly data only.
        #[arg(long)]
        no_hourly: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Io => 1,
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let r = pipeline::cmd_fit(&cfg, out.as_deref())?;
            println!("{}", r.archive_path.display());
        }
        Command::Simulate {
            config,
            model,
            evidence,
        } => {
            let cfg = RunConfig::load(&config)?;
            let r = pipeline::cmd_simulate(&cfg, &model, evidence.as_deref())?;
            for f in &r.files {
                println!("{}", f.display());
            }
        }
        Command::Validate {
            config,
            model,
            scenarios,
        } => {
            let cfg = RunConfig::load(&config)?;
            let r = pipeline::cmd_validate(&cfg, &model, &scenarios)?;
            println!(
                "pass fraction {:.4} ({}/{} pairs), mean |Δr| {:.4}",
                r.report.pass_fraction, r.report.passed_pairs, r.report.tested_pairs, r.report.mean_abs_corr_diff
            );
            println!("{}", r.dir.display());
        }
        Command::MakeFixture {
            out,
            seed,
            stations,
            years,
            no_hourly,
        } => {
            let opts = FixtureOptions {
                n_stations: stations,
                years,
                hourly: !no_hourly,
                seed,
                ..FixtureOptions::default()
            };
            pipeline::make_fixture(&out, &opts)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
