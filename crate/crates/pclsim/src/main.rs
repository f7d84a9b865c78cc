//! `pclsim` — experiment harness for the predictive closed-loop slicing
//! emulation: dataset generation, model training, static/dynamic runs, and
//! the side-by-side comparison with plots.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pclsim::nodesim::{RunMode, RunReport};
use pclsim::scenario::{
    cmd_compare, cmd_generate, cmd_run, cmd_train, load_config, ScenarioConfig,
};
use pclsim::Error;

#[derive(Parser)]
#[command(
    name = "pclsim",
    version,
    about = "Deterministic emulation of predictive closed-loop slice provisioning",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic KPI dataset as CSV.
    Generate(CommonArgs),
    /// Train LSTM/ARIMA/seasonal-naive models and print the accuracy table.
    Train(CommonArgs),
    /// Replay the test period under one provisioning mode.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Provisioning mode.
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// End-to-end static vs dynamic comparison with plot data and SVG.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed (and everything derived from it).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut config = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        if let Some(out) = &self.out {
            config = config.with_out_dir(out.clone());
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Dynamic,
}

impl From<ModeArg> for RunMode {
    fn from(mode: ModeArg) -> RunMode {
        match mode {
            ModeArg::Static => RunMode::Static,
            ModeArg::Dynamic => RunMode::Dynamic,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(args) => {
            let outcome = cmd_generate(&args.load()?)?;
            println!(
                "wrote {} ({} hours, {} cells, {} samples)",
                outcome.dataset_path.display(),
                outcome.hours,
                outcome.cells,
                outcome.samples
            );
        }
        Command::Train(args) => {
            let outcome = cmd_train(&args.load()?)?;
            print!("{}", outcome.table.render_text());
            println!(
                "persisted {} model files under {}",
                outcome.model_files,
                outcome.models_dir.display()
            );
            println!("accuracy table: {}", outcome.accuracy_csv.display());
        }
        Command::Run { common, mode } => {
            let outcome = cmd_run(&common.load()?, mode.into())?;
            print_totals(&outcome.report);
            println!("report: {}", outcome.report_csv.display());
            println!("totals: {}", outcome.totals_json.display());
        }
        Command::Compare(args) => {
            let outcome = cmd_compare(&args.load()?)?;
            print!("{}", outcome.table.render_text());
            println!(
                "models: {}",
                if outcome.trained { "trained this run" } else { "reused from output directory" }
            );
            print_totals(&outcome.static_run.report);
            print_totals(&outcome.dynamic_run.report);
            println!(
                "dynamic/static non-optimal ratio: {:.4} ({} vs {})",
                outcome.non_optimal_ratio,
                outcome.dynamic_run.report.grand.non_optimal,
                outcome.static_run.report.grand.non_optimal
            );
            println!("comparison: {}", outcome.compare_json.display());
            for path in &outcome.plot_csvs {
                println!("plot data: {}", path.display());
            }
            println!("plot: {}", outcome.svg_path.display());
        }
    }
    Ok(())
}

fn print_totals(report: &RunReport) {
    println!(
        "{}: hours={} under_served={} over_served={} non_optimal={} actual_ue_hours={}",
        report.mode.as_str(),
        report.test_hours,
        report.grand.under_served,
        report.grand.over_served,
        report.grand.non_optimal,
        report.grand.actual_ue_hours
    );
    for (slice, totals) in &report.per_slice {
        println!(
            "  slice {slice}: under_served={} over_served={} non_optimal={}",
            totals.under_served, totals.over_served, totals.non_optimal
        );
    }
}
