use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psynorm::config::{ExperimentConfig, Regime};
use psynorm::gateway::MockPersonality;
use psynorm::pipeline::{self, Overrides, PipelineError, Stage};
use psynorm::report::ReportFiles;

#[derive(Parser)]
#[command(
    name = "psynorm",
    version,
    about = "Elicit and evaluate psycholinguistic norm predictions from language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the configured regime
    #[arg(long, value_parser = parse_regime)]
    regime: Option<Regime>,
    /// Answer offline with a mock backend: oracle, constant or garbage
    #[arg(long, value_parser = parse_mock)]
    mock: Option<MockPersonality>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the dataset and write it in canonical form
    Ingest(Common),
    /// Prompt the model for the eval side and store parsed predictions
    Elicit(Common),
    /// Fine-tune the configured model on the train side
    Finetune(Common),
    /// Evaluate regression baselines over repeated splits
    Baselines(Common),
    /// Regenerate report tables from an existing run directory
    Report(Common),
    /// Run the whole pipeline
    Run(Common),
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: psynorm::Error| e.to_string())
}

fn parse_mock(s: &str) -> Result<MockPersonality, String> {
    s.parse()
}

fn load(c: &Common) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = ExperimentConfig::load(&c.config).map_err(|source| PipelineError {
        stage: Stage::Config,
        source,
    })?;
    Overrides {
        regime: c.regime,
        mock: c.mock,
        output_dir: c.out.clone(),
    }
    .apply(&mut cfg);
    cfg.validate().map_err(|source| PipelineError {
        stage: Stage::Config,
        source,
    })?;
    Ok(cfg)
}

fn print_report(files: &ReportFiles) {
    match std::fs::read_to_string(&files.metrics) {
        Ok(t) => print!("{t}"),
        Err(e) => eprintln!("cannot read {}: {e}", files.metrics.display()),
    }
    println!(
        "report written to {}",
        files.metrics.parent().unwrap_or(&files.metrics).display()
    );
}

fn dispatch(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Ingest(c) => {
            let cfg = load(&c)?;
            pipeline::run_ingest_stage(&cfg, &mut std::io::stdout())?;
        }
        Command::Elicit(c) => {
            let cfg = load(&c)?;
            let run = pipeline::run_elicit_stage(&cfg)?;
            println!(
                "{} {}: {} items, coverage {:.4}, predictions in {}",
                run.regime, run.model, run.items, run.coverage, run.predictions_file
            );
        }
        Command::Finetune(c) => {
            let cfg = load(&c)?;
            let job = pipeline::run_finetune_stage(&cfg)?;
            println!(
                "job {}: {:?}, model {}",
                job.job_id,
                job.status,
                job.result_model.as_deref().unwrap_or("-")
            );
        }
        Command::Baselines(c) => {
            let cfg = load(&c)?;
            for b in pipeline::run_baselines_stage(&cfg)? {
                match (&b.evaluation, &b.error) {
                    (Some(e), _) => println!(
                        "{}\tmean_r2={:.4}\tsd={:.4}\tsplits={}\trows={}\tdropped={}",
                        b.predictor, e.mean_r2, e.sd_r2, e.n_splits, b.rows, b.dropped
                    ),
                    (None, err) => println!("{}\tundefined\t{}", b.predictor, err.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Report(c) => {
            let cfg = load(&c)?;
            print_report(&pipeline::run_report_stage(&cfg)?);
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let outcome = pipeline::run_experiment(&cfg)?;
            print_report(&outcome.report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
