//! Experiment driver: runs the certified pipeline (map, periodic sources,
//! zooming data, induced Markov map, tower measures, statistics) from a JSON
//! config, writing one machine-readable report per stage.

mod config;
mod report;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, StageName};
use report::{OutputFormat, Reporter};
use stages::{exit_codes, run_stage, PipelineState, StageFailure};

#[derive(Parser)]
#[command(
    name = "towerdyn",
    about = "Torus endomorphism pipeline: zooming times, induced Markov maps, tower measures, ergodic statistics",
    version
)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores; no effect on results).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Report format for data artifacts.
    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        other => Err(format!("unknown format `{other}` (expected json or csv)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print map family, dimension, degree and certified constants.
    MapInfo,
    /// Periodic-point sweep with hyperbolicity classification.
    Periodic,
    /// Pre-orbit density certificate for a point (or the found source).
    PreorbitDensity,
    /// Certify the shipped 2-D example: hypotheses and class membership.
    VerifyExample,
    /// Zooming-time frequency scan along an orbit.
    ZoomingScan,
    /// Build and certify the induced first-return Markov map.
    BuildInduced,
    /// Attach Bernoulli weights and sample the projected measure.
    MeasureSample {
        /// Reuse a previously written induced-map document instead of
        /// rebuilding the partition.
        #[arg(long)]
        induced_doc: Option<PathBuf>,
    },
    /// Lyapunov exponents via the QR cocycle.
    Lyapunov,
    /// Correlation decay curve with exponential fit.
    Correlations,
    /// Run the config's stage list in dependency order.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            if let Some(sf) = err.downcast_ref::<StageFailure>() {
                eprintln!("{sf}");
                ExitCode::from(sf.code as u8)
            } else {
                eprintln!("[config] {err}");
                ExitCode::from(exit_codes::CONFIG as u8)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if let Err(msg) = towerdyn::exec::configure_threads(threads) {
            eprintln!("[config] --threads {threads}: {msg}");
        }
    }

    let stage_list: Vec<StageName> = match &cli.command {
        Command::MapInfo => vec![StageName::MapInfo],
        Command::Periodic => vec![StageName::Periodic],
        Command::PreorbitDensity => {
            // density targets default to the source, so find it first when
            // no explicit point was given
            match cfg.preorbit.as_ref().and_then(|p| p.point.clone()) {
                Some(_) => vec![StageName::PreorbitDensity],
                None => vec![StageName::Periodic, StageName::PreorbitDensity],
            }
        }
        Command::VerifyExample => vec![StageName::VerifyExample],
        Command::ZoomingScan => vec![StageName::ZoomingScan],
        Command::BuildInduced => vec![
            StageName::Periodic,
            StageName::SourceZooming,
            StageName::Induced,
        ],
        Command::MeasureSample { .. } => vec![
            StageName::Periodic,
            StageName::SourceZooming,
            StageName::Induced,
            StageName::Measures,
        ],
        Command::Lyapunov | Command::Correlations => {
            let needs_tower = cfg.stats.as_ref().is_some_and(|s| {
                let lyap = matches!(&cli.command, Command::Lyapunov)
                    && s.lyapunov.sampler == config::SamplerChoice::Tower;
                let corr = matches!(&cli.command, Command::Correlations)
                    && s.correlations.sampler == config::SamplerChoice::Tower;
                lyap || corr
            });
            if needs_tower {
                vec![
                    StageName::Periodic,
                    StageName::SourceZooming,
                    StageName::Induced,
                    StageName::Measures,
                    StageName::Stats,
                ]
            } else {
                vec![StageName::Stats]
            }
        }
        Command::Pipeline => {
            anyhow::ensure!(
                !cfg.stages.is_empty(),
                "the pipeline subcommand needs a non-empty `stages` list in the config"
            );
            cfg.stages.clone()
        }
    };

    let mut reporter = Reporter::new(&cli.out, cli.format)?;
    let mut state = PipelineState::build(&cfg)?;

    // the measure-sample shortcut: replay a stored induced document
    if let Command::MeasureSample {
        induced_doc: Some(path),
    } = &cli.command
    {
        let text = std::fs::read_to_string(path)?;
        let doc: towerdyn::induced::InducedMapDocument = serde_json::from_str(&text)?;
        let induced =
            towerdyn::induced::InducedMarkovMap::from_document(state.map.as_ref(), &doc)?;
        eprintln!(
            "[measures] replayed induced document with {} cells from {}",
            induced.cells.len(),
            path.display()
        );
        state.induced = Some(std::sync::Arc::new(induced));
        stages::run_measures(&cfg, &mut state, &mut reporter)?;
        let summary = reporter.finish(cfg.seed)?;
        return Ok(if summary.all_passed {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(exit_codes::MEASURES as u8)
        });
    }

    let mut failure: Option<StageFailure> = None;
    for stage in stage_list {
        match run_stage(stage, &cfg, &mut state, &mut reporter) {
            Ok(()) => {}
            Err(err) => {
                {
                    let sf = err.downcast::<StageFailure>()?;
                    eprintln!("{sf}");
                    reporter.record(sf.stage, false, sf.message.clone());
                    failure = Some(sf);
                }
                break;
            }
        }
    }

    let summary = reporter.finish(cfg.seed)?;
    if let Some(sf) = failure {
        return Ok(ExitCode::from(sf.code as u8));
    }
    if !summary.all_passed {
        // a stage reported a failed certificate without aborting the run
        let first_failed = summary
            .stages
            .iter()
            .find(|s| !s.passed)
            .map(|s| s.stage.clone())
            .unwrap_or_default();
        eprintln!("[summary] certificate failed in stage {first_failed}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}
