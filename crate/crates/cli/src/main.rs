use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tob_core::aggregation::AuxModel;
use tob_core::config::RunConfig;
use tob_core::fusion::{score_features, FusionModel};
use tob_core::pipeline::{self, Method};
use tob_core::seed;
use tob_core::thermal_io::load_video;

#[derive(Parser)]
#[command(name = "tob", version, about = "Time-of-birth detection in thermal video")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key; may be repeated, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic corpus of episodes.
    Generate(GenerateArgs),
    /// Fit the intensity mixture per video and rescale to [0, 1].
    Normalize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the per-frame visible-newborn head.
    TrainImageHead {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the two-stream fusion layers on top of a frozen image head.
    TrainFusion {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        image_head: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-second score tables for a normalized corpus.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the score aggregation model.
    TrainAgg {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate birth times, for one raw video or a directory of scores.
    Detect(DetectArgs),
    /// Summarize detections into a report.
    Evaluate {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage with artifacts under one directory.
    RunAll {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate in memory without writing videos to disk.
    Experiment {
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Corpus to render; selects the default size and seed stream.
    #[arg(long, default_value = "train", value_parser = ["train", "test"])]
    split: String,
    /// Number of episodes (defaults to n_train or n_test).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    /// Fusion model, used with --video.
    #[arg(long, requires = "video")]
    model: Option<PathBuf>,
    /// Raw video to normalize and score.
    #[arg(long)]
    video: Option<PathBuf>,
    /// Where to write the per-second table of a single video.
    #[arg(long, requires = "video")]
    scores_out: Option<PathBuf>,
    /// Aggregation model.
    #[arg(long)]
    agg: Option<PathBuf>,
    /// Directory of score tables (batch mode).
    #[arg(long, conflicts_with = "video", requires = "agg")]
    scores: Option<PathBuf>,
    /// Output directory (batch mode).
    #[arg(long, requires = "scores")]
    out: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(&cli.overrides)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn fmt_estimate(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_owned(), |t| t.to_string())
}

fn detect(args: &DetectArgs, config: &RunConfig) -> Result<()> {
    if let Some(scores) = &args.scores {
        let agg = args.agg.as_deref().context("--agg is required with --scores")?;
        let out = args.out.as_deref().context("--out is required with --scores")?;
        for d in pipeline::detect_stage(agg, scores, out, config)? {
            let e = d.estimate(Method::TwoStreamAgg).and_then(|e| e.t_hat);
            println!("{}: tob_estimate: {}", d.id, fmt_estimate(e));
        }
        return Ok(());
    }
    let (Some(model), Some(video)) = (&args.model, &args.video) else {
        bail!("detect needs either --model and --video, or --agg and --scores");
    };
    let fusion = FusionModel::load(model)?;
    let raw = load_video(video)?;
    let normalized = pipeline::normalize(&raw, config)?;
    let scores = score_features(&fusion, &pipeline::extract_features(&normalized, config)?)?;
    let table = match &args.agg {
        Some(agg) => {
            let aux = AuxModel::load(agg)?;
            let d = pipeline::detect(&raw.id, &scores, &aux, config)?;
            let e = d.estimate(Method::TwoStreamAgg).and_then(|e| e.t_hat);
            println!("tob_estimate: {}", fmt_estimate(e));
            d.to_csv()
        }
        None => scores.to_csv(),
    };
    match &args.scores_out {
        Some(path) => write(path, &table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Generate(a) => {
            let (n, stream) = match a.split.as_str() {
                "test" => (config.n_test, "test-corpus"),
                _ => (config.n_train, "train-corpus"),
            };
            let ids = pipeline::generate_stage(
                &a.out,
                a.n.unwrap_or(n),
                config.theater_share,
                &config.scene(),
                seed::derive(config.seed, stream),
            )?;
            println!("generated {} episodes in {}", ids.len(), a.out.display());
        }
        Command::Normalize { corpus, out } => pipeline::normalize_stage(corpus, out, &config)?,
        Command::TrainImageHead { corpus, out } => {
            let r = pipeline::train_image_head_stage(corpus, out, &config)?;
            println!("image head: best validation loss {:.6} at epoch {}", r.val_losses[r.best_epoch], r.best_epoch);
        }
        Command::TrainFusion {
            corpus,
            image_head,
            out,
        } => {
            let r = pipeline::train_fusion_stage(corpus, image_head, out, &config)?;
            println!("fusion: best validation loss {:.6} at epoch {}", r.val_losses[r.best_epoch], r.best_epoch);
        }
        Command::Score { model, corpus, out } => pipeline::score_stage(model, corpus, out, &config)?,
        Command::TrainAgg { scores, truth, out } => {
            let r = pipeline::train_agg_stage(scores, truth, out, &config)?;
            println!("aggregation: best validation loss {:.6} at epoch {}", r.val_losses[r.best_epoch], r.best_epoch);
        }
        Command::Detect(a) => detect(a, &config)?,
        Command::Evaluate { runs, truth, out } => {
            print!("{}", pipeline::evaluate_stage(runs, truth, out)?.render());
        }
        Command::RunAll { out } => {
            print!("{}", pipeline::run_all(&config, out)?.render());
        }
        Command::Experiment { report } => {
            let outcome = pipeline::run_experiment(&config)?;
            let text = outcome.report.render();
            if let Some(path) = report {
                write(path, &text)?;
            }
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
