mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use geo2sound::config::PipelineConfig;
use geo2sound::hypothesis::HypothesisMode;

/// Satellite-to-soundscape pipeline stages.
#[derive(Debug, Parser)]
#[command(name = "geo2sound", version, about)]
struct Cli {
    /// TOML pipeline config; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every stochastic step (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scene-level parallelism. Outputs do not depend on it.
    #[arg(long, global = true, value_name = "J")]
    jobs: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Geo descriptors for every scene of a manifest, written as geo.csv.
    ExtractAttrs(ExtractArgs),
    /// Fit the land-cover forest on pseudo-labelled clusters.
    TrainAttrsClassifier(TrainForestArgs),
    /// Train the geo-to-audio projection.
    TrainAlign(TrainAlignArgs),
    /// Rank each scene's candidates and keep the best one.
    Select(SelectArgs),
    /// Distribution metrics between generated and reference runs.
    Evaluate(EvaluateArgs),
    /// Desk-scale benchmark on a synthetic world.
    SynthBench(SynthBenchArgs),
    /// Write a synthetic world (tensors plus manifest) to disk.
    SynthWorld(SynthWorldArgs),
    /// Candidate generation plans from the manifest captions.
    HypothesisPlan(PlanArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    forest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the scenes that succeeded instead of failing on the first error.
    #[arg(long)]
    keep_going: bool,
    /// K-means cluster count.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    min_area: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainForestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainAlignArgs {
    /// geo.csv, rows in the same order as the targets.
    #[arg(long)]
    geo: PathBuf,
    /// `n × D` audio embeddings (.npy).
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training history JSON; defaults to `<out>.history.json`.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    pca_dims: Option<usize>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Descriptors to use instead of the ones stored in the manifest.
    #[arg(long)]
    geo: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gen_dir: PathBuf,
    #[arg(long)]
    ref_dir: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Optional per-scene CSV.
    #[arg(long)]
    per_scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthBenchArgs {
    #[arg(long)]
    out: PathBuf,
    /// Where model.bin and forest.json go; defaults to the report's directory.
    #[arg(long)]
    artifacts_dir: Option<PathBuf>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthWorldArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    candidates: Option<usize>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// ours, control or basic.
    #[arg(long)]
    mode: Option<HypothesisMode>,
    /// Candidates per scene.
    #[arg(long)]
    candidates: Option<usize>,
    /// Write one expansion prompt per scene into this directory.
    #[arg(long)]
    emit_prompts: Option<PathBuf>,
    /// Directory of `<scene_id>.txt` model responses holding the two
    /// expansions.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Submit the plans to the generator and record the returned artifacts.
    #[arg(long)]
    generate: bool,
    /// Read pre-generated embeddings from this directory instead of calling
    /// the service named by the generator URL variable.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<PipelineConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.apply_seed();
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::ExtractAttrs(a) => commands::extract_attrs(cfg, a),
        Command::TrainAttrsClassifier(a) => commands::train_attrs_classifier(cfg, a),
        Command::TrainAlign(a) => commands::train_align(cfg, a),
        Command::Select(a) => commands::select(cfg, a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SynthBench(a) => commands::synth_bench(cfg, a),
        Command::SynthWorld(a) => commands::synth_world(cfg, a),
        Command::HypothesisPlan(a) => commands::hypothesis_plan(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version print to stdout and exit 0; usage errors exit 2
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
