//! The `pointillism` command line: synthetic data, point sampling, simulated
//! or served campaigns, evaluation, dataset statistics and figure data.

mod commands;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointillism_core::sampling::StrategyKind;
use pointillism_core::synth::{DegradationSpec, Generator};

pub use error::CliError;
pub use manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "pointillism", version, about = "Point-wise yes/no annotation for semantic segmentation")]
pub struct Cli {
    /// Worker threads for data-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic campaign directory: scenes, ground truth, score maps.
    Synth(SynthArgs),
    /// Select the points a campaign would ask about on each image.
    Sample(SampleArgs),
    /// Run a campaign with simulated annotators, in process or against a server.
    Campaign(CampaignArgs),
    /// Rank methods by point IoU and compare against dense IoU.
    Eval(EvalArgs),
    /// Summarize a point-label CSV.
    Stats(StatsArgs),
    /// Serve one or more campaigns over HTTP.
    Serve(ServeArgs),
    /// Emit the CSV tables behind the experiment figures.
    Figdata(FigdataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Exact one-hot scores.
    Identity,
    /// About 90% top-1 accuracy, true class nearly always in the top 3.
    Top3Faithful,
    /// About 85% top-1 accuracy with errors concentrated on boundaries.
    BoundaryConfused,
}

impl Preset {
    pub fn spec(self, seed: u64) -> DegradationSpec {
        match self {
            Preset::Identity => DegradationSpec::identity(seed),
            Preset::Top3Faithful => DegradationSpec::top3_faithful(seed),
            Preset::BoundaryConfused => DegradationSpec::boundary_confused(seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 20)]
    pub classes: usize,
    #[arg(long, default_value_t = 8)]
    pub regions: usize,
    #[arg(long, default_value_t = Generator::Voronoi)]
    pub generator: Generator,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub scenes: usize,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Score-map degradation applied to each ground truth.
    #[arg(long, value_enum, default_value_t = Preset::Top3Faithful)]
    pub preset: Preset,
    /// Independently degraded score maps per image (3 for ensemble strategies).
    #[arg(long, default_value_t = 1)]
    pub members: usize,
    /// Campaign settings stored in campaign.cfg.
    #[arg(long, default_value_t = 50)]
    pub ppi: usize,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long, default_value_t = 3)]
    pub max_rounds: u32,
    #[arg(long, default_value = "uniform", value_parser = parse_strategy)]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Overrides of a campaign directory's stored config.
#[derive(Debug, Args)]
pub struct ConfigOverrides {
    #[arg(long)]
    pub ppi: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<StrategyKind>,
    /// Replication: annotators asked per question.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub max_rounds: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Campaign directory.
    #[arg(long)]
    pub campaign: PathBuf,
    #[arg(long)]
    pub ppi: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<StrategyKind>,
    /// Replaces the strategy seed from campaign.cfg.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Campaign directory (ground truth drives the simulated answers).
    #[arg(long)]
    pub campaign: PathBuf,
    /// Answer in process without a server.
    #[arg(long, conflicts_with = "server", required_unless_present = "server")]
    pub simulate: bool,
    /// Base URL of a running server, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    pub server: Option<String>,
    /// Campaign name on a server that hosts several.
    #[arg(long, requires = "server")]
    pub name: Option<String>,
    /// Concurrent simulated annotators in server mode.
    #[arg(long, default_value_t = 16)]
    pub annotators: usize,
    /// Probability that a simulated answer is wrong.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Probability that a simulated answer is UNSURE.
    #[arg(long, default_value_t = 0.0)]
    pub unsure: f64,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 50)]
    pub ppi: usize,
    #[arg(long, default_value_t = 5)]
    pub draws: usize,
    /// Directory of ground-truth PGM label maps. Without it the synthetic
    /// method benchmark is generated.
    #[arg(long, requires_all = ["method", "classes"])]
    pub gt: Option<PathBuf>,
    /// `ID=DIR` of one method's predictions, named like the ground truth.
    #[arg(long, requires = "gt")]
    pub method: Vec<String>,
    /// Class count of the label maps given with --gt.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub frame_size: usize,
    #[arg(long, default_value_t = 15)]
    pub methods: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Point-label CSV.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Campaign directory, optionally `NAME=DIR`; repeat to host several.
    #[arg(long, required = true)]
    pub campaign: Vec<String>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// fsync the answer log after every answer.
    #[arg(long)]
    pub fsync: bool,
}

#[derive(Debug, Args)]
pub struct FigdataArgs {
    /// Scenes per synthetic experiment.
    #[arg(long, default_value_t = 200)]
    pub scenes: usize,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Points per scene for the class-rank histogram.
    #[arg(long, default_value_t = 20)]
    pub efficiency_ppi: usize,
    #[arg(long, default_value_t = 3)]
    pub max_rounds: u32,
    /// Points per scene for strategy complementarity.
    #[arg(long, default_value_t = 10)]
    pub strategy_ppi: usize,
    /// Point budgets of the tau and dense-vs-point tables.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
    pub eval_ppis: Vec<usize>,
    /// Point budgets of the reconstruction curve.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,50")]
    pub reconstruction_ppis: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub frame_size: usize,
    #[arg(long, default_value_t = 15)]
    pub methods: usize,
    #[arg(long, default_value_t = 5)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.token()).collect();
        format!("unknown strategy {s:?}; expected one of {}", names.join(", "))
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Sample(a) => commands::sample(a),
        Command::Campaign(a) => commands::campaign(a),
        Command::Eval(a) => commands::eval(a),
        Command::Stats(a) => commands::stats(a),
        Command::Serve(a) => commands::serve(a),
        Command::Figdata(a) => commands::figdata(a),
    }
}
