use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "dpnn",
    version,
    about = "Differential prototypes network pipeline",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic cohort with planted clusters.
    Synth(SynthArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Repeated stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Leave-one-study-out validation.
    Loso(LosoArgs),
    /// Assign patients to prototypes and tabulate per-cluster outcomes.
    Clusters(ClustersArgs),
    /// Similarity report for a single patient.
    Report(ReportArgs),
    /// Surrogate decision tree over cluster labels, or its stability across retrainings.
    Tree(TreeArgs),
    /// Kruskal-Wallis and Dunn tests of each feature across clusters.
    Stats(StatsArgs),
    /// Principal component analysis of the merged features.
    Pca(PcaArgs),
    /// Hyperparameter grid search.
    Gridsearch(GridArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Keep sertraline-treated patients from the SUND study (excluded by default).
    #[arg(long)]
    pub include_sertraline_arm: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output dataset CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Output planted labels CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Generator configuration JSON; replaces the reference profile.
    #[arg(long, conflicts_with_all = ["n", "separation"])]
    pub config: Option<PathBuf>,
    /// Cohort size for the reference profile.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cluster separation for the reference profile.
    #[arg(long)]
    pub separation: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Hyperparameters JSON.
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Output per-epoch loss trace JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Hyperparameter JSON; omitted fields take their defaults.
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    /// Folds per repeat.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Independently shuffled repeats of the fold assignment.
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    /// Decision threshold for sensitivity, specificity, PPV, NPV and F1.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Population remission rate that the matched-treatment rate is compared to.
    #[arg(long, default_value_t = dpnn_core::eval::DEFAULT_BASELINE)]
    pub baseline: f64,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Output text table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LosoArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Hyperparameter JSON; omitted fields take their defaults.
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    /// Study to hold out.
    #[arg(long, required_unless_present = "all_studies")]
    pub study: Option<String>,
    /// Hold out each study in turn.
    #[arg(long, conflicts_with = "study")]
    pub all_studies: bool,
    /// Decision threshold for sensitivity, specificity, PPV, NPV and F1.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClustersArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Output cluster report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Output `patient_id,cluster` CSV.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Output feature histogram JSON.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
    /// Output text table of per-cluster treatment rankings.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Cells with fewer patients are flagged low-confidence.
    #[arg(long, default_value_t = dpnn_core::interpret::DEFAULT_MIN_CELL)]
    pub min_cell: usize,
    /// Planted labels CSV; adds the adjusted Rand index to the report.
    #[arg(long)]
    pub planted: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Patient id to report on.
    #[arg(long)]
    pub patient: String,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "clusters", "runs"])))]
pub struct TreeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Derive cluster labels from this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cluster labels CSV.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Retrain this many times and report top-level feature frequencies.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Hyperparameters for stability retraining.
    #[arg(long, requires = "runs")]
    pub hyper: Option<PathBuf>,
    /// Maximum tree depth; the root is depth 0.
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    /// Minimum rows on each side of a split.
    #[arg(long, default_value_t = 10)]
    pub min_leaf: usize,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Output indented text rendering.
    #[arg(long, conflicts_with = "runs")]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "clusters"])))]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Derive cluster labels from this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cluster labels CSV.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PcaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Add race/ethnicity as a variable.
    #[arg(long)]
    pub include_race: bool,
    /// Leave the remission outcome out of the variables.
    #[arg(long)]
    pub exclude_remission: bool,
    /// Use the covariance of raw values instead of standardized ones.
    #[arg(long)]
    pub no_standardize: bool,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Grid specification JSON.
    #[arg(long)]
    pub grid: PathBuf,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}
