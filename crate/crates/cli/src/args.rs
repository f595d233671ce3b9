use std::path::PathBuf;

use attlist::data::{LoadOptions, SyntheticSpec};
use attlist::eval::CandidatePolicy;
use attlist::model::AblationVariant;
use attlist::training::TrainConfig;
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand, ValueEnum};

/// Clipping threshold when `--clip-norm` is given without a value.
const DEFAULT_CLIP_NORM_STR: &str = "5.0";

fn defaults() -> TrainConfig {
    TrainConfig::default()
}

fn synthetic() -> SyntheticSpec {
    SyntheticSpec::default()
}

#[derive(Debug, Parser)]
#[command(name = "attlist", version, about = "Recommend user-generated item lists")]
pub struct Cli {
    /// Worker threads for evaluation (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load raw files, filter, split and write a prepared dataset.
    Prepare(PrepareArgs),
    /// Generate a planted-topic dataset and write it prepared.
    Synthesize(SynthesizeArgs),
    /// Train a model and write checkpoints and the epoch log.
    Train(TrainArgs),
    /// Score a checkpoint (or a non-parametric ranker) on a split.
    Evaluate(EvaluateArgs),
    /// Train and test each architecture variant under one seed.
    Ablate(AblateArgs),
    /// Write attention scores for chosen users and lists.
    ExportAttention(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    pub split: Vec<f64>,

    /// Profile length recorded in the manifest.
    #[arg(long = "N", default_value_t = defaults().max_lists)]
    pub max_lists: usize,

    /// List length recorded in the manifest.
    #[arg(long = "M", default_value_t = defaults().max_items)]
    pub max_items: usize,
}

impl SplitArgs {
    pub fn fractions(&self) -> [f64; 3] {
        [self.split[0], self.split[1], self.split[2]]
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Raw interactions, `user<TAB>list` per line.
    #[arg(long)]
    pub interactions: PathBuf,

    /// Raw containment, `list<TAB>item<TAB>position` per line.
    #[arg(long)]
    pub containment: PathBuf,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Split seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Drop items contained in fewer lists than this.
    #[arg(long, default_value_t = LoadOptions::default().min_item_frequency)]
    pub min_item_frequency: usize,

    /// Drop users with fewer interactions than this.
    #[arg(long, default_value_t = LoadOptions::default().min_user_interactions)]
    pub min_user_interactions: usize,

    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Generator and split seed.
    #[arg(long, default_value_t = synthetic().seed)]
    pub seed: u64,

    #[arg(long, default_value_t = synthetic().users)]
    pub users: usize,

    #[arg(long, default_value_t = synthetic().lists)]
    pub lists: usize,

    #[arg(long, default_value_t = synthetic().items)]
    pub items: usize,

    #[arg(long, default_value_t = synthetic().topics)]
    pub topics: usize,

    /// Probability that a list slot or an interaction ignores topics.
    #[arg(long, default_value_t = synthetic().noise)]
    pub noise: f64,

    /// Power-law exponent of interactions per user.
    #[arg(long, default_value_t = synthetic().activity_exponent)]
    pub activity_exponent: f64,

    #[arg(long, default_value_t = synthetic().min_activity)]
    pub min_activity: usize,

    #[arg(long, default_value_t = synthetic().max_activity)]
    pub max_activity: usize,

    /// Power-law exponent of list length.
    #[arg(long, default_value_t = synthetic().length_exponent)]
    pub length_exponent: f64,

    #[arg(long, default_value_t = synthetic().min_list_length)]
    pub min_list_length: usize,

    #[arg(long, default_value_t = synthetic().max_list_length)]
    pub max_list_length: usize,

    /// Zipf exponent of list popularity within a topic.
    #[arg(long, default_value_t = synthetic().popularity_exponent)]
    pub popularity_exponent: f64,

    /// Zipf exponent of item popularity within a topic.
    #[arg(long, default_value_t = synthetic().item_popularity_exponent)]
    pub item_popularity_exponent: f64,

    #[command(flatten)]
    pub split: SplitArgs,
}

impl SynthesizeArgs {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            users: self.users,
            lists: self.lists,
            items: self.items,
            topics: self.topics,
            activity_exponent: self.activity_exponent,
            min_activity: self.min_activity,
            max_activity: self.max_activity,
            length_exponent: self.length_exponent,
            min_list_length: self.min_list_length,
            max_list_length: self.max_list_length,
            popularity_exponent: self.popularity_exponent,
            item_popularity_exponent: self.item_popularity_exponent,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Attlist,
    Itempop,
    Mf,
    Bpr,
    Oracle,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Attlist => "attlist",
            ModelKind::Itempop => "itempop",
            ModelKind::Mf => "mf",
            ModelKind::Bpr => "bpr",
            ModelKind::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl From<SplitName> for attlist::data::Split {
    fn from(s: SplitName) -> Self {
        match s {
            SplitName::Train => attlist::data::Split::Train,
            SplitName::Validation => attlist::data::Split::Validation,
            SplitName::Test => attlist::data::Split::Test,
        }
    }
}

/// Hyperparameters shared by every command that trains or checks a
/// configuration. Only flags given on the command line override the
/// config file or checkpoint.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML file with training settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = defaults().seed)]
    pub seed: u64,

    /// Latent dimension d.
    #[arg(long = "d", default_value_t = defaults().dim)]
    pub dim: usize,

    /// Predictive factors D.
    #[arg(long = "D", default_value_t = defaults().hidden)]
    pub hidden: usize,

    /// Lists per user profile N.
    #[arg(long = "N", default_value_t = defaults().max_lists)]
    pub max_lists: usize,

    /// Items per list M.
    #[arg(long = "M", default_value_t = defaults().max_items)]
    pub max_items: usize,

    /// Negatives per positive.
    #[arg(long, default_value_t = defaults().rho)]
    pub rho: usize,

    /// Dropout rate.
    #[arg(long, default_value_t = defaults().dropout)]
    pub gamma: f64,

    /// L2 strength on the attention weights.
    #[arg(long, default_value_t = defaults().l2)]
    pub lambda: f64,

    #[arg(long, default_value_t = defaults().learning_rate)]
    pub lr: f64,

    #[arg(long, default_value_t = defaults().batch_size)]
    pub batch: usize,

    #[arg(long, default_value_t = defaults().patience)]
    pub patience: u64,

    #[arg(long, default_value_t = defaults().max_epochs)]
    pub max_epochs: u64,

    /// Rank only lists not seen in earlier splits.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    pub exclude_seen: bool,

    /// Clip the joint gradient norm.
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_CLIP_NORM_STR)]
    pub clip_norm: Option<f64>,

    /// Mean pooling instead of learned attention pooling.
    #[arg(long)]
    pub no_vanilla_attention: bool,

    #[arg(long)]
    pub no_self_attention: bool,

    #[arg(long)]
    pub no_residual: bool,

    #[arg(long)]
    pub no_position: bool,

    #[arg(long)]
    pub no_id_embeddings: bool,

    /// Add Q/K/V projections inside self-attention.
    #[arg(long)]
    pub linear_projections: bool,

    /// Let padding slots enter the attention softmaxes.
    #[arg(long)]
    pub no_padding_mask: bool,

    /// Pool refined rather than raw list vectors into the user vector.
    #[arg(long)]
    pub aggregate_refined: bool,
}

impl ConfigArgs {
    /// Overwrites the fields of `cfg` whose flags were given explicitly.
    pub fn overlay(&self, cfg: &mut TrainConfig, m: &ArgMatches) {
        let given = |id: &str| m.value_source(id) == Some(ValueSource::CommandLine);
        macro_rules! set {
            ($id:literal, $field:expr, $value:expr) => {
                if given($id) {
                    $field = $value;
                }
            };
        }
        set!("seed", cfg.seed, self.seed);
        set!("dim", cfg.dim, self.dim);
        set!("hidden", cfg.hidden, self.hidden);
        set!("max_lists", cfg.max_lists, self.max_lists);
        set!("max_items", cfg.max_items, self.max_items);
        set!("rho", cfg.rho, self.rho);
        set!("gamma", cfg.dropout, self.gamma);
        set!("lambda", cfg.l2, self.lambda);
        set!("lr", cfg.learning_rate, self.lr);
        set!("batch", cfg.batch_size, self.batch);
        set!("patience", cfg.patience, self.patience);
        set!("max_epochs", cfg.max_epochs, self.max_epochs);
        set!(
            "exclude_seen",
            cfg.candidates,
            if self.exclude_seen { CandidatePolicy::ExcludeSeen } else { CandidatePolicy::All }
        );
        set!("clip_norm", cfg.clip_norm, self.clip_norm);
        let a = &mut cfg.ablation;
        set!("no_vanilla_attention", a.use_vanilla_attention, false);
        set!("no_self_attention", a.use_self_attention, false);
        set!("no_residual", a.use_residual, false);
        set!("no_position", a.use_position, false);
        set!("no_id_embeddings", a.use_id_embeddings, false);
        set!("linear_projections", a.use_linear_projections, true);
        set!("no_padding_mask", a.mask_padding, false);
        set!("aggregate_refined", a.aggregate_refined_at_list_level, true);
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: PathBuf,

    /// Output directory for checkpoints, logs and reports.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = ModelKind::Attlist)]
    pub model: ModelKind,

    /// Continue from the `last.json` and `best.json` in this directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// Ignore config and dataset mismatches when resuming.
    #[arg(long)]
    pub force: bool,

    /// Poison the output layer before EPOCH:BATCH.
    #[arg(long, hide = true, value_parser = parse_epoch_batch)]
    pub inject_nan: Option<(u64, usize)>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

fn parse_epoch_batch(s: &str) -> Result<(u64, usize), String> {
    let (e, b) = s.split_once(':').ok_or("expected EPOCH:BATCH")?;
    Ok((
        e.parse().map_err(|_| format!("bad epoch `{e}`"))?,
        b.parse().map_err(|_| format!("bad batch `{b}`"))?,
    ))
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: PathBuf,

    /// Checkpoint file; not needed for itempop and oracle.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Ranker to evaluate (default: the checkpoint's kind).
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,

    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,

    /// Directory for `metrics.txt` and `metrics.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Evaluate even if the config or dataset differs from the checkpoint.
    #[arg(long)]
    pub force: bool,

    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Variants to run besides the full model (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Vec<AblationVariant>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

fn parse_variant(s: &str) -> Result<AblationVariant, String> {
    s.parse().map_err(|e: attlist::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: PathBuf,

    /// AttList checkpoint file.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// User IDs to trace.
    #[arg(long = "user", required = true)]
    pub users: Vec<String>,

    /// Candidate list IDs (default: each user's top-ranked test candidate).
    #[arg(long = "list")]
    pub lists: Vec<String>,

    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
