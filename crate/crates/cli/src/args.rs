use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "scene-embed",
    version,
    about = "Scene and object embeddings from annotated images"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parsing and distance computations.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Single-threaded, byte-reproducible run.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Read a corpus, filter rare labels and write canonical JSONL.
    Ingest(IngestArgs),
    /// Build the object x scene occurrence matrix.
    Matrix(MatrixArgs),
    /// Fit LSA embeddings by truncated SVD.
    TrainLsa(TrainLsaArgs),
    /// Train scene-to-object Skipgram embeddings.
    TrainSkipgram(TrainW2vArgs),
    /// Train object-to-scene CBOW embeddings.
    TrainCbow(TrainW2vArgs),
    /// Parse label maps and train object embeddings on spatial context.
    TrainSpatial(TrainSpatialArgs),
    /// Parse label maps into spatial context graphs.
    ParseSpatial(ParseSpatialArgs),
    /// Nearest neighbors of probe tokens.
    Neighbors(NeighborsArgs),
    /// Rank-sum test of within vs between supercategory distances.
    Ranksum(RanksumArgs),
    /// Components of the cosine-distance threshold graph.
    Graph(GraphArgs),
    /// Scene classification from projected object vectors.
    Classify(ClassifyArgs),
    /// Pairwise cosine-distance matrix as TSV.
    ExportDist(ExportDistArgs),
    /// Generate a synthetic corpus with planted supercategories.
    SynthCorpus(SynthCorpusArgs),
    /// Generate synthetic label maps with planted adjacent pairs.
    SynthSpatial(SynthSpatialArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Matrix(_) => "matrix",
            Command::TrainLsa(_) => "train-lsa",
            Command::TrainSkipgram(_) => "train-skipgram",
            Command::TrainCbow(_) => "train-cbow",
            Command::TrainSpatial(_) => "train-spatial",
            Command::ParseSpatial(_) => "parse-spatial",
            Command::Neighbors(_) => "neighbors",
            Command::Ranksum(_) => "ranksum",
            Command::Graph(_) => "graph",
            Command::Classify(_) => "classify",
            Command::ExportDist(_) => "export-dist",
            Command::SynthCorpus(_) => "synth-corpus",
            Command::SynthSpatial(_) => "synth-spatial",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Jsonl,
    Ade20k,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NormArg {
    Raw,
    Norm,
    Log,
    Tfidf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DistanceArg {
    OneMinus,
    Reciprocal,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorArg {
    Ring,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MethodArg {
    NearestCentroid,
    Logistic,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableArg {
    Markdown,
    Tsv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// JSONL file or ADE20K root directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
    /// Minimum number of images a scene or object label must occur in.
    #[arg(long, default_value_t = 5)]
    pub min_freq: usize,
    /// Minimum number of distinct objects an image must keep.
    #[arg(long, default_value_t = 2)]
    pub min_objects: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = NormArg::Raw)]
    pub norm: NormArg,
    /// Use ln(m/df) as idf for tfidf.
    #[arg(long)]
    pub idf_log: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainLsaArgs {
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub corpus: Option<PathBuf>,
    /// Occurrence matrix TSV written by `matrix`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Normalization applied before the SVD [default: norm for a corpus,
    /// none for a matrix].
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long)]
    pub idf_log: bool,
    /// Embedding dimension, typically 50, 100 or 300.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    /// Scale embedding rows by the singular values.
    #[arg(long)]
    pub scale: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Subsampling threshold; 0 disables subsampling.
    #[arg(long, default_value_t = 0.005)]
    pub subsample_t: f64,
    #[arg(long, default_value_t = 5)]
    pub n_positive: usize,
    #[arg(long, default_value_t = 20)]
    pub n_negative: usize,
    #[arg(long, default_value_t = 0.75)]
    pub neg_exponent: f64,
    /// Objects summed into one CBOW input.
    #[arg(long, default_value_t = 5)]
    pub context_size: usize,
    /// Resample negatives that fall inside the positive context.
    #[arg(long)]
    pub strict_negatives: Option<bool>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainW2vArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContextArgs {
    /// Dilation radius in pixels.
    #[arg(long, default_value_t = 3)]
    pub radius: usize,
    #[arg(long, value_enum, default_value_t = DistanceArg::OneMinus)]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value_t = DenominatorArg::Ring)]
    pub denominator: DenominatorArg,
    /// Part-of hops linked; unlimited when absent.
    #[arg(long)]
    pub part_depth: Option<usize>,
    /// Cache for decoded PNG label maps [env: SCENE_EMBED_CACHE].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainSpatialArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub context: ContextArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParseSpatialArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub context: ContextArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NeighborsArgs {
    /// Embedding TSV.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Token to query; repeat for several probes.
    #[arg(long, required = true)]
    pub probe: Vec<String>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = TableArg::Markdown)]
    pub format: TableArg,
    /// Also write the table and a manifest into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RanksumArgs {
    /// Scene embedding TSV.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// TSV of `scene<TAB>supercategory` lines.
    #[arg(long)]
    pub supercats: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Cosine-distance cut-off in (0, 2).
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// LSA model JSON written by `train-lsa`.
    #[arg(long)]
    pub model: PathBuf,
    /// Training corpus JSONL.
    #[arg(long)]
    pub train: PathBuf,
    /// Test corpus JSONL.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::NearestCentroid)]
    pub method: MethodArg,
    /// Gradient steps of the logistic classifier.
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    /// L2 penalty of the logistic classifier.
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportDistArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthCorpusArgs {
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    #[arg(long, default_value_t = 200)]
    pub objects: usize,
    #[arg(long, default_value_t = 50)]
    pub images_per_scene: usize,
    /// Extra images per scene written to test.jsonl.
    #[arg(long, default_value_t = 0)]
    pub test_images_per_scene: usize,
    #[arg(long, default_value_t = 2)]
    pub supercats: usize,
    /// Fraction of objects shared by all supercategories.
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthSpatialArgs {
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    #[arg(long, default_value_t = 200)]
    pub images: usize,
    /// Distractor vocabulary size [default: twice the pairs].
    #[arg(long)]
    pub distractors: Option<usize>,
    /// Room types; each image gets one background surface of its room.
    #[arg(long, default_value_t = 1)]
    pub rooms: usize,
    #[arg(long)]
    pub out: PathBuf,
}
