use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use scene_embed::cooccur::{
    build_matrix, normalize_with, CooccurrenceMatrix, Normalization, NormalizeOptions,
};
use scene_embed::corpus::{
    filter_corpus, generate_synthetic, load_corpus, load_jsonl, Corpus, CorpusFormat,
    FilterOptions, ImageRecord, SyntheticSpec,
};
use scene_embed::embedding::EmbeddingMatrix;
use scene_embed::eval::{
    classify_scenes, export_distance_matrix, nearest_neighbors, rank_sum_test, threshold_graph,
    write_neighbor_table, ClassifierMethod, LogisticOptions, SupercategoryMap, TableFormat,
};
use scene_embed::lsa::{fit_lsa_with, LsaModel, LsaOptions};
use scene_embed::spatial::{
    parse_corpus, planted_pairs, ContextOptions, Denominator, DistanceKind, ParseOptions,
    ParseStats, PlantedSpec, SpatialContextGraph,
};
use scene_embed::w2v::{
    train_cbow, train_skipgram_scene, train_skipgram_spatial, write_training_log, EpochLog,
    TrainConfig,
};

use crate::args::*;
use crate::run::{RunDir, TOOL, VERSION};

/// Flag combinations clap cannot reject on its own; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub struct RunContext {
    pub seed: u64,
    pub threads: usize,
    config: Value,
}

impl RunContext {
    pub fn new(global: &Global, threads: usize, command: &Command) -> Result<Self> {
        let mut args = serde_json::to_value(command)?;
        let args = match args.as_object_mut() {
            Some(map) if map.len() == 1 => map
                .values_mut()
                .next()
                .map(Value::take)
                .unwrap_or(Value::Null),
            _ => args,
        };
        let config = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": command.name(),
            "seed": global.seed,
            "threads": threads,
            "deterministic": global.deterministic,
            "args": args,
        });
        Ok(RunContext {
            seed: global.seed,
            threads,
            config,
        })
    }

    fn run_dir(&self, out: &Path) -> Result<RunDir> {
        RunDir::create(out, self.config.clone())
    }
}

pub fn dispatch(ctx: &RunContext, command: &Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(ctx, a),
        Command::Matrix(a) => matrix(ctx, a),
        Command::TrainLsa(a) => train_lsa(ctx, a),
        Command::TrainSkipgram(a) => train_w2v(ctx, a, W2v::Skipgram),
        Command::TrainCbow(a) => train_w2v(ctx, a, W2v::Cbow),
        Command::TrainSpatial(a) => train_spatial(ctx, a),
        Command::ParseSpatial(a) => parse_spatial(ctx, a),
        Command::Neighbors(a) => neighbors(ctx, a),
        Command::Ranksum(a) => ranksum(ctx, a),
        Command::Graph(a) => graph(ctx, a),
        Command::Classify(a) => classify(ctx, a),
        Command::ExportDist(a) => export_dist(ctx, a),
        Command::SynthCorpus(a) => synth_corpus(ctx, a),
        Command::SynthSpatial(a) => synth_spatial(ctx, a),
    }
}

/// Fills the cache directory from `SCENE_EMBED_CACHE` when no flag is given.
pub fn resolve_cache(command: &mut Command) {
    let context = match command {
        Command::TrainSpatial(a) => &mut a.context,
        Command::ParseSpatial(a) => &mut a.context,
        _ => return,
    };
    if context.cache_dir.is_none() {
        context.cache_dir = std::env::var_os("SCENE_EMBED_CACHE")
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
    }
}

fn load(path: &Path) -> Result<Corpus> {
    load_jsonl(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load_tsv(path)
        .with_context(|| format!("reading embeddings {}", path.display()))
}

#[derive(Serialize)]
struct CorpusSummary {
    images: usize,
    objects: usize,
    scenes: usize,
    instances: usize,
    images_with_label_map: usize,
    most_frequent_object: Option<(String, usize)>,
}

fn summarize(corpus: &Corpus) -> CorpusSummary {
    let vocab = corpus.object_vocab();
    let most_frequent_object = corpus
        .object_image_freq()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(o, &f)| (vocab.token(o).to_string(), f));
    CorpusSummary {
        images: corpus.len(),
        objects: vocab.len(),
        scenes: corpus.scene_vocab().len(),
        instances: corpus.images().iter().map(|i| i.instances.len()).sum(),
        images_with_label_map: corpus
            .images()
            .iter()
            .filter(|i| i.label_map.is_some())
            .count(),
        most_frequent_object,
    }
}

fn ingest(ctx: &RunContext, a: &IngestArgs) -> Result<()> {
    let format = match a.format {
        FormatArg::Jsonl => CorpusFormat::Jsonl,
        FormatArg::Ade20k => CorpusFormat::Ade20k,
    };
    let raw =
        load_corpus(&a.input, format).with_context(|| format!("reading {}", a.input.display()))?;
    let filtered = filter_corpus(
        &raw,
        FilterOptions {
            min_label_freq: a.min_freq,
            min_distinct_objects: a.min_objects,
        },
    )?;

    // label maps stay readable wherever the output is moved
    let base = match a.format {
        FormatArg::Jsonl => a.input.parent().unwrap_or(Path::new(".")).to_path_buf(),
        FormatArg::Ade20k => PathBuf::from("."),
    };
    let mut records = filtered.to_records();
    for record in &mut records {
        if let Some(map) = &mut record.label_map {
            let path = Path::new(map.as_str());
            if path.is_relative() {
                *map = std::path::absolute(base.join(path))?.display().to_string();
            }
        }
    }
    let corpus = Corpus::from_records(records)?;

    let before = summarize(&raw);
    let after = summarize(&corpus);
    info!(
        "kept {} of {} images, {} of {} objects, {} of {} scenes",
        after.images, before.images, after.objects, before.objects, after.scenes, before.scenes
    );
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.input);
    run.write_with("corpus.jsonl", |w| corpus.write_jsonl(w))?;
    run.write_json("stats.json", &json!({ "before": before, "after": after }))?;
    run.finish()
}

fn normalization(arg: NormArg) -> Normalization {
    match arg {
        NormArg::Raw => Normalization::Raw,
        NormArg::Norm => Normalization::Norm,
        NormArg::Log => Normalization::Log,
        NormArg::Tfidf => Normalization::Tfidf,
    }
}

fn matrix(ctx: &RunContext, a: &MatrixArgs) -> Result<()> {
    let corpus = load(&a.corpus)?;
    let x = normalize_with(
        &build_matrix(&corpus),
        normalization(a.norm),
        NormalizeOptions { idf_log: a.idf_log },
    )?;
    info!(
        "{} objects x {} scenes, {}",
        x.n_objects(),
        x.n_scenes(),
        x.normalization
    );
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.corpus);
    run.write_with("matrix.tsv", |w| x.write_tsv(w))?;
    run.finish()
}

fn train_lsa(ctx: &RunContext, a: &TrainLsaArgs) -> Result<()> {
    let idf = NormalizeOptions { idf_log: a.idf_log };
    let (x, input) = match (&a.corpus, &a.matrix) {
        (Some(path), None) => {
            let corpus = load(path)?;
            let norm = normalization(a.norm.unwrap_or(NormArg::Norm));
            (normalize_with(&build_matrix(&corpus), norm, idf)?, path)
        }
        (None, Some(path)) => {
            let m = CooccurrenceMatrix::load_tsv(path)
                .with_context(|| format!("reading matrix {}", path.display()))?;
            let x = match a.norm.map(normalization) {
                Some(norm) if norm != m.normalization => normalize_with(&m, norm, idf)?,
                _ => m,
            };
            (x, path)
        }
        _ => return Err(usage("exactly one of --corpus and --matrix is required")),
    };
    let options = LsaOptions {
        scale_by_singular_values: a.scale,
        ..LsaOptions::default()
    };
    let model = fit_lsa_with(&x, a.d as usize, ctx.seed, &options)?;
    info!(
        "rank {} fit of {} x {} ({}), leading singular value {:.4}",
        model.dim(),
        x.n_objects(),
        x.n_scenes(),
        model.normalization,
        model.singular_values.first().copied().unwrap_or(0.0)
    );
    let mut run = ctx.run_dir(&a.out)?;
    run.input(input);
    let path = run.output("model.json");
    model.save_json(&path)?;
    let objects = model.object_embeddings();
    let scenes = model.scene_embeddings();
    run.write_with("objects.tsv", |w| objects.write_tsv(w))?;
    run.write_with("scenes.tsv", |w| scenes.write_tsv(w))?;
    run.finish()
}

fn train_config(ctx: &RunContext, a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        subsample_t: a.subsample_t,
        n_positive: a.n_positive,
        n_negative: a.n_negative,
        neg_exponent: a.neg_exponent,
        context_size: a.context_size,
        strict_negatives: a.strict_negatives,
        ..TrainConfig::new(a.d as usize, ctx.seed)
    }
}

fn log_epochs(log: &[EpochLog]) {
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        info!(
            "{} epochs, mean loss {:.4} -> {:.4}",
            log.len(),
            first.mean_loss,
            last.mean_loss
        );
    }
}

enum W2v {
    Skipgram,
    Cbow,
}

fn train_w2v(ctx: &RunContext, a: &TrainW2vArgs, model: W2v) -> Result<()> {
    let corpus = load(&a.corpus)?;
    let cfg = train_config(ctx, &a.train);
    let (scenes, objects, log) = match model {
        W2v::Skipgram => {
            let t = train_skipgram_scene(&corpus, &cfg)?;
            (t.scenes, t.objects, t.log)
        }
        W2v::Cbow => {
            let t = train_cbow(&corpus, &cfg)?;
            (t.scenes, t.objects, t.log)
        }
    };
    log_epochs(&log);
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.corpus);
    run.write_with("scenes.tsv", |w| scenes.write_tsv(w))?;
    run.write_with("objects.tsv", |w| objects.write_tsv(w))?;
    run.write_with("train_log.csv", |w| write_training_log(&log, w))?;
    run.finish()
}

fn parse_options(ctx: &RunContext, corpus_path: &Path, a: &ContextArgs) -> ParseOptions {
    ParseOptions {
        context: ContextOptions {
            radius: a.radius,
            distance: match a.distance {
                DistanceArg::OneMinus => DistanceKind::OneMinus,
                DistanceArg::Reciprocal => DistanceKind::Reciprocal,
            },
            denominator: match a.denominator {
                DenominatorArg::Ring => Denominator::Ring,
                DenominatorArg::Full => Denominator::Full,
            },
            part_depth: a.part_depth,
        },
        base_dir: corpus_path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        cache_dir: a.cache_dir.clone(),
        threads: ctx.threads,
    }
}

fn parse(
    ctx: &RunContext,
    corpus_path: &Path,
    a: &ContextArgs,
) -> Result<(Corpus, Vec<SpatialContextGraph>, ParseStats)> {
    let corpus = load(corpus_path)?;
    let (graphs, stats) = parse_corpus(&corpus, &parse_options(ctx, corpus_path, a))?;
    for (image, message) in &stats.failures {
        log::warn!("image `{image}`: {message}");
    }
    info!(
        "parsed {} images, {} instances (max {} per image), {} without context",
        stats.images_parsed,
        stats.total_instances,
        stats.max_instances_per_image,
        stats.empty_context
    );
    if graphs.is_empty() {
        anyhow::bail!("no label map could be read");
    }
    Ok((corpus, graphs, stats))
}

fn train_spatial(ctx: &RunContext, a: &TrainSpatialArgs) -> Result<()> {
    let (corpus, graphs, stats) = parse(ctx, &a.corpus, &a.context)?;
    let cfg = train_config(ctx, &a.train);
    let trained = train_skipgram_spatial(&graphs, corpus.object_vocab().tokens(), &cfg)?;
    log_epochs(&trained.log);
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.corpus);
    run.write_with("objects.tsv", |w| trained.objects.write_tsv(w))?;
    run.write_with("train_log.csv", |w| write_training_log(&trained.log, w))?;
    run.write_json("parse_stats.json", &stats)?;
    run.finish()
}

fn parse_spatial(ctx: &RunContext, a: &ParseSpatialArgs) -> Result<()> {
    let (_, graphs, stats) = parse(ctx, &a.corpus, &a.context)?;
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.corpus);
    run.write_with("graphs.jsonl", |w| {
        for graph in &graphs {
            graph.write_jsonl(&mut *w)?;
        }
        Ok(())
    })?;
    run.write_json("parse_stats.json", &stats)?;
    run.finish()
}

fn neighbors(ctx: &RunContext, a: &NeighborsArgs) -> Result<()> {
    let e = load_embeddings(&a.embeddings)?;
    let mut rows = Vec::with_capacity(a.probe.len());
    for probe in &a.probe {
        rows.push((probe.clone(), nearest_neighbors(&e, probe, a.k as usize)?));
    }
    let (format, name) = match a.format {
        TableArg::Markdown => (TableFormat::Markdown, "neighbors.md"),
        TableArg::Tsv => (TableFormat::Tsv, "neighbors.tsv"),
    };
    write_neighbor_table(&rows, format, io::stdout().lock())?;
    if let Some(out) = &a.out {
        let mut run = ctx.run_dir(out)?;
        run.input(&a.embeddings);
        run.write_with(name, |w| write_neighbor_table(&rows, format, w))?;
        run.finish()?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn ranksum(ctx: &RunContext, a: &RanksumArgs) -> Result<()> {
    let e = load_embeddings(&a.embeddings)?;
    let map = SupercategoryMap::load(&a.supercats)
        .with_context(|| format!("reading supercategories {}", a.supercats.display()))?;
    let result = rank_sum_test(&e, &map)?;
    if !result.unmapped_scenes.is_empty() {
        log::warn!(
            "{} scenes without supercategory",
            result.unmapped_scenes.len()
        );
    }
    print_json(&result)?;
    if let Some(out) = &a.out {
        let mut run = ctx.run_dir(out)?;
        run.input(&a.embeddings);
        run.input(&a.supercats);
        run.write_json("ranksum.json", &result)?;
        run.finish()?;
    }
    Ok(())
}

fn graph(ctx: &RunContext, a: &GraphArgs) -> Result<()> {
    if !(a.threshold > 0.0 && a.threshold < 2.0) {
        return Err(usage(format!(
            "--threshold must lie in (0, 2), got {}",
            a.threshold
        )));
    }
    let e = load_embeddings(&a.embeddings)?;
    let g = threshold_graph(&e, a.threshold)?;
    println!(
        "{} tokens, {} edges, {} components",
        g.tokens.len(),
        g.edges.len(),
        g.component_count()
    );
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.embeddings);
    run.write_with("edges.tsv", |w| g.write_edges(w))?;
    run.write_with("components.tsv", |w| g.write_components(w))?;
    run.finish()
}

fn classify(ctx: &RunContext, a: &ClassifyArgs) -> Result<()> {
    let model = LsaModel::load_json(&a.model)
        .with_context(|| format!("reading model {}", a.model.display()))?;
    let train = load(&a.train)?;
    let test = load(&a.test)?;
    let method = match a.method {
        MethodArg::NearestCentroid => ClassifierMethod::NearestCentroid,
        MethodArg::Logistic => ClassifierMethod::MultinomialLogistic,
    };
    let options = LogisticOptions {
        iterations: a.iterations,
        learning_rate: a.lr,
        l2: a.l2,
    };
    let report = classify_scenes(&train, &test, &model, method, &options)?;
    print_json(&report)?;
    if let Some(out) = &a.out {
        let mut run = ctx.run_dir(out)?;
        run.input(&a.model);
        run.input(&a.train);
        run.input(&a.test);
        run.write_json("report.json", &report)?;
        run.finish()?;
    }
    Ok(())
}

fn export_dist(ctx: &RunContext, a: &ExportDistArgs) -> Result<()> {
    let e = load_embeddings(&a.embeddings)?;
    let mut run = ctx.run_dir(&a.out)?;
    run.input(&a.embeddings);
    run.write_with("distances.tsv", |w| export_distance_matrix(&e, w))?;
    run.finish()
}

fn synth_corpus(ctx: &RunContext, a: &SynthCorpusArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.overlap) {
        return Err(usage(format!(
            "--overlap must lie in [0, 1], got {}",
            a.overlap
        )));
    }
    let spec = SyntheticSpec::balanced(
        a.scenes,
        a.objects,
        a.images_per_scene + a.test_images_per_scene,
        a.supercats,
        a.overlap,
        ctx.seed,
    );
    let synthetic = generate_synthetic(&spec)?;

    // the first images of every scene train, the rest test
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let (mut train, mut test): (Vec<ImageRecord>, Vec<ImageRecord>) = (Vec::new(), Vec::new());
    for record in synthetic.corpus.to_records() {
        let count = seen.entry(record.scene.clone()).or_default();
        *count += 1;
        if *count <= a.images_per_scene {
            train.push(record);
        } else {
            test.push(record);
        }
    }
    let supercats = SupercategoryMap::from_pairs(synthetic.supercategory.iter().cloned());

    let mut run = ctx.run_dir(&a.out)?;
    let train = Corpus::from_records(train)?;
    run.write_with("corpus.jsonl", |w| train.write_jsonl(w))?;
    if !test.is_empty() {
        let test = Corpus::from_records(test)?;
        run.write_with("test.jsonl", |w| test.write_jsonl(w))?;
    }
    run.write_with("supercats.tsv", |w| supercats.write(w))?;
    run.finish()
}

fn synth_spatial(ctx: &RunContext, a: &SynthSpatialArgs) -> Result<()> {
    let spec = PlantedSpec {
        n_distractors: a.distractors.unwrap_or(2 * a.pairs),
        rooms: a.rooms,
        ..PlantedSpec::new(a.pairs, a.images, ctx.seed)
    };
    let planted = planted_pairs(&spec)?;
    let mut run = ctx.run_dir(&a.out)?;
    planted.write(&a.out)?;
    run.output("corpus.jsonl");
    run.output("maps");
    run.write_with("pairs.tsv", |w| {
        for (x, y) in &planted.pairs {
            writeln!(w, "{x}\t{y}")?;
        }
        Ok(())
    })?;
    run.finish()
}
