//! Annotated scene corpora: ingestion, validation, frequency filtering and
//! synthetic generation.

pub mod ade20k;
mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec};

/// Labels treated as "no annotation" and dropped at load time.
pub const UNKNOWN_LABELS: &[&str] = &["", "unknown", "unlabeled", "unlabelled", "-"];

/// Lowercase, trim and collapse internal whitespace.
pub fn canonicalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn is_unknown(label: &str) -> bool {
    UNKNOWN_LABELS.contains(&label)
}

/// Dense bijection between label text and ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from distinct tokens, keeping their order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab::default();
        for token in tokens {
            let token = token.into();
            if vocab.index.contains_key(&token) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary token `{token}`"
                )));
            }
            vocab.index.insert(token.clone(), vocab.tokens.len());
            vocab.tokens.push(token);
        }
        Ok(vocab)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One annotated object instance inside an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub iid: u32,
    pub object: usize,
    pub parent: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneImage {
    pub image_id: String,
    pub scene: usize,
    pub instances: Vec<Instance>,
    pub label_map: Option<String>,
}

impl SceneImage {
    /// Sorted, deduplicated object ids present in the image.
    pub fn distinct_objects(&self) -> Vec<usize> {
        let mut objects: Vec<usize> = self.instances.iter().map(|i| i.object).collect();
        objects.sort_unstable();
        objects.dedup();
        objects
    }
}

/// Row of the canonical JSONL corpus format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub scene: String,
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub label_map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub iid: u32,
    pub label: String,
    #[serde(default)]
    pub parent: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Ade20k,
}

/// Immutable collection of annotated images with label vocabularies and
/// per-label image frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    images: Vec<SceneImage>,
    object_vocab: Vocab,
    scene_vocab: Vocab,
    object_image_freq: Vec<usize>,
    scene_image_freq: Vec<usize>,
}

impl Corpus {
    /// Validates raw records, canonicalizes labels, drops unlabeled
    /// objects and scenes, and assigns dense ids in lexicographic order.
    pub fn from_records(records: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for record in &records {
            validate_record(record)?;
            if !seen.insert(record.image_id.clone()) {
                return Err(Error::DuplicateImage(record.image_id.clone()));
            }
        }

        let records: Vec<ImageRecord> = records
            .into_iter()
            .filter_map(|record| {
                let scene = canonicalize_label(&record.scene);
                if is_unknown(&scene) {
                    return None;
                }
                let objects = record
                    .objects
                    .iter()
                    .map(|o| (o.iid, canonicalize_label(&o.label), o.parent))
                    .collect::<Vec<_>>();
                let keep: HashSet<u32> = objects
                    .iter()
                    .filter(|(_, label, _)| !is_unknown(label))
                    .map(|(iid, _, _)| *iid)
                    .collect();
                let objects = retain_instances(objects, &keep);
                Some(ImageRecord {
                    image_id: record.image_id,
                    scene,
                    objects: objects
                        .into_iter()
                        .map(|(iid, label, parent)| ObjectRecord { iid, label, parent })
                        .collect(),
                    label_map: record.label_map,
                })
            })
            .collect();

        let mut object_labels: Vec<&str> = records
            .iter()
            .flat_map(|r| r.objects.iter().map(|o| o.label.as_str()))
            .collect();
        object_labels.sort_unstable();
        object_labels.dedup();
        let mut scene_labels: Vec<&str> = records.iter().map(|r| r.scene.as_str()).collect();
        scene_labels.sort_unstable();
        scene_labels.dedup();
        let object_vocab = Vocab::from_tokens(object_labels.iter().copied())?;
        let scene_vocab = Vocab::from_tokens(scene_labels.iter().copied())?;

        let images = records
            .iter()
            .map(|r| SceneImage {
                image_id: r.image_id.clone(),
                scene: scene_vocab.id(&r.scene).expect("scene in vocab"),
                instances: r
                    .objects
                    .iter()
                    .map(|o| Instance {
                        iid: o.iid,
                        object: object_vocab.id(&o.label).expect("object in vocab"),
                        parent: o.parent,
                    })
                    .collect(),
                label_map: r.label_map.clone(),
            })
            .collect();
        Ok(Self::assemble(images, object_vocab, scene_vocab))
    }

    fn assemble(images: Vec<SceneImage>, object_vocab: Vocab, scene_vocab: Vocab) -> Self {
        let mut object_image_freq = vec![0; object_vocab.len()];
        let mut scene_image_freq = vec![0; scene_vocab.len()];
        for image in &images {
            scene_image_freq[image.scene] += 1;
            for object in image.distinct_objects() {
                object_image_freq[object] += 1;
            }
        }
        Corpus {
            images,
            object_vocab,
            scene_vocab,
            object_image_freq,
            scene_image_freq,
        }
    }

    pub fn to_records(&self) -> Vec<ImageRecord> {
        self.images
            .iter()
            .map(|image| ImageRecord {
                image_id: image.image_id.clone(),
                scene: self.scene_vocab.token(image.scene).to_string(),
                objects: image
                    .instances
                    .iter()
                    .map(|i| ObjectRecord {
                        iid: i.iid,
                        label: self.object_vocab.token(i.object).to_string(),
                        parent: i.parent,
                    })
                    .collect(),
                label_map: image.label_map.clone(),
            })
            .collect()
    }

    pub fn images(&self) -> &[SceneImage] {
        &self.images
    }

    pub fn object_vocab(&self) -> &Vocab {
        &self.object_vocab
    }

    pub fn scene_vocab(&self) -> &Vocab {
        &self.scene_vocab
    }

    /// Number of images containing each object at least once.
    pub fn object_image_freq(&self) -> &[usize] {
        &self.object_image_freq
    }

    /// Number of images of each scene category.
    pub fn scene_image_freq(&self) -> &[usize] {
        &self.scene_image_freq
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Relative scene frequencies `f(s)`: images of `s` over all images.
    pub fn scene_frequencies(&self) -> Vec<f64> {
        let total = self.images.len().max(1) as f64;
        self.scene_image_freq
            .iter()
            .map(|&c| c as f64 / total)
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for record in self.to_records() {
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}

fn validate_record(record: &ImageRecord) -> Result<()> {
    let invalid = |message: String| Error::InvalidImage {
        image: record.image_id.clone(),
        message,
    };
    if record.image_id.is_empty() {
        return Err(invalid("empty image_id".into()));
    }
    if record.objects.is_empty() {
        return Err(invalid("record has no object instances".into()));
    }
    let mut parents = BTreeMap::new();
    for object in &record.objects {
        if object.iid == 0 {
            return Err(invalid("instance ids must be positive".into()));
        }
        if parents.insert(object.iid, object.parent).is_some() {
            return Err(invalid(format!("duplicate instance id {}", object.iid)));
        }
    }
    for object in &record.objects {
        if let Some(parent) = object.parent {
            if parent == object.iid || !parents.contains_key(&parent) {
                return Err(Error::DanglingParent {
                    image: record.image_id.clone(),
                    instance: object.iid,
                    parent,
                });
            }
        }
    }
    // every ancestor chain must terminate
    for &start in parents.keys() {
        let mut current = start;
        for _ in 0..=parents.len() {
            match parents[&current] {
                Some(parent) => current = parent,
                None => break,
            }
            if current == start {
                return Err(invalid(format!("part-of cycle through instance {start}")));
            }
        }
    }
    Ok(())
}

/// Keeps the instances in `keep`, re-pointing parents at the nearest
/// surviving ancestor.
fn retain_instances<L>(
    instances: Vec<(u32, L, Option<u32>)>,
    keep: &HashSet<u32>,
) -> Vec<(u32, L, Option<u32>)> {
    let parent_of: HashMap<u32, Option<u32>> =
        instances.iter().map(|(iid, _, p)| (*iid, *p)).collect();
    instances
        .into_iter()
        .filter(|(iid, _, _)| keep.contains(iid))
        .map(|(iid, label, mut parent)| {
            while let Some(p) = parent {
                if keep.contains(&p) {
                    break;
                }
                parent = parent_of.get(&p).copied().flatten();
            }
            (iid, label, parent)
        })
        .collect()
}

/// Reads a corpus in the given format. The result is not yet filtered.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Ade20k => ade20k::load_ade20k(path),
    }
}

pub fn load_jsonl(path: &Path) -> Result<Corpus> {
    let reader = BufReader::new(File::open(path)?);
    read_jsonl(reader, path)
}

/// Parses canonical JSONL; `origin` is used in error messages only.
pub fn read_jsonl<R: BufRead>(reader: R, origin: &Path) -> Result<Corpus> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ImageRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: index + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Corpus::from_records(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterOptions {
    pub min_label_freq: usize,
    pub min_distinct_objects: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            min_label_freq: 5,
            min_distinct_objects: 2,
        }
    }
}

/// Removes rare object and scene labels and images with too few distinct
/// objects, repeating until nothing changes, then re-densifies ids.
pub fn filter_corpus(corpus: &Corpus, options: FilterOptions) -> Result<Corpus> {
    let mut images: Vec<SceneImage> = corpus.images.clone();
    loop {
        let mut object_freq = vec![0usize; corpus.object_vocab.len()];
        let mut scene_freq = vec![0usize; corpus.scene_vocab.len()];
        for image in &images {
            scene_freq[image.scene] += 1;
            for object in image.distinct_objects() {
                object_freq[object] += 1;
            }
        }
        let mut changed = false;
        let mut next = Vec::with_capacity(images.len());
        for image in images {
            if scene_freq[image.scene] < options.min_label_freq {
                changed = true;
                continue;
            }
            let keep: HashSet<u32> = image
                .instances
                .iter()
                .filter(|i| object_freq[i.object] >= options.min_label_freq)
                .map(|i| i.iid)
                .collect();
            let instances = if keep.len() == image.instances.len() {
                image.instances
            } else {
                changed = true;
                let triples = image
                    .instances
                    .iter()
                    .map(|i| (i.iid, i.object, i.parent))
                    .collect();
                retain_instances(triples, &keep)
                    .into_iter()
                    .map(|(iid, object, parent)| Instance {
                        iid,
                        object,
                        parent,
                    })
                    .collect()
            };
            let image = SceneImage { instances, ..image };
            if image.distinct_objects().len() < options.min_distinct_objects {
                changed = true;
                continue;
            }
            next.push(image);
        }
        images = next;
        if !changed {
            break;
        }
    }
    if images.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut object_used = vec![false; corpus.object_vocab.len()];
    let mut scene_used = vec![false; corpus.scene_vocab.len()];
    for image in &images {
        scene_used[image.scene] = true;
        for instance in &image.instances {
            object_used[instance.object] = true;
        }
    }
    let (object_vocab, object_map) = redensify(&corpus.object_vocab, &object_used)?;
    let (scene_vocab, scene_map) = redensify(&corpus.scene_vocab, &scene_used)?;
    for image in &mut images {
        image.scene = scene_map[image.scene].expect("surviving scene");
        for instance in &mut image.instances {
            instance.object = object_map[instance.object].expect("surviving object");
        }
    }
    Ok(Corpus::assemble(images, object_vocab, scene_vocab))
}

fn redensify(vocab: &Vocab, used: &[bool]) -> Result<(Vocab, Vec<Option<usize>>)> {
    let mut map = vec![None; vocab.len()];
    let mut tokens = Vec::new();
    for (old, &keep) in used.iter().enumerate() {
        if keep {
            map[old] = Some(tokens.len());
            tokens.push(vocab.token(old).to_string());
        }
    }
    Ok((Vocab::from_tokens(tokens)?, map))
}
