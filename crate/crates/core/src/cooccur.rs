//! Object-by-scene occurrence matrix and its normalizations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fmt::fmt_g;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    Raw,
    /// Each column divided by its total.
    Norm,
    /// Entrywise `ln(1 + x)`.
    Log,
    /// Count times inverse scene-category frequency of the object.
    Tfidf,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::Norm => "norm",
            Normalization::Log => "log",
            Normalization::Tfidf => "tfidf",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "norm" => Ok(Normalization::Norm),
            "log" => Ok(Normalization::Log),
            "tfidf" => Ok(Normalization::Tfidf),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization `{other}` (expected raw, norm, log or tfidf)"
            ))),
        }
    }
}

/// `n_objects x n_scenes` matrix; raw entry `(i, j)` counts the images of
/// scene `j` that contain object `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub values: DMatrix<f64>,
    pub object_labels: Vec<String>,
    pub scene_labels: Vec<String>,
    pub normalization: Normalization,
}

impl CooccurrenceMatrix {
    pub fn n_objects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_scenes(&self) -> usize {
        self.values.ncols()
    }

    /// TSV with a `#norm=<tag>` corner cell, scene labels across the top
    /// and object labels down the first column; entries in `%.10g`.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(writer, "#norm={}", self.normalization)?;
        for label in &self.scene_labels {
            write!(writer, "\t{label}")?;
        }
        writeln!(writer)?;
        for (i, label) in self.object_labels.iter().enumerate() {
            write!(writer, "{label}")?;
            for j in 0..self.n_scenes() {
                write!(writer, "\t{}", fmt_g(self.values[(i, j)], 10))?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| err(1, "empty matrix file".into()))?;
        let mut cells = header.split('\t');
        let corner = cells.next().unwrap_or_default();
        let normalization = corner
            .strip_prefix("#norm=")
            .ok_or_else(|| err(1, "missing `#norm=` corner cell".into()))?
            .parse()?;
        let scene_labels: Vec<String> = cells.map(str::to_string).collect();
        let m = scene_labels.len();

        let mut object_labels = Vec::new();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut cells = line.split('\t');
            object_labels.push(cells.next().unwrap_or_default().to_string());
            let row: Vec<f64> = cells
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|e| err(k + 2, format!("`{c}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != m {
                return Err(err(
                    k + 2,
                    format!("expected {m} values, found {}", row.len()),
                ));
            }
            rows.extend(row);
        }
        let values = DMatrix::from_row_slice(object_labels.len(), m, &rows);
        Ok(CooccurrenceMatrix {
            values,
            object_labels,
            scene_labels,
            normalization,
        })
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        Self::read_tsv(BufReader::new(File::open(path)?), path)
    }
}

/// Raw counts as sorted `(object, scene) -> count` triplets, for
/// vocabularies too large for a dense matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCounts {
    pub n_objects: usize,
    pub n_scenes: usize,
    pub entries: BTreeMap<(usize, usize), u64>,
}

impl SparseCounts {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut values = DMatrix::zeros(self.n_objects, self.n_scenes);
        for (&(i, j), &count) in &self.entries {
            values[(i, j)] = count as f64;
        }
        values
    }
}

pub fn build_sparse(corpus: &Corpus) -> SparseCounts {
    let mut entries = BTreeMap::new();
    for image in corpus.images() {
        for object in image.distinct_objects() {
            *entries.entry((object, image.scene)).or_insert(0) += 1;
        }
    }
    SparseCounts {
        n_objects: corpus.object_vocab().len(),
        n_scenes: corpus.scene_vocab().len(),
        entries,
    }
}

/// Binarizes each image's object counts and sums them per scene category.
pub fn build_matrix(corpus: &Corpus) -> CooccurrenceMatrix {
    let mut values = DMatrix::zeros(corpus.object_vocab().len(), corpus.scene_vocab().len());
    for image in corpus.images() {
        for object in image.distinct_objects() {
            values[(object, image.scene)] += 1.0;
        }
    }
    CooccurrenceMatrix {
        values,
        object_labels: corpus.object_vocab().tokens().to_vec(),
        scene_labels: corpus.scene_vocab().tokens().to_vec(),
        normalization: Normalization::Raw,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Use `ln(m / df)` instead of the plain ratio `m / df` as idf.
    pub idf_log: bool,
}

pub fn normalize(x: &CooccurrenceMatrix, method: Normalization) -> Result<CooccurrenceMatrix> {
    normalize_with(x, method, NormalizeOptions::default())
}

pub fn normalize_with(
    x: &CooccurrenceMatrix,
    method: Normalization,
    options: NormalizeOptions,
) -> Result<CooccurrenceMatrix> {
    if x.normalization != Normalization::Raw {
        return Err(Error::InvalidArgument(format!(
            "normalization expects a raw matrix, got `{}`",
            x.normalization
        )));
    }
    let mut values = x.values.clone();
    match method {
        Normalization::Raw => {}
        Normalization::Norm => {
            for (j, mut column) in values.column_iter_mut().enumerate() {
                let total: f64 = column.sum();
                if total > 0.0 {
                    column /= total;
                } else {
                    log::warn!("scene `{}` has an all-zero column", x.scene_labels[j]);
                }
            }
        }
        Normalization::Log => values.apply(|v| *v = v.ln_1p()),
        Normalization::Tfidf => {
            let m = x.n_scenes() as f64;
            for (i, mut row) in values.row_iter_mut().enumerate() {
                let df = row.iter().filter(|&&v| v > 0.0).count();
                if df == 0 {
                    continue;
                }
                let ratio = m / df as f64;
                let idf = if options.idf_log { ratio.ln() } else { ratio };
                if options.idf_log && idf == 0.0 {
                    log::debug!("object `{}` occurs in every scene", x.object_labels[i]);
                }
                row *= idf;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        values,
        normalization: method,
        ..x.clone()
    })
}
