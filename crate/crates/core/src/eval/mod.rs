//! Evaluation of embeddings: cosine geometry, neighbor tables, rank-sum
//! tests over supercategories, threshold graphs and scene classification.

mod classify;
mod graph;
mod ranksum;
mod supercat;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::fmt::fmt_e;

pub use classify::{classify_scenes, ClassificationReport, ClassifierMethod, LogisticOptions};
pub use graph::{threshold_graph, ThresholdGraph};
pub use ranksum::{rank_sum_test, wilcoxon_rank_sum, RankSumResult, Wilcoxon};
pub use supercat::SupercategoryMap;

/// `1 - u·v / (|u| |v|)`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector("cosine distance of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_rows(e: &EmbeddingMatrix) -> Result<()> {
    match (0..e.rows()).find(|&i| norm(e.row(i)) == 0.0) {
        Some(i) => Err(Error::ZeroVector(format!(
            "embedding of `{}` is zero",
            e.vocab()[i]
        ))),
        None => Ok(()),
    }
}

/// Full pairwise cosine distances, row-major `n × n`, with an exact zero
/// diagonal and exact symmetry.
pub fn distance_matrix(e: &EmbeddingMatrix) -> Result<Vec<f64>> {
    check_rows(e)?;
    let n = e.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| cosine_distance(e.row(i), e.row(j)).expect("rows checked"))
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    Ok(out)
}

/// TSV with tokens as the header row and first column, values in `%.6e`.
pub fn export_distance_matrix<W: Write>(e: &EmbeddingMatrix, mut writer: W) -> Result<()> {
    let dist = distance_matrix(e)?;
    let n = e.rows();
    write!(writer, "token")?;
    for t in e.vocab() {
        write!(writer, "\t{t}")?;
    }
    writeln!(writer)?;
    for i in 0..n {
        write!(writer, "{}", e.vocab()[i])?;
        for d in &dist[i * n..(i + 1) * n] {
            write!(writer, "\t{}", fmt_e(*d, 6))?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub token: String,
    pub distance: f64,
}

/// The `k` rows closest to `probe` by cosine distance, ties broken by
/// row index. The probe itself is excluded.
pub fn nearest_neighbors(e: &EmbeddingMatrix, probe: &str, k: usize) -> Result<Vec<Neighbor>> {
    let Some(p) = e.index_of(probe) else {
        return Err(Error::UnknownToken {
            token: probe.to_string(),
            suggestions: suggest(e.vocab(), probe, 3),
        });
    };
    if k == 0 || k >= e.rows() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..{}, got {k}",
            e.rows()
        )));
    }
    check_rows(e)?;
    let mut scored: Vec<(f64, usize)> = (0..e.rows())
        .filter(|&i| i != p)
        .map(|i| {
            (
                cosine_distance(e.row(p), e.row(i)).expect("rows checked"),
                i,
            )
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(distance, i)| Neighbor {
            token: e.vocab()[i].clone(),
            distance,
        })
        .collect())
}

/// Closest vocabulary entries by edit distance.
fn suggest(vocab: &[String], probe: &str, n: usize) -> Vec<String> {
    let mut scored: Vec<(usize, &String)> = vocab
        .iter()
        .map(|t| (strsim::levenshtein(t, probe), t))
        .collect();
    scored.sort();
    scored.into_iter().take(n).map(|(_, t)| t.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Tsv,
}

/// One row per probe, one column per rank; cells read `token (0.182)`.
pub fn write_neighbor_table<W: Write>(
    rows: &[(String, Vec<Neighbor>)],
    format: TableFormat,
    mut writer: W,
) -> Result<()> {
    let k = rows.iter().map(|(_, n)| n.len()).max().unwrap_or(0);
    match format {
        TableFormat::Markdown => {
            write!(writer, "| probe |")?;
            for r in 1..=k {
                write!(writer, " {r} |")?;
            }
            writeln!(writer)?;
            writeln!(writer, "|---|{}", "---|".repeat(k))?;
            for (probe, neighbors) in rows {
                write!(writer, "| {probe} |")?;
                for n in neighbors {
                    write!(writer, " {} ({:.3}) |", n.token, n.distance)?;
                }
                writeln!(writer)?;
            }
        }
        TableFormat::Tsv => {
            writeln!(writer, "probe\trank\tneighbor\tdistance")?;
            for (probe, neighbors) in rows {
                for (r, n) in neighbors.iter().enumerate() {
                    writeln!(
                        writer,
                        "{probe}\t{}\t{}\t{}",
                        r + 1,
                        n.token,
                        fmt_e(n.distance, 6)
                    )?;
                }
            }
        }
    }
    Ok(())
}
