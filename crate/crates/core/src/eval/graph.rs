use std::io::Write;

use petgraph::unionfind::UnionFind;

use super::distance_matrix;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::fmt::fmt_e;

/// Undirected graph joining tokens closer than a cosine-distance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGraph {
    pub tokens: Vec<String>,
    /// `(i, j, distance)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
    /// Component index per token, numbered in order of first appearance.
    pub components: Vec<usize>,
}

impl ThresholdGraph {
    pub fn component_count(&self) -> usize {
        self.components.iter().max().map_or(0, |&c| c + 1)
    }

    /// Edge list TSV: `source  target  distance`.
    pub fn write_edges<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "source\ttarget\tdistance")?;
        for &(i, j, d) in &self.edges {
            writeln!(
                writer,
                "{}\t{}\t{}",
                self.tokens[i],
                self.tokens[j],
                fmt_e(d, 6)
            )?;
        }
        Ok(())
    }

    /// Node list TSV: `token  component`.
    pub fn write_components<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "token\tcomponent")?;
        for (t, c) in self.tokens.iter().zip(&self.components) {
            writeln!(writer, "{t}\t{c}")?;
        }
        Ok(())
    }
}

pub fn threshold_graph(e: &EmbeddingMatrix, threshold: f64) -> Result<ThresholdGraph> {
    if !(threshold > 0.0 && threshold < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 2), got {threshold}"
        )));
    }
    let n = e.rows();
    let dist = distance_matrix(e)?;
    let mut uf = UnionFind::<usize>::new(n);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = dist[i * n + j];
            if d < threshold {
                edges.push((i, j, d));
                uf.union(i, j);
            }
        }
    }
    let roots = uf.into_labeling();
    let mut renumber = std::collections::HashMap::new();
    let components = roots
        .iter()
        .map(|r| {
            let next = renumber.len();
            *renumber.entry(*r).or_insert(next)
        })
        .collect();
    Ok(ThresholdGraph {
        tokens: e.vocab().to_vec(),
        edges,
        components,
    })
}
