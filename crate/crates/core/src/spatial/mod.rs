//! Spatial context of object instances from per-pixel label maps.
//!
//! Each instance mask is dilated with a square structuring element; the
//! instances hit by the dilation ring (dilated mask minus the mask itself)
//! form the instance's spatial context. The directed distance from `i` to a
//! neighbor `j` is one minus the share of `i`'s ring covered by `j`, so it is
//! asymmetric. Instances in a part-of relation are linked in both
//! directions at [`PART_DISTANCE`].

mod mask;
mod segmap;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, SceneImage};
use crate::error::{Error, Result};
use crate::fmt::fmt_e;

pub use mask::{dilate_mask, BinaryMask};
pub use segmap::{load_label_grid, read_segmap, write_segmap, LabelGrid};
pub use synthetic::{planted_pairs, PlantedPairs, PlantedSpec};

/// Distance stored for instances sharing an object/part relation.
pub const PART_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `1 - overlap / denominator`.
    OneMinus,
    /// `denominator / overlap`.
    Reciprocal,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::OneMinus => "one_minus",
            DistanceKind::Reciprocal => "reciprocal",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_minus" => Ok(DistanceKind::OneMinus),
            "reciprocal" => Ok(DistanceKind::Reciprocal),
            other => Err(Error::InvalidArgument(format!(
                "unknown distance `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Pixels of the dilation ring.
    Ring,
    /// All pixels of the dilated mask.
    Full,
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Denominator::Ring => "ring",
            Denominator::Full => "full",
        })
    }
}

impl FromStr for Denominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Denominator::Ring),
            "full" => Ok(Denominator::Full),
            other => Err(Error::InvalidArgument(format!(
                "unknown denominator `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContextOptions {
    pub radius: usize,
    pub distance: DistanceKind,
    pub denominator: Denominator,
    /// Maximum number of part-of hops linked; `None` links every ancestor.
    pub part_depth: Option<usize>,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            radius: 3,
            distance: DistanceKind::OneMinus,
            denominator: Denominator::Ring,
            part_depth: None,
        }
    }
}

/// Instance-index grid of one image with its instance and part tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    grid: Vec<u32>,
    instances: BTreeMap<u32, usize>,
    parents: BTreeMap<u32, u32>,
}

impl LabelMap {
    pub fn new(
        width: usize,
        height: usize,
        grid: Vec<u32>,
        instances: BTreeMap<u32, usize>,
        parents: BTreeMap<u32, u32>,
    ) -> Result<Self> {
        if grid.len() != width * height {
            return Err(Error::LabelMap(format!(
                "grid has {} cells, expected {width}x{height}",
                grid.len()
            )));
        }
        if let Some(v) = grid
            .iter()
            .find(|&&v| v != 0 && !instances.contains_key(&v))
        {
            return Err(Error::LabelMap(format!(
                "grid value {v} has no instance entry"
            )));
        }
        for (&child, &parent) in &parents {
            if !instances.contains_key(&child) || !instances.contains_key(&parent) {
                return Err(Error::LabelMap(format!(
                    "part relation {child} -> {parent} refers to an unknown instance"
                )));
            }
            let mut current = parent;
            let mut hops = 0;
            while let Some(&next) = parents.get(&current) {
                if current == child || hops > parents.len() {
                    return Err(Error::LabelMap(format!("part-of cycle through {child}")));
                }
                current = next;
                hops += 1;
            }
            if current == child {
                return Err(Error::LabelMap(format!("part-of cycle through {child}")));
            }
        }
        Ok(LabelMap {
            width,
            height,
            grid,
            instances,
            parents,
        })
    }

    /// Combines a decoded grid with an annotated image. Grid values that
    /// the image does not list are treated as background.
    pub fn for_image(image: &SceneImage, grid: LabelGrid) -> Result<Self> {
        let instances: BTreeMap<u32, usize> =
            image.instances.iter().map(|i| (i.iid, i.object)).collect();
        let parents = image
            .instances
            .iter()
            .filter_map(|i| i.parent.map(|p| (i.iid, p)))
            .collect();
        let cells = grid
            .cells
            .into_iter()
            .map(|v| if instances.contains_key(&v) { v } else { 0 })
            .collect();
        LabelMap::new(grid.width, grid.height, cells, instances, parents)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid(&self) -> &[u32] {
        &self.grid
    }

    pub fn instances(&self) -> &BTreeMap<u32, usize> {
        &self.instances
    }

    pub fn parents(&self) -> &BTreeMap<u32, u32> {
        &self.parents
    }

    pub fn mask(&self, iid: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.grid.iter().map(|&v| v == iid).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub iid: u32,
    pub object: usize,
}

/// Sparse, directed distances between the instances of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialContextGraph {
    pub image_id: String,
    /// Instances with a non-empty mask, by ascending id.
    pub nodes: Vec<GraphNode>,
    pub edges: BTreeMap<(u32, u32), f64>,
}

impl SpatialContextGraph {
    /// Neighbors of `iid` with their distances.
    pub fn context(&self, iid: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.edges
            .range((iid, 0)..=(iid, u32::MAX))
            .map(|(&(_, j), &d)| (j, d))
    }

    pub fn object_of(&self, iid: u32) -> Option<usize> {
        self.nodes
            .binary_search_by_key(&iid, |n| n.iid)
            .ok()
            .map(|k| self.nodes[k].object)
    }

    /// One JSONL line: `{"image_id":...,"edges":[[i,j,dist],...]}` with
    /// distances in `%.3e`.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(
            writer,
            "{{\"image_id\":{},\"edges\":[",
            serde_json::to_string(&self.image_id)?
        )?;
        for (k, (&(i, j), &d)) in self.edges.iter().enumerate() {
            if k > 0 {
                write!(writer, ",")?;
            }
            write!(writer, "[{i},{j},{}]", fmt_e(d, 3))?;
        }
        writeln!(writer, "]}}")?;
        Ok(())
    }
}

/// Edge lists read back from the graph export.
pub fn read_graph_edges<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<Vec<(String, BTreeMap<(u32, u32), f64>)>> {
    #[derive(serde::Deserialize)]
    struct Line {
        image_id: String,
        edges: Vec<(u32, u32, f64)>,
    }
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: k + 1,
            message: e.to_string(),
        })?;
        let edges = parsed
            .edges
            .into_iter()
            .map(|(i, j, d)| ((i, j), d))
            .collect();
        out.push((parsed.image_id, edges));
    }
    Ok(out)
}

struct Extent {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Builds the spatial context graph of one label map.
pub fn build_context_graph(
    map: &LabelMap,
    image_id: &str,
    options: &ContextOptions,
) -> SpatialContextGraph {
    let (w, h, r) = (map.width, map.height, options.radius);
    let mut extents: BTreeMap<u32, Extent> = BTreeMap::new();
    for (k, &v) in map.grid.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let (x, y) = (k % w, k / w);
        let e = extents.entry(v).or_insert(Extent {
            x0: x,
            x1: x,
            y0: y,
            y1: y,
        });
        e.x0 = e.x0.min(x);
        e.x1 = e.x1.max(x);
        e.y0 = e.y0.min(y);
        e.y1 = e.y1.max(y);
    }
    let empty = map.instances.len() - extents.len();
    if empty > 0 {
        log::warn!("image `{image_id}`: {empty} instances have no pixels and are excluded");
    }

    let nodes: Vec<GraphNode> = extents
        .keys()
        .map(|&iid| GraphNode {
            iid,
            object: map.instances[&iid],
        })
        .collect();

    let mut edges = BTreeMap::new();
    for (&iid, e) in &extents {
        let wx0 = e.x0.saturating_sub(r);
        let wy0 = e.y0.saturating_sub(r);
        let wx1 = (e.x1 + r).min(w - 1);
        let wy1 = (e.y1 + r).min(h - 1);
        let (ww, wh) = (wx1 - wx0 + 1, wy1 - wy0 + 1);
        let local = BinaryMask::from_fn(ww, wh, |x, y| map.grid[(wy0 + y) * w + wx0 + x] == iid);
        let dilated = dilate_mask(&local, r);

        let mut overlap: BTreeMap<u32, usize> = BTreeMap::new();
        let (mut ring, mut full) = (0usize, 0usize);
        for y in 0..wh {
            for x in 0..ww {
                if !dilated.get(x, y) {
                    continue;
                }
                full += 1;
                if local.get(x, y) {
                    continue;
                }
                ring += 1;
                let v = map.grid[(wy0 + y) * w + wx0 + x];
                if v != 0 {
                    *overlap.entry(v).or_insert(0) += 1;
                }
            }
        }
        let denominator = match options.denominator {
            Denominator::Ring => ring,
            Denominator::Full => full,
        } as f64;
        for (j, count) in overlap {
            let share = count as f64 / denominator;
            let distance = match options.distance {
                DistanceKind::OneMinus => (1.0 - share).clamp(PART_DISTANCE, 1.0),
                DistanceKind::Reciprocal => (1.0 / share).max(PART_DISTANCE),
            };
            edges.insert((iid, j), distance);
        }
    }

    for &iid in extents.keys() {
        let mut current = iid;
        let mut depth = 0;
        while let Some(&parent) = map.parents.get(&current) {
            depth += 1;
            if options.part_depth.is_some_and(|max| depth > max) {
                break;
            }
            if extents.contains_key(&parent) {
                edges.insert((iid, parent), PART_DISTANCE);
                edges.insert((parent, iid), PART_DISTANCE);
            }
            current = parent;
        }
    }

    SpatialContextGraph {
        image_id: image_id.to_string(),
        nodes,
        edges,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub images_parsed: usize,
    pub images_without_map: usize,
    pub total_instances: usize,
    pub max_instances_per_image: usize,
    /// Instances whose context is empty.
    pub empty_context: usize,
    /// Listed instances without any pixel in the map.
    pub empty_masks: usize,
    /// `(image_id, message)` for maps that could not be read.
    pub failures: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub context: ContextOptions,
    /// Relative label-map paths are resolved against this directory.
    pub base_dir: PathBuf,
    /// Directory for decoded label maps of PNG-encoded datasets.
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            context: ContextOptions::default(),
            base_dir: PathBuf::from("."),
            cache_dir: None,
            threads: 1,
        }
    }
}

/// Parses the label map of every image that has one. Unreadable maps are
/// recorded in the stats and skipped.
pub fn parse_corpus(
    corpus: &Corpus,
    options: &ParseOptions,
) -> Result<(Vec<SpatialContextGraph>, ParseStats)> {
    let with_maps: Vec<&SceneImage> = corpus
        .images()
        .iter()
        .filter(|i| i.label_map.is_some())
        .collect();
    if with_maps.is_empty() {
        return Err(Error::NoLabelMaps);
    }

    let parse_one =
        |image: &&SceneImage| -> std::result::Result<(SpatialContextGraph, usize), String> {
            let rel = image.label_map.as_deref().expect("filtered");
            let path = options.base_dir.join(rel);
            let grid = load_label_grid(&path, &image.image_id, options.cache_dir.as_deref())
                .map_err(|e| e.to_string())?;
            let map = LabelMap::for_image(image, grid).map_err(|e| e.to_string())?;
            let graph = build_context_graph(&map, &image.image_id, &options.context);
            let empty = map.instances.len() - graph.nodes.len();
            Ok((graph, empty))
        };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let results: Vec<_> = pool.install(|| with_maps.par_iter().map(parse_one).collect());

    let mut stats = ParseStats {
        images_without_map: corpus.len() - with_maps.len(),
        ..ParseStats::default()
    };
    let mut graphs = Vec::with_capacity(results.len());
    for (image, result) in with_maps.iter().zip(results) {
        match result {
            Ok((graph, empty)) => {
                stats.images_parsed += 1;
                stats.total_instances += graph.nodes.len();
                stats.max_instances_per_image =
                    stats.max_instances_per_image.max(graph.nodes.len());
                let with_context: BTreeSet<u32> = graph.edges.keys().map(|&(i, _)| i).collect();
                stats.empty_context += graph.nodes.len() - with_context.len();
                stats.empty_masks += empty;
                graphs.push(graph);
            }
            Err(message) => stats.failures.push((image.image_id.clone(), message)),
        }
    }
    Ok((graphs, stats))
}
