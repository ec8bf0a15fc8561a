//! Synthetic label maps with planted adjacency.
//!
//! Every image is a grid of 12×12 cells. A cell holds either one planted
//! pair (two abutting rectangles) or two distractors drawn at random, also
//! abutting; cells are far enough apart that nothing touches across cells.
//! Planted pairs always appear together while distractors meet a different
//! partner each time. With `rooms > 0` every image is assigned a room, its
//! background pixels become one instance of that room's surface object,
//! and its planted pairs are drawn from the pairs belonging to the room
//! (pair `p` belongs to room `p % rooms`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::segmap::{write_segmap, LabelGrid};
use super::{build_context_graph, ContextOptions, LabelMap, SpatialContextGraph};
use crate::corpus::{Corpus, ImageRecord, ObjectRecord};
use crate::error::{Error, Result};

const CELL: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub n_pairs: usize,
    pub n_distractors: usize,
    pub n_images: usize,
    pub pairs_per_image: usize,
    /// Cells holding two random distractors.
    pub distractor_cells_per_image: usize,
    /// Number of room types; 0 leaves the background unlabeled.
    pub rooms: usize,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn new(n_pairs: usize, n_images: usize, seed: u64) -> Self {
        PlantedSpec {
            n_pairs,
            n_distractors: 2 * n_pairs,
            n_images,
            pairs_per_image: 3.min(n_pairs),
            distractor_cells_per_image: 3.min(n_pairs),
            rooms: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedPairs {
    pub corpus: Corpus,
    /// Label grid per image id.
    pub grids: BTreeMap<String, LabelGrid>,
    /// Object labels of every planted pair.
    pub pairs: Vec<(String, String)>,
}

pub fn pair_labels(pair: usize) -> (String, String) {
    (format!("pair {pair:02} a"), format!("pair {pair:02} b"))
}

pub fn room_label(room: usize) -> String {
    format!("surface {room:02}")
}

fn distractor_label(k: usize) -> String {
    format!("distractor {k:02}")
}

pub fn planted_pairs(spec: &PlantedSpec) -> Result<PlantedPairs> {
    if spec.n_pairs == 0 || spec.n_images == 0 {
        return Err(Error::InvalidArgument(
            "need at least one pair and one image".into(),
        ));
    }
    let smallest_room = if spec.rooms == 0 {
        spec.n_pairs
    } else {
        spec.n_pairs / spec.rooms
    };
    if spec.pairs_per_image == 0
        || spec.pairs_per_image > smallest_room
        || 2 * spec.distractor_cells_per_image > spec.n_distractors
    {
        return Err(Error::InvalidArgument(
            "per-image counts exceed the object pools".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cells = spec.pairs_per_image + spec.distractor_cells_per_image;
    let cols = (cells as f64).sqrt().ceil() as usize;
    let rows = cells.div_ceil(cols);
    let (width, height) = (cols * CELL, rows * CELL);

    let room_pairs: Vec<Vec<usize>> = if spec.rooms == 0 {
        vec![(0..spec.n_pairs).collect()]
    } else {
        (0..spec.rooms)
            .map(|r| (0..spec.n_pairs).filter(|p| p % spec.rooms == r).collect())
            .collect()
    };
    let distractor_ids: Vec<usize> = (0..spec.n_distractors).collect();
    let mut records = Vec::with_capacity(spec.n_images);
    let mut grids = BTreeMap::new();
    for n in 0..spec.n_images {
        let image_id = format!("planted_{n:05}");
        let mut cells_grid = vec![0u32; width * height];
        let mut objects = Vec::new();
        let mut slots: Vec<usize> = (0..rows * cols).collect();
        slots.shuffle(&mut rng);
        let mut slots = slots.into_iter();
        let mut paint = |slot: usize, x0: usize, x1: usize, y0: usize, y1: usize, iid: u32| {
            let (cx, cy) = ((slot % cols) * CELL, (slot / cols) * CELL);
            for y in y0..y1 {
                for x in x0..x1 {
                    cells_grid[(cy + y) * width + cx + x] = iid;
                }
            }
        };
        let room = rng.random_range(0..room_pairs.len());
        let mut next_iid = 1u32;
        for &pair in room_pairs[room].choose_multiple(&mut rng, spec.pairs_per_image) {
            let slot = slots.next().expect("enough cells");
            let split = rng.random_range(4..=8);
            let (a, b) = pair_labels(pair);
            paint(slot, 2, split, 2, 10, next_iid);
            paint(slot, split, 10, 2, 10, next_iid + 1);
            objects.push(ObjectRecord {
                iid: next_iid,
                label: a,
                parent: None,
            });
            objects.push(ObjectRecord {
                iid: next_iid + 1,
                label: b,
                parent: None,
            });
            next_iid += 2;
        }
        let drawn: Vec<usize> = distractor_ids
            .choose_multiple(&mut rng, 2 * spec.distractor_cells_per_image)
            .copied()
            .collect();
        for couple in drawn.chunks(2) {
            let slot = slots.next().expect("enough cells");
            let split = rng.random_range(4..=8);
            paint(slot, 2, split, 2, 10, next_iid);
            paint(slot, split, 10, 2, 10, next_iid + 1);
            for (k, &d) in couple.iter().enumerate() {
                objects.push(ObjectRecord {
                    iid: next_iid + k as u32,
                    label: distractor_label(d),
                    parent: None,
                });
            }
            next_iid += 2;
        }
        if spec.rooms > 0 {
            for v in cells_grid.iter_mut().filter(|v| **v == 0) {
                *v = next_iid;
            }
            objects.push(ObjectRecord {
                iid: next_iid,
                label: room_label(room),
                parent: None,
            });
        }
        records.push(ImageRecord {
            image_id: image_id.clone(),
            scene: format!("room {room:02}"),
            objects,
            label_map: Some(format!("maps/{image_id}.segmap")),
        });
        grids.insert(
            image_id,
            LabelGrid {
                width,
                height,
                cells: cells_grid,
            },
        );
    }
    Ok(PlantedPairs {
        corpus: Corpus::from_records(records)?,
        grids,
        pairs: (0..spec.n_pairs).map(pair_labels).collect(),
    })
}

impl PlantedPairs {
    pub fn graphs(&self, options: &ContextOptions) -> Result<Vec<SpatialContextGraph>> {
        self.corpus
            .images()
            .iter()
            .map(|image| {
                let map = LabelMap::for_image(image, self.grids[&image.image_id].clone())?;
                Ok(build_context_graph(&map, &image.image_id, options))
            })
            .collect()
    }

    /// Writes `corpus.jsonl` and `maps/<image_id>.segmap` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("maps"))?;
        for (image_id, grid) in &self.grids {
            let file = fs::File::create(dir.join("maps").join(format!("{image_id}.segmap")))?;
            write_segmap(grid, file)?;
        }
        self.corpus.save_jsonl(&dir.join("corpus.jsonl"))
    }
}
