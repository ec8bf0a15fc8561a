//! Importer for the ADE20K_2016_07_26 directory layout.
//!
//! Each image `X.jpg` comes with `X_atr.txt` (one line per annotated
//! instance: `instance # part level # occluded # synonyms # raw name #
//! attributes`), `X_seg.png` (whole-object instances) and optional
//! `X_parts_<level>.png` files. Instance masks are encoded in the blue
//! channel; the local instance index of a pixel is the rank of its blue value
//! among the distinct blue values of the file, minus one (so the lowest value
//! is background).
//!
//! Instance `k` of part level `L` receives the image-wide id
//! `offset(L) + k`, where `offset(L)` is the number of instances on all
//! shallower levels. Parts are linked to the instance one level up that
//! covers most of their pixels. Scene labels come from the directory path
//! below the single-letter bucket (`training/b/bathroom/` gives `bathroom`).

use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{canonicalize_label, Corpus, ImageRecord, ObjectRecord};
use crate::error::{Error, Result};

const ATR_SUFFIX: &str = "_atr.txt";
const SEG_SUFFIX: &str = "_seg.png";

/// Instance index grid for one annotation level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelGrid {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u32>,
}

impl LevelGrid {
    fn max_id(&self) -> u32 {
        self.ids.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AtrEntry {
    instance: u32,
    level: usize,
    label: String,
}

pub fn load_ade20k(root: &Path) -> Result<Corpus> {
    let mut atr_files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(ATR_SUFFIX))
        })
        .collect();
    atr_files.sort();

    let mut records = Vec::with_capacity(atr_files.len());
    for atr_path in atr_files {
        records.push(import_image(root, &atr_path)?);
    }
    Corpus::from_records(records)
}

fn import_image(root: &Path, atr_path: &Path) -> Result<ImageRecord> {
    let name = atr_path
        .file_name()
        .and_then(|n| n.to_str())
        .expect("filtered on utf-8 names");
    let image_id = name.trim_end_matches(ATR_SUFFIX).to_string();
    let dir = atr_path.parent().unwrap_or(Path::new("."));
    let scene = scene_from_dir(root, dir);
    let entries = parse_atr(atr_path, &fs::read_to_string(atr_path)?)?;

    let seg_path = dir.join(format!("{image_id}{SEG_SUFFIX}"));
    let (offsets, levels) = if seg_path.exists() {
        let levels = decode_levels(&seg_path)?;
        (level_offsets(&levels), Some(levels))
    } else {
        let depth = entries.iter().map(|e| e.level + 1).max().unwrap_or(1);
        let mut counts = vec![0u32; depth];
        for e in &entries {
            counts[e.level] = counts[e.level].max(e.instance);
        }
        (prefix_offsets(&counts), None)
    };

    let mut objects = Vec::with_capacity(entries.len());
    for entry in &entries {
        let offset = *offsets
            .get(entry.level)
            .ok_or_else(|| Error::InvalidImage {
                image: image_id.clone(),
                message: format!("part level {} has no mask file", entry.level),
            })?;
        let parent = match (&levels, entry.level) {
            (Some(levels), level) if level > 0 && level < levels.len() => {
                covering_instance(&levels[level], &levels[level - 1], entry.instance)
                    .map(|p| offsets[level - 1] + p)
            }
            _ => None,
        };
        objects.push(ObjectRecord {
            iid: offset + entry.instance,
            label: entry.label.clone(),
            parent,
        });
    }
    // parents that point at unlisted instances cannot be validated; drop them
    let listed: std::collections::HashSet<u32> = objects.iter().map(|o| o.iid).collect();
    for object in &mut objects {
        if object.parent.is_some_and(|p| !listed.contains(&p)) {
            object.parent = None;
        }
    }

    let label_map = levels.map(|_| {
        fs::canonicalize(&seg_path)
            .unwrap_or(seg_path.clone())
            .to_string_lossy()
            .into_owned()
    });
    Ok(ImageRecord {
        image_id,
        scene,
        objects,
        label_map,
    })
}

fn scene_from_dir(root: &Path, dir: &Path) -> String {
    let relative = dir.strip_prefix(root).unwrap_or(dir);
    let parts: Vec<String> = relative
        .components()
        .filter_map(|c| c.as_os_str().to_str())
        .filter(|c| {
            !matches!(
                *c,
                "images" | "training" | "validation" | "ADE20K_2016_07_26"
            ) && c.chars().count() > 1
        })
        .map(|c| c.to_string())
        .collect();
    canonicalize_label(&parts.join("/"))
}

fn parse_atr(path: &Path, text: &str) -> Result<Vec<AtrEntry>> {
    let mut entries = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: index + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split('#').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(bad("expected at least four `#`-separated fields"));
        }
        let instance: u32 = fields[0].parse().map_err(|_| bad("bad instance number"))?;
        let level: usize = fields[1].parse().map_err(|_| bad("bad part level"))?;
        if instance == 0 {
            return Err(bad("instance numbers start at 1"));
        }
        let first_synonym = fields[3].split(',').next().unwrap_or("");
        entries.push(AtrEntry {
            instance,
            level,
            label: canonicalize_label(first_synonym),
        });
    }
    Ok(entries)
}

/// Decodes `X_seg.png` and every consecutive `X_parts_<k>.png` next to it.
pub fn decode_levels(seg_path: &Path) -> Result<Vec<LevelGrid>> {
    let mut levels = vec![decode_instance_png(seg_path)?];
    let stem = seg_path
        .to_str()
        .and_then(|s| s.strip_suffix(SEG_SUFFIX))
        .ok_or_else(|| Error::LabelMap(format!("{} is not a _seg.png file", seg_path.display())))?;
    for level in 1.. {
        let parts = PathBuf::from(format!("{stem}_parts_{level}.png"));
        if !parts.exists() {
            break;
        }
        let grid = decode_instance_png(&parts)?;
        if grid.width != levels[0].width || grid.height != levels[0].height {
            return Err(Error::LabelMap(format!(
                "{} has a different size than the object mask",
                parts.display()
            )));
        }
        levels.push(grid);
    }
    Ok(levels)
}

fn decode_instance_png(path: &Path) -> Result<LevelGrid> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (width, height) = (img.width() as usize, img.height() as usize);
    let blue: Vec<u8> = img.pixels().map(|p| p[2]).collect();
    let mut distinct = blue.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut rank = [0u32; 256];
    for (k, &value) in distinct.iter().enumerate() {
        rank[value as usize] = k as u32;
    }
    let ids = blue.iter().map(|&b| rank[b as usize]).collect();
    Ok(LevelGrid { width, height, ids })
}

fn level_offsets(levels: &[LevelGrid]) -> Vec<u32> {
    prefix_offsets(&levels.iter().map(LevelGrid::max_id).collect::<Vec<_>>())
}

fn prefix_offsets(counts: &[u32]) -> Vec<u32> {
    let mut offsets = Vec::with_capacity(counts.len());
    let mut total = 0;
    for &c in counts {
        offsets.push(total);
        total += c;
    }
    offsets
}

/// Instance of `upper` covering most pixels of `instance` in `lower`.
fn covering_instance(lower: &LevelGrid, upper: &LevelGrid, instance: u32) -> Option<u32> {
    let mut votes = std::collections::BTreeMap::new();
    for (&id, &above) in lower.ids.iter().zip(&upper.ids) {
        if id == instance && above != 0 {
            *votes.entry(above).or_insert(0usize) += 1;
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
}

/// Flattens all levels into one grid of image-wide instance ids; deeper
/// levels (parts) overwrite the pixels of the instance they belong to.
pub fn composite_grid(levels: &[LevelGrid]) -> LevelGrid {
    let offsets = level_offsets(levels);
    let mut ids = vec![0u32; levels[0].ids.len()];
    for (level, grid) in levels.iter().enumerate() {
        for (out, &id) in ids.iter_mut().zip(&grid.ids) {
            if id != 0 {
                *out = offsets[level] + id;
            }
        }
    }
    LevelGrid {
        width: levels[0].width,
        height: levels[0].height,
        ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn write_png(path: &Path, blue: &[&[u8]]) {
        let h = blue.len() as u32;
        let w = blue[0].len() as u32;
        let img = RgbImage::from_fn(w, h, |x, y| Rgb([10, 3, blue[y as usize][x as usize]]));
        img.save(path).unwrap();
    }

    #[test]
    fn imports_objects_parts_and_scene() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("images/training/b/bathroom");
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("ADE_train_1_atr.txt"),
            "001 # 0 # 0 # wall # wall # \"\"\n\
             002 # 0 # 0 # person, individual # person # \"\"\n\
             001 # 1 # 0 # arm # arm # \"\"\n",
        )
        .unwrap();
        // blue 0 is background, 40 -> instance 1 (wall), 90 -> instance 2 (person)
        write_png(
            &dir.join("ADE_train_1_seg.png"),
            &[&[40, 40, 90, 90], &[40, 40, 90, 90], &[0, 0, 90, 90]],
        );
        write_png(
            &dir.join("ADE_train_1_parts_1.png"),
            &[&[0, 0, 0, 0], &[0, 0, 0, 7], &[0, 0, 0, 7]],
        );

        let corpus = load_ade20k(root.path()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.scene_vocab().tokens(), ["bathroom"]);
        assert_eq!(corpus.object_vocab().tokens(), ["arm", "person", "wall"]);
        let image = &corpus.images()[0];
        assert_eq!(image.image_id, "ADE_train_1");
        let arm = image.instances.iter().find(|i| i.iid == 3).unwrap();
        assert_eq!(arm.parent, Some(2));
        assert!(image
            .label_map
            .as_deref()
            .unwrap()
            .ends_with("ADE_train_1_seg.png"));

        let levels = decode_levels(Path::new(image.label_map.as_deref().unwrap())).unwrap();
        let grid = composite_grid(&levels);
        assert_eq!(grid.ids, vec![1, 1, 2, 2, 1, 1, 2, 3, 0, 0, 2, 3]);
    }

    #[test]
    fn malformed_attribute_line_reports_line() {
        let err = parse_atr(Path::new("x_atr.txt"), "001 # 0 # 0 # wall\nbad line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
