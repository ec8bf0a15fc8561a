//! SEGMAP v1 text label maps and the PNG import cache.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::corpus::ade20k::{composite_grid, decode_levels};
use crate::error::{Error, Result};

const MAGIC: &str = "SEGMAP v1";

/// Row-major grid of instance ids, `0` for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u32>,
}

pub fn write_segmap<W: Write>(grid: &LabelGrid, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{} {}", grid.width, grid.height)?;
    for row in grid.cells.chunks(grid.width.max(1)) {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_segmap<R: BufRead>(reader: R, origin: &Path) -> Result<LabelGrid> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    let mut next = |n: usize| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| err(n, "unexpected end of file".into()))
    };
    if next(1)?.trim_end() != MAGIC {
        return Err(err(1, format!("expected `{MAGIC}` header")));
    }
    let dims = next(2)?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| err(2, format!("bad dimension `{t}`")))
        })
        .collect::<Result<_>>()?;
    let [width, height] = dims[..] else {
        return Err(err(2, "expected `<width> <height>`".into()));
    };
    let mut cells = Vec::with_capacity(width * height);
    for row in 0..height {
        let n = row + 3;
        let line = next(n)?;
        let before = cells.len();
        for t in line.split_whitespace() {
            cells.push(
                t.parse::<u32>()
                    .map_err(|_| err(n, format!("bad value `{t}`")))?,
            );
        }
        if cells.len() - before != width {
            return Err(err(
                n,
                format!("expected {width} values, found {}", cells.len() - before),
            ));
        }
    }
    Ok(LabelGrid {
        width,
        height,
        cells,
    })
}

/// Loads a label map. `.png` paths are decoded as ADE20K `_seg.png` files
/// (with their part levels); with a cache directory the decoded grid is
/// stored as SEGMAP and reused on later calls.
pub fn load_label_grid(path: &Path, image_id: &str, cache_dir: Option<&Path>) -> Result<LabelGrid> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        let file = fs::File::open(path)?;
        return read_segmap(BufReader::new(file), path);
    }
    let cached = cache_dir.map(|dir| cache_path(dir, image_id));
    if let Some(cached) = &cached {
        if cached.exists() {
            let file = fs::File::open(cached)?;
            return read_segmap(BufReader::new(file), cached);
        }
    }
    let flat = composite_grid(&decode_levels(path)?);
    let grid = LabelGrid {
        width: flat.width,
        height: flat.height,
        cells: flat.ids,
    };
    if let Some(cached) = cached {
        if let Some(dir) = cached.parent() {
            fs::create_dir_all(dir)?;
        }
        // write-then-rename keeps concurrent readers from seeing partial files
        let tmp = cached.with_extension(format!("tmp{}", std::process::id()));
        write_segmap(&grid, fs::File::create(&tmp)?)?;
        fs::rename(&tmp, &cached)?;
    }
    Ok(grid)
}

fn cache_path(dir: &Path, image_id: &str) -> PathBuf {
    let name: String = image_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{name}.segmap"))
}
