use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::canonicalize_label;
use crate::error::{Error, Result};

/// Scene label to supercategory label.
///
/// File format: one `scene<TAB>supercategory` pair per line; blank lines
/// and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupercategoryMap {
    by_scene: BTreeMap<String, String>,
}

impl SupercategoryMap {
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: Into<String>,
    {
        SupercategoryMap {
            by_scene: pairs
                .into_iter()
                .map(|(s, c)| (canonicalize_label(s.as_ref()), c.into()))
                .collect(),
        }
    }

    pub fn get(&self, scene: &str) -> Option<&str> {
        self.by_scene
            .get(&canonicalize_label(scene))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_scene.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_scene.is_empty()
    }

    pub fn read<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut by_scene = BTreeMap::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((scene, category)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    message: "expected `scene<TAB>supercategory`".into(),
                });
            };
            let scene = canonicalize_label(scene);
            let category = category.trim().to_string();
            if let Some(previous) = by_scene.insert(scene.clone(), category.clone()) {
                if previous != category {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line: k + 1,
                        message: format!(
                            "scene `{scene}` mapped to both `{previous}` and `{category}`"
                        ),
                    });
                }
            }
        }
        Ok(SupercategoryMap { by_scene })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(fs::File::open(path)?), path)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for (scene, category) in &self.by_scene {
            writeln!(writer, "{scene}\t{category}")?;
        }
        Ok(())
    }
}
