//! Output directories with their resolved config and manifest.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "scene-embed";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct RunDir {
    dir: PathBuf,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path, config: Value) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Registers `name` as an output and returns its path.
    pub fn output(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|n| n == name) {
            self.outputs.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> scene_embed::Result<()>,
    {
        let path = self.output(name);
        let mut writer = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        f(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.output(name);
        write_json_file(&path, value)
    }

    /// Writes `config.json` and `manifest.json`.
    pub fn finish(self) -> Result<()> {
        write_json_file(&self.dir.join("config.json"), &self.config)?;
        let config_bytes = fs::read(self.dir.join("config.json"))?;

        let mut inputs = Vec::new();
        for path in &self.inputs {
            inputs.push(json!({
                "path": path.display().to_string(),
                "sha256": hash_input(path)?,
            }));
        }
        let mut outputs = Vec::new();
        let mut names = self.outputs.clone();
        names.sort();
        for name in names {
            outputs.extend(hash_output(&self.dir, &name)?);
        }
        let manifest = json!({
            "tool": TOOL,
            "version": VERSION,
            "config_sha256": hex::encode(Sha256::digest(&config_bytes)),
            "inputs": inputs,
            "outputs": outputs,
        });
        write_json_file(&self.dir.join("manifest.json"), &manifest)
    }
}

fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut writer =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

fn hash_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

/// Directories (dataset roots) are not hashed.
fn hash_input(path: &Path) -> Result<Value> {
    if path.is_dir() {
        Ok(Value::Null)
    } else {
        Ok(Value::String(hash_file(path)?))
    }
}

/// One entry per file; output directories are expanded in sorted order.
fn hash_output(dir: &Path, name: &str) -> Result<Vec<Value>> {
    let path = dir.join(name);
    if !path.is_dir() {
        return Ok(vec![json!({ "path": name, "sha256": hash_file(&path)? })]);
    }
    let mut entries: Vec<String> = fs::read_dir(&path)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<io::Result<_>>()?;
    entries.sort();
    let mut out = Vec::new();
    for entry in entries {
        out.extend(hash_output(dir, &format!("{name}/{entry}"))?);
    }
    Ok(out)
}
