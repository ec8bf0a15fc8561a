//! Token-indexed embedding matrices and their TSV exchange format.
//!
//! File layout: a header line `#role=<object|scene> d=<d> model=<tag>`,
//! then one line per token: the token text followed by `d` tab-separated
//! values in `%.8e`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fmt::fmt_e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Object,
    Scene,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Object => "object",
            Role::Scene => "scene",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "object" => Ok(Role::Object),
            "scene" => Ok(Role::Scene),
            other => Err(Error::InvalidArgument(format!("unknown role `{other}`"))),
        }
    }
}

/// Dense row-major `rows x dim` matrix with one token per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Vec<f64>,
    dim: usize,
    vocab: Vec<String>,
    role: Role,
    model: String,
}

impl EmbeddingMatrix {
    pub fn new(
        values: Vec<f64>,
        dim: usize,
        vocab: Vec<String>,
        role: Role,
        model: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be positive".into(),
            ));
        }
        if values.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                actual: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding of `{}`",
                vocab[k / dim]
            )));
        }
        Ok(EmbeddingMatrix {
            values,
            dim,
            vocab,
            role,
            model: model.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocab.iter().position(|t| t == token)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(
            writer,
            "#role={} d={} model={}",
            self.role, self.dim, self.model
        )?;
        for (i, token) in self.vocab.iter().enumerate() {
            write!(writer, "{token}")?;
            for &v in self.row(i) {
                write!(writer, "\t{}", fmt_e(v, 8))?;
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
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| parse_err(1, "empty embedding file".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| parse_err(1, "missing `#role=... d=... model=...` header".into()))?;
        let (mut role, mut dim, mut model) = (None, None, None);
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("role", v)) => role = Some(v.parse::<Role>()?),
                Some(("d", v)) => {
                    dim = Some(
                        v.parse::<usize>()
                            .map_err(|e| parse_err(1, e.to_string()))?,
                    )
                }
                Some(("model", v)) => model = Some(v.to_string()),
                _ => return Err(parse_err(1, format!("unexpected header field `{field}`"))),
            }
        }
        let (role, dim, model) = match (role, dim, model) {
            (Some(r), Some(d), Some(m)) => (r, d, m),
            _ => return Err(parse_err(1, "header needs role, d and model".into())),
        };

        let mut vocab = Vec::new();
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let token = fields.next().unwrap_or_default().to_string();
            let before = values.len();
            for field in fields {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| parse_err(k + 2, format!("`{field}`: {e}")))?,
                );
            }
            if values.len() - before != dim {
                return Err(parse_err(
                    k + 2,
                    format!("expected {dim} values, found {}", values.len() - before),
                ));
            }
            vocab.push(token);
        }
        EmbeddingMatrix::new(values, dim, vocab, role, model)
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        Self::read_tsv(BufReader::new(File::open(path)?), path)
    }
}
