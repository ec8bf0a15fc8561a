//! Latent semantic analysis: truncated SVD `X ~ O diag(L) S^T` of the
//! object-by-scene matrix.
//!
//! Small problems use a dense Golub-Kahan SVD. Larger ones use a randomized
//! range finder (seeded Gaussian test matrix, oversampling and power
//! iterations) followed by an exact SVD of the projected matrix. Singular
//! vectors are sign-normalized so that the largest-magnitude entry of every
//! left singular vector is positive.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cooccur::{CooccurrenceMatrix, Normalization};
use crate::embedding::{EmbeddingMatrix, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LsaOptions {
    pub oversample: usize,
    pub power_iterations: usize,
    /// Problems with `min(n, m)` at or below this size use the dense SVD.
    pub dense_cutoff: usize,
    /// Scale exported embedding rows by the singular values.
    pub scale_by_singular_values: bool,
}

impl Default for LsaOptions {
    fn default() -> Self {
        LsaOptions {
            oversample: 10,
            power_iterations: 4,
            dense_cutoff: 400,
            scale_by_singular_values: false,
        }
    }
}

/// Rank-`d` factors of an occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LsaModel {
    /// `n x d`, orthonormal columns.
    pub objects: DMatrix<f64>,
    /// `m x d`, orthonormal columns.
    pub scenes: DMatrix<f64>,
    /// Non-increasing, length `d`.
    pub singular_values: Vec<f64>,
    pub normalization: Normalization,
    pub object_labels: Vec<String>,
    pub scene_labels: Vec<String>,
    pub scale_by_singular_values: bool,
}

pub fn fit_lsa(x: &CooccurrenceMatrix, d: usize, seed: u64) -> Result<LsaModel> {
    fit_lsa_with(x, d, seed, &LsaOptions::default())
}

pub fn fit_lsa_with(
    x: &CooccurrenceMatrix,
    d: usize,
    seed: u64,
    options: &LsaOptions,
) -> Result<LsaModel> {
    let (objects, singular_values, scenes) = truncated_svd(&x.values, d, seed, options)?;
    Ok(LsaModel {
        objects,
        scenes,
        singular_values,
        normalization: x.normalization,
        object_labels: x.object_labels.clone(),
        scene_labels: x.scene_labels.clone(),
        scale_by_singular_values: options.scale_by_singular_values,
    })
}

/// Returns `(U, sigma, V)` with `U: n x d`, `V: m x d`.
pub fn truncated_svd(
    a: &DMatrix<f64>,
    d: usize,
    seed: u64,
    options: &LsaOptions,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (n, m) = a.shape();
    let k = n.min(m);
    if d == 0 || d > k {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {d} must lie in [1, {k}] for a {n}x{m} matrix"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("occurrence matrix".into()));
    }

    let (u, sigma, v) = if k <= options.dense_cutoff {
        dense_svd(a.clone())
    } else {
        randomized_svd(a, d, seed, options)
    };
    let mut u = u.columns(0, d).into_owned();
    let mut v = v.columns(0, d).into_owned();
    let sigma = sigma[..d].to_vec();
    fix_signs(&mut u, &mut v);
    Ok((u, sigma, v))
}

/// Full thin SVD, sorted by non-increasing singular value.
fn dense_svd(a: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = SVD::new(a, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    (u, sigma, v)
}

fn randomized_svd(
    a: &DMatrix<f64>,
    d: usize,
    seed: u64,
    options: &LsaOptions,
) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (n, m) = a.shape();
    let width = (d + options.oversample).min(n.min(m));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(m, width, |_, _| StandardNormal.sample(&mut rng));

    let mut q = (a * omega).qr().q();
    for _ in 0..options.power_iterations {
        let z = (a.transpose() * &q).qr().q();
        q = (a * z).qr().q();
    }
    let b = q.transpose() * a;
    let (ub, sigma, v) = dense_svd(b);
    (q * ub, sigma, v)
}

fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for c in 0..u.ncols() {
        let mut best = 0;
        for r in 1..u.nrows() {
            if u[(r, c)].abs() > u[(best, c)].abs() {
                best = r;
            }
        }
        if u[(best, c)] < 0.0 {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
}

impl LsaModel {
    pub fn dim(&self) -> usize {
        self.singular_values.len()
    }

    /// Projects an object-count vector: `O^T x`.
    pub fn embed_objects(&self, counts: &[f64]) -> Result<Vec<f64>> {
        if counts.len() != self.objects.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.objects.nrows(),
                actual: counts.len(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        for (i, &c) in counts.iter().enumerate() {
            if c != 0.0 {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += self.objects[(i, k)] * c;
                }
            }
        }
        Ok(out)
    }

    /// Binarized presence vector over the model's object vocabulary; labels
    /// the model has never seen are ignored.
    pub fn presence_vector<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut counts = vec![0.0; self.objects.nrows()];
        for label in labels {
            if let Some(i) = self.object_labels.iter().position(|l| l == label) {
                counts[i] = 1.0;
            }
        }
        counts
    }

    fn model_tag(&self) -> String {
        format!("lsa-{}", self.normalization)
    }

    fn export(&self, factors: &DMatrix<f64>, labels: &[String], role: Role) -> EmbeddingMatrix {
        let d = self.dim();
        let mut values = Vec::with_capacity(factors.nrows() * d);
        for r in 0..factors.nrows() {
            for c in 0..d {
                let scale = if self.scale_by_singular_values {
                    self.singular_values[c]
                } else {
                    1.0
                };
                values.push(factors[(r, c)] * scale);
            }
        }
        EmbeddingMatrix::new(values, d, labels.to_vec(), role, self.model_tag())
            .expect("SVD factors are finite")
    }

    pub fn object_embeddings(&self) -> EmbeddingMatrix {
        self.export(&self.objects, &self.object_labels, Role::Object)
    }

    pub fn scene_embeddings(&self) -> EmbeddingMatrix {
        self.export(&self.scenes, &self.scene_labels, Role::Scene)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut writer, &StoredModel::from(self))?;
        writer.flush()?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let stored: StoredModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        stored.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    normalization: String,
    d: usize,
    singular_values: Vec<f64>,
    object_labels: Vec<String>,
    scene_labels: Vec<String>,
    /// row-major
    objects: Vec<f64>,
    scenes: Vec<f64>,
    scale_by_singular_values: bool,
}

impl From<&LsaModel> for StoredModel {
    fn from(model: &LsaModel) -> Self {
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        StoredModel {
            normalization: model.normalization.to_string(),
            d: model.dim(),
            singular_values: model.singular_values.clone(),
            object_labels: model.object_labels.clone(),
            scene_labels: model.scene_labels.clone(),
            objects: row_major(&model.objects),
            scenes: row_major(&model.scenes),
            scale_by_singular_values: model.scale_by_singular_values,
        }
    }
}

impl TryFrom<StoredModel> for LsaModel {
    type Error = Error;

    fn try_from(s: StoredModel) -> Result<Self> {
        let check = |len: usize, rows: usize| {
            if len == rows * s.d {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: rows * s.d,
                    actual: len,
                })
            }
        };
        check(s.objects.len(), s.object_labels.len())?;
        check(s.scenes.len(), s.scene_labels.len())?;
        check(s.singular_values.len(), 1)?;
        Ok(LsaModel {
            objects: DMatrix::from_row_slice(s.object_labels.len(), s.d, &s.objects),
            scenes: DMatrix::from_row_slice(s.scene_labels.len(), s.d, &s.scenes),
            singular_values: s.singular_values,
            normalization: s.normalization.parse()?,
            object_labels: s.object_labels,
            scene_labels: s.scene_labels,
            scale_by_singular_values: s.scale_by_singular_values,
        })
    }
}
