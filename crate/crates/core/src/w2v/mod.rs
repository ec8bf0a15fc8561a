//! Asymmetric Skipgram and CBOW trainers over a scene vocabulary and an
//! object vocabulary, plus the Skipgram variant driven by spatial context.
//!
//! All trainers use sparse Adam updates (only rows touched by a step move)
//! and a single seeded ChaCha stream, so a fixed seed reproduces the
//! embeddings bit for bit.

mod adam;
mod cbow;
mod loss;
mod sampling;
mod skipgram;
mod spatial;

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};

pub use adam::SparseAdam;
pub use cbow::{train_cbow, TrainedCbow};
pub use loss::{log_sigmoid, sgns_step, softmax_step, SgnsGradients, SoftmaxGradients};
pub use sampling::{keep_probability, subsample_keep, NegativeSampler};
pub use skipgram::{train_skipgram_scene, TrainedSkipgram};
pub use spatial::{train_skipgram_spatial, TrainedSpatial};

/// Hyperparameters shared by all trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub d: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Subsampling threshold `t`; `0` disables subsampling.
    pub subsample_t: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Exponent applied to object frequencies in the negative distribution.
    pub neg_exponent: f64,
    /// Number of objects summed into a CBOW input.
    pub context_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Resample negatives that hit the positive context (up to 10 tries).
    /// `None` selects the per-model default: on for spatial, off otherwise.
    pub strict_negatives: Option<bool>,
}

impl TrainConfig {
    pub fn new(d: usize, seed: u64) -> Self {
        TrainConfig {
            d,
            epochs: 100,
            learning_rate: 0.01,
            subsample_t: 0.005,
            n_positive: 5,
            n_negative: 20,
            neg_exponent: 0.75,
            context_size: 5,
            seed,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            strict_negatives: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("epochs", self.epochs),
            ("n_positive", self.n_positive),
            ("n_negative", self.n_negative),
            ("context_size", self.context_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.subsample_t >= 0.0 && self.subsample_t.is_finite()) {
            return Err(Error::InvalidArgument(
                "subsample_t must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidArgument(
                "Adam betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    fn adam(&self, rows: usize) -> SparseAdam {
        SparseAdam::new(
            rows,
            self.d,
            self.learning_rate,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
        )
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Images kept after subsampling (Skipgram), steps taken (CBOW) or
    /// targets trained (spatial Skipgram).
    pub images_kept: usize,
}

/// Writes the `epoch,mean_loss,images_kept` CSV log.
pub fn write_training_log<W: Write>(log: &[EpochLog], mut writer: W) -> Result<()> {
    writeln!(writer, "epoch,mean_loss,images_kept")?;
    for entry in log {
        writeln!(
            writer,
            "{},{},{}",
            entry.epoch,
            crate::fmt::fmt_g(entry.mean_loss, 10),
            entry.images_kept
        )?;
    }
    Ok(())
}

/// Row-major parameter table.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Table {
    /// Uniform initialization in `(-0.5/d, 0.5/d)`.
    pub fn uniform<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let half = 0.5 / dim as f64;
        let data = (0..rows * dim)
            .map(|_| rng.random_range(-half..half))
            .collect();
        Table { dim, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn check_finite(&self, what: &str, epoch: usize) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{what} after epoch {epoch}")))
        }
    }
}

/// Per-step gradient accumulator keyed by row.
#[derive(Debug, Default)]
pub(crate) struct RowGradients {
    rows: std::collections::BTreeMap<usize, Vec<f64>>,
}

impl RowGradients {
    pub fn add(&mut self, row: usize, grad: &[f64]) {
        let acc = self
            .rows
            .entry(row)
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (a, g) in acc.iter_mut().zip(grad) {
            *a += g;
        }
    }

    pub fn apply(self, table: &mut Table, adam: &mut SparseAdam) {
        for (row, grad) in self.rows {
            adam.update_row(&mut table.data, row, &grad);
        }
    }
}

/// `n` draws from `candidates`: without replacement when there are enough,
/// uniformly with replacement otherwise.
pub(crate) fn choose_positives<R: Rng>(candidates: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::IndexedRandom;
    if candidates.len() >= n {
        candidates.choose_multiple(rng, n).copied().collect()
    } else {
        (0..n)
            .map(|_| *candidates.choose(rng).expect("non-empty context"))
            .collect()
    }
}

/// Draws `n` negatives, optionally resampling (at most 10 times each)
/// those that fall inside `context`.
pub(crate) fn draw_negatives<R: Rng>(
    sampler: &NegativeSampler,
    n: usize,
    context: &[usize],
    strict: bool,
    rng: &mut R,
) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let mut candidate = sampler.sample(rng);
            if strict {
                for _ in 0..10 {
                    if !context.contains(&candidate) {
                        break;
                    }
                    candidate = sampler.sample(rng);
                }
            }
            candidate
        })
        .collect()
}
