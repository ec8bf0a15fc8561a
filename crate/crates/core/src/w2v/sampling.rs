use rand::Rng;

use crate::error::{Error, Result};

/// Probability of keeping an input with relative frequency `f` under
/// threshold `t`: `min(1, sqrt(t / f))`. `t = 0` disables subsampling.
pub fn keep_probability(f: f64, t: f64) -> f64 {
    if t <= 0.0 || f <= 0.0 {
        1.0
    } else {
        (t / f).sqrt().min(1.0)
    }
}

pub fn subsample_keep<R: Rng>(f: f64, t: f64, rng: &mut R) -> bool {
    let p = keep_probability(f, t);
    p >= 1.0 || rng.random::<f64>() < p
}

/// Draws ids with probability proportional to `f(o)^exponent`; ids with zero
/// frequency are never drawn.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    probabilities: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(frequencies: &[f64], exponent: f64) -> Result<Self> {
        if frequencies.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::InvalidArgument(
                "frequencies must be finite and non-negative".into(),
            ));
        }
        let weights: Vec<f64> = frequencies
            .iter()
            .map(|&f| if f > 0.0 { f.powf(exponent) } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidArgument(
                "negative sampling needs at least one non-zero frequency".into(),
            ));
        }
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut running = 0.0;
        for w in &weights {
            running += w;
            cumulative.push(running / total);
        }
        Ok(NegativeSampler {
            cumulative,
            probabilities,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // rounding can leave the last cumulative value just below 1
        let idx = idx.min(self.cumulative.len() - 1);
        if self.probabilities[idx] > 0.0 {
            idx
        } else {
            // skip trailing zero-probability ids
            (0..=idx)
                .rev()
                .find(|&i| self.probabilities[i] > 0.0)
                .expect("non-zero mass")
        }
    }
}
