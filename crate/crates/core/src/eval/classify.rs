use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::norm;
use crate::corpus::{Corpus, SceneImage};
use crate::error::{Error, Result};
use crate::lsa::LsaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMethod {
    NearestCentroid,
    MultinomialLogistic,
}

impl fmt::Display for ClassifierMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierMethod::NearestCentroid => "nearest_centroid",
            ClassifierMethod::MultinomialLogistic => "logistic",
        })
    }
}

impl FromStr for ClassifierMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest_centroid" => Ok(ClassifierMethod::NearestCentroid),
            "logistic" | "multinomial_logistic" => Ok(ClassifierMethod::MultinomialLogistic),
            other => Err(Error::InvalidArgument(format!(
                "unknown classifier `{other}`"
            ))),
        }
    }
}

/// Full-batch gradient descent on standardized features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            iterations: 500,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub method: ClassifierMethod,
    pub top1: f64,
    pub top5: f64,
    /// Rank cut-off actually used for the second score; below 5 when
    /// fewer scene classes exist.
    pub top_k: usize,
    pub n_classes: usize,
    pub n_tested: usize,
    /// Test images whose scene never occurs in the training corpus.
    pub excluded: usize,
}

/// Projects every image's binarized object vector through the model and
/// ranks the training scenes for each test image.
pub fn classify_scenes(
    train: &Corpus,
    test: &Corpus,
    model: &LsaModel,
    method: ClassifierMethod,
    logistic: &LogisticOptions,
) -> Result<ClassificationReport> {
    let embed = |corpus: &Corpus, image: &SceneImage| -> Result<Vec<f64>> {
        let vocab = corpus.object_vocab();
        let labels: Vec<&str> = image
            .distinct_objects()
            .into_iter()
            .map(|o| vocab.token(o))
            .collect();
        model.embed_objects(&model.presence_vector(labels))
    };

    let classes: Vec<&str> = {
        let mut seen: Vec<&str> = train
            .images()
            .iter()
            .map(|i| train.scene_vocab().token(i.scene))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    };
    if classes.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let class_of: BTreeMap<&str, usize> =
        classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();

    let mut train_x = Vec::with_capacity(train.len());
    let mut train_y = Vec::with_capacity(train.len());
    for image in train.images() {
        train_x.push(embed(train, image)?);
        train_y.push(class_of[train.scene_vocab().token(image.scene)]);
    }

    let scorer: Box<dyn Fn(&[f64]) -> Vec<f64>> = match method {
        ClassifierMethod::NearestCentroid => {
            let centroids = centroids(&train_x, &train_y, classes.len(), model.dim());
            Box::new(move |x| {
                let nx = norm(x);
                centroids
                    .iter()
                    .map(|c| {
                        let nc = norm(c);
                        if nx == 0.0 || nc == 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        // higher is better: negative cosine distance
                        x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / (nx * nc) - 1.0
                    })
                    .collect()
            })
        }
        ClassifierMethod::MultinomialLogistic => {
            let fitted = Logistic::fit(&train_x, &train_y, classes.len(), logistic);
            Box::new(move |x| fitted.logits(x))
        }
    };

    let top_k = classes.len().min(5);
    let (mut hits1, mut hitsk, mut tested, mut excluded) = (0usize, 0usize, 0usize, 0usize);
    for image in test.images() {
        let Some(&truth) = class_of.get(test.scene_vocab().token(image.scene)) else {
            excluded += 1;
            continue;
        };
        let scores = scorer(&embed(test, image)?);
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        tested += 1;
        if order[0] == truth {
            hits1 += 1;
        }
        if order[..top_k].contains(&truth) {
            hitsk += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} test images have scenes absent from training and were excluded");
    }
    if tested == 0 {
        return Err(Error::InvalidArgument(
            "no test image has a scene seen in training".into(),
        ));
    }
    Ok(ClassificationReport {
        method,
        top1: hits1 as f64 / tested as f64,
        top5: hitsk as f64 / tested as f64,
        top_k,
        n_classes: classes.len(),
        n_tested: tested,
        excluded,
    })
}

fn centroids(x: &[Vec<f64>], y: &[usize], classes: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (row, &c) in x.iter().zip(y) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    sums
}

struct Logistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (dim + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl Logistic {
    fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, opts: &LogisticOptions) -> Self {
        let dim = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|k| x.iter().map(|r| r[k]).sum::<f64>() / n)
            .collect();
        let scale: Vec<f64> = (0..dim)
            .map(|k| {
                let var = x.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut model = Logistic {
            mean,
            scale,
            weights: vec![vec![0.0; dim + 1]; classes],
        };
        let features: Vec<Vec<f64>> = x.iter().map(|r| model.features(r)).collect();
        for _ in 0..opts.iterations {
            let mut grad = vec![vec![0.0; dim + 1]; classes];
            for (f, &label) in features.iter().zip(y) {
                let probs = softmax(&model.raw_logits(f));
                for (c, g) in grad.iter_mut().enumerate() {
                    let err = probs[c] - if c == label { 1.0 } else { 0.0 };
                    for (gk, fk) in g.iter_mut().zip(f) {
                        *gk += err * fk;
                    }
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for (k, (wk, gk)) in w.iter_mut().zip(g).enumerate() {
                    let penalty = if k < dim { opts.l2 * *wk } else { 0.0 };
                    *wk -= opts.learning_rate * (gk / n + penalty);
                }
            }
        }
        model
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = x
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        f.push(1.0);
        f
    }

    fn raw_logits(&self, f: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.raw_logits(&self.features(x))
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}
