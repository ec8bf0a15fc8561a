use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    choose_positives, draw_negatives, sgns_step, subsample_keep, EpochLog, NegativeSampler,
    RowGradients, Table, TrainConfig,
};
use crate::corpus::Corpus;
use crate::embedding::{EmbeddingMatrix, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainedSkipgram {
    /// Input embeddings, one row per scene category.
    pub scenes: EmbeddingMatrix,
    /// Output embeddings, one row per object.
    pub objects: EmbeddingMatrix,
    pub log: Vec<EpochLog>,
}

/// Scene-to-object Skipgram with negative sampling.
///
/// Each epoch visits the images in random order, rejects an image with
/// probability `1 - sqrt(t / f(s))`, and uses its scene to predict
/// `n_positive` of its objects against `n_negative` objects drawn from
/// `f(o)^neg_exponent`.
pub fn train_skipgram_scene(corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainedSkipgram> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_scenes = corpus.scene_vocab().len();
    let n_objects = corpus.object_vocab().len();
    let mut scene_in = Table::uniform(n_scenes, cfg.d, &mut rng);
    let mut object_out = Table::uniform(n_objects, cfg.d, &mut rng);
    let mut adam_in = cfg.adam(n_scenes);
    let mut adam_out = cfg.adam(n_objects);

    let frequencies = corpus.scene_frequencies();
    let object_freq: Vec<f64> = corpus
        .object_image_freq()
        .iter()
        .map(|&c| c as f64)
        .collect();
    let sampler = NegativeSampler::new(&object_freq, cfg.neg_exponent)?;
    let strict = cfg.strict_negatives.unwrap_or(false);
    let image_objects: Vec<Vec<usize>> = corpus
        .images()
        .iter()
        .map(|image| image.distinct_objects())
        .collect();

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut kept = 0;
        for &k in &order {
            let scene = corpus.images()[k].scene;
            if !subsample_keep(frequencies[scene], cfg.subsample_t, &mut rng) {
                continue;
            }
            let objects = &image_objects[k];
            if objects.is_empty() {
                continue;
            }
            kept += 1;
            let positives = choose_positives(objects, cfg.n_positive, &mut rng);
            let negatives = draw_negatives(&sampler, cfg.n_negative, objects, strict, &mut rng);

            let step = {
                let pos: Vec<&[f64]> = positives.iter().map(|&o| object_out.row(o)).collect();
                let neg: Vec<&[f64]> = negatives.iter().map(|&o| object_out.row(o)).collect();
                sgns_step(scene_in.row(scene), &pos, &neg)?
            };
            loss_sum += step.loss;

            let mut grads = RowGradients::default();
            for (&o, g) in positives.iter().zip(&step.positives) {
                grads.add(o, g);
            }
            for (&o, g) in negatives.iter().zip(&step.negatives) {
                grads.add(o, g);
            }
            adam_in.update_row(&mut scene_in.data, scene, &step.input);
            grads.apply(&mut object_out, &mut adam_out);
        }
        scene_in.check_finite("scene embeddings", epoch)?;
        object_out.check_finite("object embeddings", epoch)?;
        log.push(EpochLog {
            epoch,
            mean_loss: if kept > 0 {
                loss_sum / kept as f64
            } else {
                0.0
            },
            images_kept: kept,
        });
    }

    Ok(TrainedSkipgram {
        scenes: EmbeddingMatrix::new(
            scene_in.data,
            cfg.d,
            corpus.scene_vocab().tokens().to_vec(),
            Role::Scene,
            "skipgram",
        )?,
        objects: EmbeddingMatrix::new(
            object_out.data,
            cfg.d,
            corpus.object_vocab().tokens().to_vec(),
            Role::Object,
            "skipgram",
        )?,
        log,
    })
}
