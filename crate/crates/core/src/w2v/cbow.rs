use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{choose_positives, softmax_step, EpochLog, RowGradients, Table, TrainConfig};
use crate::corpus::Corpus;
use crate::embedding::{EmbeddingMatrix, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainedCbow {
    /// Input embeddings, one row per object.
    pub objects: EmbeddingMatrix,
    /// Output embeddings, one row per scene category.
    pub scenes: EmbeddingMatrix,
    pub log: Vec<EpochLog>,
}

/// Object-to-scene CBOW with a full softmax over scene categories.
///
/// A step samples an object uniformly, then an image containing it, then
/// fills the context from the image's other objects (repeating them when the
/// image is too small). The summed context embeddings predict the image's
/// scene. An epoch is `corpus.len()` steps.
pub fn train_cbow(corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainedCbow> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_scenes = corpus.scene_vocab().len();
    let n_objects = corpus.object_vocab().len();
    let mut object_in = Table::uniform(n_objects, cfg.d, &mut rng);
    let mut scene_out = Table::uniform(n_scenes, cfg.d, &mut rng);
    let mut adam_in = cfg.adam(n_objects);
    let mut adam_out = cfg.adam(n_scenes);

    let image_objects: Vec<Vec<usize>> = corpus
        .images()
        .iter()
        .map(|image| image.distinct_objects())
        .collect();
    let mut images_of = vec![Vec::new(); n_objects];
    for (k, objects) in image_objects.iter().enumerate() {
        for &o in objects {
            images_of[o].push(k);
        }
    }
    let candidates: Vec<usize> = (0..n_objects)
        .filter(|&o| !images_of[o].is_empty())
        .collect();

    let steps = corpus.len();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for _ in 0..steps {
            let first = *candidates.choose(&mut rng).expect("objects present");
            let k = *images_of[first].choose(&mut rng).expect("image present");
            let scene = corpus.images()[k].scene;
            let others: Vec<usize> = image_objects[k]
                .iter()
                .copied()
                .filter(|&o| o != first)
                .collect();
            let mut context = vec![first];
            if others.is_empty() {
                context.resize(cfg.context_size, first);
            } else {
                context.extend(choose_positives(&others, cfg.context_size - 1, &mut rng));
            }
            context.shuffle(&mut rng);

            let mut hidden = vec![0.0; cfg.d];
            for &o in &context {
                for (h, x) in hidden.iter_mut().zip(object_in.row(o)) {
                    *h += x;
                }
            }
            let step = softmax_step(&hidden, &scene_out.data, scene)?;
            loss_sum += step.loss;

            let mut grads = RowGradients::default();
            for &o in &context {
                grads.add(o, &step.hidden);
            }
            grads.apply(&mut object_in, &mut adam_in);
            for (s, g) in step.outputs.chunks(cfg.d).enumerate() {
                adam_out.update_row(&mut scene_out.data, s, g);
            }
        }
        object_in.check_finite("object embeddings", epoch)?;
        scene_out.check_finite("scene embeddings", epoch)?;
        log.push(EpochLog {
            epoch,
            mean_loss: loss_sum / steps as f64,
            images_kept: steps,
        });
    }

    Ok(TrainedCbow {
        objects: EmbeddingMatrix::new(
            object_in.data,
            cfg.d,
            corpus.object_vocab().tokens().to_vec(),
            Role::Object,
            "cbow",
        )?,
        scenes: EmbeddingMatrix::new(
            scene_out.data,
            cfg.d,
            corpus.scene_vocab().tokens().to_vec(),
            Role::Scene,
            "cbow",
        )?,
        log,
    })
}
