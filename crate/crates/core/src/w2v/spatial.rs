use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    choose_positives, draw_negatives, sgns_step, EpochLog, NegativeSampler, RowGradients, Table,
    TrainConfig,
};
use crate::embedding::{EmbeddingMatrix, Role};
use crate::error::{Error, Result};
use crate::spatial::SpatialContextGraph;

#[derive(Debug, Clone)]
pub struct TrainedSpatial {
    /// Average of the input and output embedding tables.
    pub objects: EmbeddingMatrix,
    pub log: Vec<EpochLog>,
    /// Instances without any spatial neighbor; they never act as targets.
    pub skipped_empty: usize,
}

struct Target {
    object: usize,
    context: Vec<usize>,
}

/// Object-to-object Skipgram over spatial neighborhoods.
///
/// Every instance with a non-empty context is a target once per epoch (in
/// random order); positives are drawn uniformly from its neighbors and
/// negatives from the instance-frequency distribution, by default resampled
/// when they land inside the context.
pub fn train_skipgram_spatial(
    graphs: &[SpatialContextGraph],
    object_labels: &[String],
    cfg: &TrainConfig,
) -> Result<TrainedSpatial> {
    cfg.validate()?;
    let n_objects = object_labels.len();
    let mut frequency = vec![0.0; n_objects];
    let mut targets = Vec::new();
    let mut skipped_empty = 0;
    for graph in graphs {
        for node in &graph.nodes {
            if node.object >= n_objects {
                return Err(Error::InvalidArgument(format!(
                    "image `{}`: object id {} outside vocabulary of {n_objects}",
                    graph.image_id, node.object
                )));
            }
            frequency[node.object] += 1.0;
            let context: Vec<usize> = graph
                .context(node.iid)
                .filter_map(|(j, _)| graph.object_of(j))
                .collect();
            if context.is_empty() {
                skipped_empty += 1;
            } else {
                targets.push(Target {
                    object: node.object,
                    context,
                });
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument(
            "no instance has a spatial context".into(),
        ));
    }
    if skipped_empty > 0 {
        log::info!("{skipped_empty} instances without spatial context skipped");
    }
    let sampler = NegativeSampler::new(&frequency, cfg.neg_exponent)?;
    let strict = cfg.strict_negatives.unwrap_or(true);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = Table::uniform(n_objects, cfg.d, &mut rng);
    let mut output = Table::uniform(n_objects, cfg.d, &mut rng);
    let mut adam_in = cfg.adam(n_objects);
    let mut adam_out = cfg.adam(n_objects);

    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &t in &order {
            let target = &targets[t];
            let positives = choose_positives(&target.context, cfg.n_positive, &mut rng);
            let negatives =
                draw_negatives(&sampler, cfg.n_negative, &target.context, strict, &mut rng);
            let step = {
                let pos: Vec<&[f64]> = positives.iter().map(|&o| output.row(o)).collect();
                let neg: Vec<&[f64]> = negatives.iter().map(|&o| output.row(o)).collect();
                sgns_step(input.row(target.object), &pos, &neg)?
            };
            loss_sum += step.loss;
            let mut grads = RowGradients::default();
            for (&o, g) in positives.iter().zip(&step.positives) {
                grads.add(o, g);
            }
            for (&o, g) in negatives.iter().zip(&step.negatives) {
                grads.add(o, g);
            }
            adam_in.update_row(&mut input.data, target.object, &step.input);
            grads.apply(&mut output, &mut adam_out);
        }
        input.check_finite("input embeddings", epoch)?;
        output.check_finite("output embeddings", epoch)?;
        log.push(EpochLog {
            epoch,
            mean_loss: loss_sum / targets.len() as f64,
            images_kept: targets.len(),
        });
    }

    let averaged = average_tables(&input.data, &output.data);
    Ok(TrainedSpatial {
        objects: EmbeddingMatrix::new(
            averaged,
            cfg.d,
            object_labels.to_vec(),
            Role::Object,
            "skipgram-spatial",
        )?,
        log,
        skipped_empty,
    })
}

/// Elementwise mean of the input and output tables.
pub(crate) fn average_tables(input: &[f64], output: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(output)
        .map(|(a, b)| (a + b) / 2.0)
        .collect()
}
