use crate::error::{Error, Result};

/// Numerically stable `ln(sigma(x))`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(vectors: &[&[f64]], dim: usize) -> Result<()> {
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("loss input".into()));
        }
    }
    Ok(())
}

/// Loss and gradients of one negative-sampling example.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub loss: f64,
    pub input: Vec<f64>,
    /// One gradient per positive output vector, in argument order.
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

/// `loss = -sum_pos ln sigma(u.v) - sum_neg ln sigma(-u.v)` for input `v`.
pub fn sgns_step(
    input: &[f64],
    positives: &[&[f64]],
    negatives: &[&[f64]],
) -> Result<SgnsGradients> {
    let dim = input.len();
    check(&[input], dim)?;
    check(positives, dim)?;
    check(negatives, dim)?;

    let mut loss = 0.0;
    let mut grad_input = vec![0.0; dim];
    let mut grad_outputs = |outputs: &[&[f64]], label: f64, loss: &mut f64| -> Vec<Vec<f64>> {
        outputs
            .iter()
            .map(|u| {
                let score = dot(u, input);
                // d/ds of -ln sigma(s) is sigma(s) - 1; of -ln sigma(-s) is sigma(s)
                let coeff = sigmoid(score) - label;
                *loss -= if label == 1.0 {
                    log_sigmoid(score)
                } else {
                    log_sigmoid(-score)
                };
                for (g, x) in grad_input.iter_mut().zip(u.iter()) {
                    *g += coeff * x;
                }
                input.iter().map(|x| coeff * x).collect()
            })
            .collect()
    };
    let positives = grad_outputs(positives, 1.0, &mut loss);
    let negatives = grad_outputs(negatives, 0.0, &mut loss);
    Ok(SgnsGradients {
        loss,
        input: grad_input,
        positives,
        negatives,
    })
}

/// Loss and gradients of a full-softmax classification step.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxGradients {
    pub loss: f64,
    pub probabilities: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Row-major gradient of the `classes x dim` output matrix.
    pub outputs: Vec<f64>,
}

/// Cross-entropy of `softmax(U h)` against `target`, with `U` given
/// row-major as `classes x hidden.len()`.
pub fn softmax_step(hidden: &[f64], outputs: &[f64], target: usize) -> Result<SoftmaxGradients> {
    let dim = hidden.len();
    if dim == 0 || !outputs.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: outputs.len(),
        });
    }
    check(&[hidden], dim)?;
    if outputs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax weights".into()));
    }
    let classes = outputs.len() / dim;
    if target >= classes {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {classes} classes"
        )));
    }
    let logits: Vec<f64> = outputs.chunks(dim).map(|u| dot(u, hidden)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probabilities: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let loss = -(logits[target] - max - total.ln());

    let mut grad_hidden = vec![0.0; dim];
    let mut grad_outputs = vec![0.0; outputs.len()];
    for (j, (u, p)) in outputs.chunks(dim).zip(&probabilities).enumerate() {
        let coeff = p - if j == target { 1.0 } else { 0.0 };
        for k in 0..dim {
            grad_hidden[k] += coeff * u[k];
            grad_outputs[j * dim + k] = coeff * hidden[k];
        }
    }
    Ok(SoftmaxGradients {
        loss,
        probabilities,
        hidden: grad_hidden,
        outputs: grad_outputs,
    })
}
