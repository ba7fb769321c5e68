//! Scalar losses evaluated outside a training step.

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor};

/// Mean cross-entropy of `logits` rows against `labels`.
pub fn classification_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(logits.clone());
    let l = tape.cross_entropy(x, labels)?;
    Ok(tape.value(l).values()[0])
}

/// Class-normalised entropy summed over subgraph rows:
/// `-(1/|C|) Σ_j Σ_i p_ji log p_ji`.
pub fn entropy_regularizer(subgraph_logits: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(subgraph_logits.clone());
    let l = tape.entropy(x)?;
    Ok(tape.value(l).values()[0])
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda {lambda} not in [0, 1]")))
    }
}

/// `λ·L_clas + (1-λ)·L_reg`.
pub fn total_objective(classification: f64, regularization: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda * classification + (1.0 - lambda) * regularization)
}
