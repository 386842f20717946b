use serde::{Deserialize, Serialize};

use crate::arch::ForwardOutput;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// `λ1` weights the model (fine) task, `λ2` the make (coarse) task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let w = Self { lambda1, lambda2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(Error::Config(format!(
                "loss weights must be finite and >= 0, got [{}, {}]",
                self.lambda1, self.lambda2
            )));
        }
        if self.lambda1 == 0.0 && self.lambda2 == 0.0 {
            return Err(Error::Config("loss weights must not both be zero".into()));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub model: Var,
    /// Absent for single-task outputs.
    pub make: Option<Var>,
}

/// `λ1·CE(model) + λ2·CE(make)`; the make term is dropped entirely when the
/// network has no make head.
pub fn joint_loss(
    tape: &mut Tape,
    out: &ForwardOutput,
    model_labels: &[usize],
    make_labels: Option<&[usize]>,
    weights: LossWeights,
) -> Result<LossTerms> {
    weights.validate()?;
    let model = tape.cross_entropy(out.model_logits, model_labels)?;
    let weighted_model = tape.scale(model, weights.lambda1);
    let Some(make_logits) = out.make_logits else {
        return Ok(LossTerms {
            total: weighted_model,
            model,
            make: None,
        });
    };
    let labels = make_labels.ok_or_else(|| Error::Contract("make labels required for a two-head network".into()))?;
    let make = tape.cross_entropy(make_logits, labels)?;
    let weighted_make = tape.scale(make, weights.lambda2);
    let total = tape.add(weighted_model, weighted_make)?;
    Ok(LossTerms {
        total,
        model,
        make: Some(make),
    })
}
