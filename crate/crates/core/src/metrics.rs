//! Hierarchy-aware evaluation metrics.
//!
//! Every ranking breaks ties toward the lower class index, so `argmax` of
//! a uniform row is 0 and top-1 accuracy is model accuracy bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::Taxonomy;
use crate::error::{Error, Result};

pub const TOP_K: [usize; 3] = [1, 3, 5];

/// Index of the largest entry, the first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// 0-based position of `label` when the row is sorted by descending logit
/// with ties broken by index.
pub fn rank_of(row: &[f64], label: usize) -> usize {
    let l = row[label];
    row.iter()
        .enumerate()
        .filter(|&(j, &v)| v > l || (v == l && j < label))
        .count()
}

fn check_rows(logits: &Tensor, labels: &[usize]) -> Result<usize> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::dim("metric", logits.shape(), &[labels.len()]));
    }
    if labels.is_empty() {
        return Err(Error::Data("metrics need at least one sample".into()));
    }
    let cols = logits.shape()[1];
    if let Some((position, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= cols) {
        return Err(Error::Label {
            position,
            label,
            classes: cols,
        });
    }
    Ok(cols)
}

fn fraction(hits: usize, n: usize) -> f64 {
    hits as f64 / n as f64
}

pub fn model_accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    check_rows(logits, labels)?;
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(r, &l)| argmax(logits.row(r)) == l)
        .count();
    Ok(fraction(hits, labels.len()))
}

/// Accuracy of the make read off the predicted model through the taxonomy.
pub fn derived_make_accuracy(model_logits: &Tensor, make_labels: &[usize], taxonomy: &Taxonomy) -> Result<f64> {
    if model_logits.rank() != 2 || model_logits.shape()[1] != taxonomy.num_models() {
        return Err(Error::dim("derived make", model_logits.shape(), &[taxonomy.num_models()]));
    }
    // check only row count here; make labels index the coarse level
    if model_logits.shape()[0] != make_labels.len() || make_labels.is_empty() {
        return Err(Error::dim("derived make", model_logits.shape(), &[make_labels.len()]));
    }
    let hits = make_labels
        .iter()
        .enumerate()
        .filter(|&(r, &k)| taxonomy.parent(argmax(model_logits.row(r))) == k)
        .count();
    Ok(fraction(hits, make_labels.len()))
}

pub fn top_k_accuracy(logits: &Tensor, labels: &[usize], k: usize) -> Result<f64> {
    let cols = check_rows(logits, labels)?;
    if k == 0 || k > cols {
        return Err(Error::Contract(format!("top-k needs 1 <= k <= {cols}, got {k}")));
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(r, &l)| rank_of(logits.row(r), l) < k)
        .count();
    Ok(fraction(hits, labels.len()))
}

/// Fraction of rows whose predicted make is the parent of the predicted model.
pub fn consistency_rate(model_logits: &Tensor, make_logits: Option<&Tensor>, taxonomy: &Taxonomy) -> Result<f64> {
    let make_logits =
        make_logits.ok_or_else(|| Error::Contract("consistency needs make logits from a two-head network".into()))?;
    let n = model_logits.shape()[0];
    if model_logits.rank() != 2
        || make_logits.rank() != 2
        || make_logits.shape()[0] != n
        || model_logits.shape()[1] != taxonomy.num_models()
        || make_logits.shape()[1] != taxonomy.num_makes()
    {
        return Err(Error::dim("consistency", model_logits.shape(), make_logits.shape()));
    }
    if n == 0 {
        return Err(Error::Data("metrics need at least one sample".into()));
    }
    let hits = (0..n)
        .filter(|&r| taxonomy.parent(argmax(model_logits.row(r))) == argmax(make_logits.row(r)))
        .count();
    Ok(fraction(hits, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_acc: f64,
    pub make_acc_direct: Option<f64>,
    pub make_acc_derived: f64,
    /// k ∈ {1, 3, 5}, restricted to k ≤ M.
    pub top_k: BTreeMap<usize, f64>,
    pub consistency: Option<f64>,
    pub n_samples: usize,
}

impl MetricsReport {
    pub fn compute(
        model_logits: &Tensor,
        make_logits: Option<&Tensor>,
        model_labels: &[usize],
        make_labels: &[usize],
        taxonomy: &Taxonomy,
    ) -> Result<Self> {
        let model_acc = model_accuracy(model_logits, model_labels)?;
        let make_acc_direct = make_logits.map(|m| model_accuracy(m, make_labels)).transpose()?;
        let mut top_k = BTreeMap::new();
        for k in TOP_K.into_iter().filter(|&k| k <= taxonomy.num_models()) {
            top_k.insert(k, top_k_accuracy(model_logits, model_labels, k)?);
        }
        Ok(Self {
            model_acc,
            make_acc_direct,
            make_acc_derived: derived_make_accuracy(model_logits, make_labels, taxonomy)?,
            top_k,
            consistency: make_logits
                .map(|m| consistency_rate(model_logits, Some(m), taxonomy))
                .transpose()?,
            n_samples: model_labels.len(),
        })
    }

    pub fn top(&self, k: usize) -> Option<f64> {
        self.top_k.get(&k).copied()
    }
}
