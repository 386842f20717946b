//! Two-level label hierarchy, dataset ingestion, splitting and the
//! synthetic hierarchical generator.

mod manifest;
mod split;
mod synthetic;
mod taxonomy;

pub use manifest::{load_manifest, write_manifest_inline, write_vector_file};
pub use split::{split, split_counts, DatasetSplit, DEFAULT_RATIOS};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use taxonomy::Taxonomy;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub model_label: usize,
    pub make_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub taxonomy: Taxonomy,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset, enforcing `make_label == parent(model_label)` and a
    /// common feature width.
    pub fn new(taxonomy: Taxonomy, samples: Vec<Sample>) -> Result<Self> {
        let width = samples.first().map(|s| s.features.len());
        for s in &samples {
            if s.model_label >= taxonomy.num_models() {
                return Err(Error::Data(format!(
                    "sample {} has model label {} outside taxonomy of {} models",
                    s.id,
                    s.model_label,
                    taxonomy.num_models()
                )));
            }
            if taxonomy.parent(s.model_label) != s.make_label {
                return Err(Error::Data(format!(
                    "sample {} has make {} but its model's parent is {}",
                    s.id,
                    s.make_label,
                    taxonomy.parent(s.model_label)
                )));
            }
            if Some(s.features.len()) != width {
                return Err(Error::Data(format!(
                    "sample {} has {} features, expected {}",
                    s.id,
                    s.features.len(),
                    width.unwrap_or(0)
                )));
            }
        }
        Ok(Self { taxonomy, samples })
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.features.len())
    }
}

/// Stacks sample features into an `n×input_shape...` batch tensor.
pub fn batch_tensor(samples: &[&Sample], input_shape: &[usize]) -> Result<Tensor> {
    let width: usize = input_shape.iter().product();
    let mut data = Vec::with_capacity(samples.len() * width);
    for s in samples {
        if s.features.len() != width {
            return Err(Error::dim("batch", &[s.features.len()], input_shape));
        }
        data.extend_from_slice(&s.features);
    }
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(input_shape);
    Tensor::new(shape, data)
}
