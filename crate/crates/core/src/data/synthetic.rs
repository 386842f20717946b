use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample, Taxonomy};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

const MAX_ATTEMPTS: usize = 1000;

/// Nested Gaussian clusters: make centers, model centers offset from their
/// make, samples scattered around their model.
///
/// `noise_sigma` is the RMS radius of a cluster, so each coordinate gets
/// standard deviation `noise_sigma/√dim`. Both separations are expressed
/// in units of `noise_sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub makes: usize,
    pub models_per_make: usize,
    pub dim: usize,
    pub n_per_model: usize,
    pub make_separation: f64,
    pub model_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            makes: 8,
            models_per_make: 4,
            dim: 64,
            n_per_model: 30,
            make_separation: 6.0,
            model_separation: 3.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.makes == 0 || self.models_per_make == 0 || self.dim == 0 || self.n_per_model == 0 {
            return Err(Error::Config("synthetic counts must all be positive".into()));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.make_separation) && finite_nonneg(self.model_separation))
            || !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0)
        {
            return Err(Error::Config("synthetic separations must be >= 0 and noise > 0".into()));
        }
        Ok(())
    }
}

fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Synthetic);
    let sigma = spec.noise_sigma;
    let min_gap = spec.make_separation * sigma;
    // typical pairwise distance of the draws sits a little above `min_gap`
    let spread = 1.25 * min_gap / (2.0 * spec.dim as f64).sqrt();

    let mut make_centers: Vec<Vec<f64>> = Vec::with_capacity(spec.makes);
    for k in 0..spec.makes {
        let center = (0..MAX_ATTEMPTS)
            .map(|_| gaussian(spec.dim, &mut rng).into_iter().map(|z| z * spread).collect::<Vec<_>>())
            .find(|c| make_centers.iter().all(|o| distance(c, o) >= min_gap))
            .ok_or_else(|| {
                Error::Generation(format!(
                    "could not place make {k} at distance >= {min_gap} in {} dimensions after {MAX_ATTEMPTS} attempts",
                    spec.dim
                ))
            })?;
        make_centers.push(center);
    }

    let offset = spec.model_separation * sigma;
    let mut model_centers = Vec::with_capacity(spec.makes * spec.models_per_make);
    for center in &make_centers {
        for _ in 0..spec.models_per_make {
            let dir = loop {
                let z = gaussian(spec.dim, &mut rng);
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break z.into_iter().map(|v| v / norm).collect::<Vec<_>>();
                }
            };
            model_centers.push(center.iter().zip(&dir).map(|(c, d)| c + offset * d).collect::<Vec<_>>());
        }
    }

    let makes: Vec<String> = (0..spec.makes).map(|k| format!("make{k:02}")).collect();
    let models: Vec<String> = (0..model_centers.len())
        .map(|m| format!("make{:02}_model{:02}", m / spec.models_per_make, m % spec.models_per_make))
        .collect();
    let parent: Vec<usize> = (0..model_centers.len()).map(|m| m / spec.models_per_make).collect();
    let taxonomy = Taxonomy::new(makes, models, parent)?;

    let coord_sigma = sigma / (spec.dim as f64).sqrt();
    let mut samples = Vec::with_capacity(model_centers.len() * spec.n_per_model);
    for (m, center) in model_centers.iter().enumerate() {
        for _ in 0..spec.n_per_model {
            let features = center
                .iter()
                .map(|c| c + coord_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(Sample {
                id: format!("s{:06}", samples.len()),
                features,
                model_label: m,
                make_label: taxonomy.parent(m),
            });
        }
    }
    Dataset::new(taxonomy, samples)
}
