use rand::seq::SliceRandom;

use super::Sample;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.2, 0.1];

/// Train/validation/test partition, stratified by model class.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Model classes with fewer than three samples, which cannot place one
    /// sample in every split.
    pub flagged_classes: Vec<usize>,
}

/// Largest-remainder apportionment of `n` items over `ratios`; each count
/// is within one of `n·ratio`, ties going to the earlier split.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| n as f64 * r);
    let mut counts = exact.map(|e| (e + 1e-9).floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

pub fn split(samples: &[Sample], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let classes = samples.iter().map(|s| s.model_label + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.model_label].push(i);
    }

    let mut rng = stream(seed, Stream::Split);
    let mut assignment = vec![0u8; samples.len()];
    let mut flagged_classes = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            flagged_classes.push(class);
        }
        members.shuffle(&mut rng);
        let [tr, va, _] = split_counts(members.len(), ratios);
        for (pos, &idx) in members.iter().enumerate() {
            assignment[idx] = if pos < tr {
                0
            } else if pos < tr + va {
                1
            } else {
                2
            };
        }
    }

    let pick = |which: u8| -> Vec<Sample> {
        samples
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == which)
            .map(|(s, _)| s.clone())
            .collect()
    };
    Ok(DatasetSplit {
        train: pick(0),
        val: pick(1),
        test: pick(2),
        ratios,
        seed,
        flagged_classes,
    })
}
