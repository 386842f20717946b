//! Closed-form head accounting.
//!
//! A parallel make head adds one `d→K` dense layer. The cascaded model head
//! additionally reads the `K` make logits, widening its weight matrix by
//! `K×M`. FLOPs count one unit per weight multiply-accumulate at batch size
//! one; biases and activations are not counted.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadDims {
    /// Encoder feature width `d`.
    pub feature_dim: usize,
    /// Number of makes `K`.
    pub makes: usize,
    /// Number of models `M`.
    pub models: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadParameterCounts {
    /// Parameters of the single-task network.
    pub base: u64,
    pub parallel_delta: u64,
    /// Extra parameters of cascaded over parallel.
    pub cascaded_extra_delta: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadFlopCounts {
    pub parallel_delta: u64,
    pub cascaded_extra_delta: u64,
}

/// `(K·(d+1), M·K)`
pub fn head_parameter_deltas(dims: HeadDims) -> (u64, u64) {
    let HeadDims {
        feature_dim: d,
        makes: k,
        models: m,
    } = dims;
    ((k * (d + 1)) as u64, (m * k) as u64)
}

/// `(K·d, M·K)`
pub fn head_flop_deltas(dims: HeadDims) -> HeadFlopCounts {
    let HeadDims {
        feature_dim: d,
        makes: k,
        models: m,
    } = dims;
    HeadFlopCounts {
        parallel_delta: (k * d) as u64,
        cascaded_extra_delta: (m * k) as u64,
    }
}
