//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward values, so it stays
//! independent of the backward rules it is checking.

use super::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub epsilon: f64,
    /// Maximum allowed relative error.
    pub rel_tolerance: f64,
    /// Gradients smaller than this in magnitude are compared absolutely:
    /// the relative denominator never drops below `abs_floor / rel_tolerance`.
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            rel_tolerance: 1e-4,
            abs_floor: 1e-8,
        }
    }
}

impl GradCheckConfig {
    pub fn with_tolerance(mut self, rel_tolerance: f64) -> Self {
        self.rel_tolerance = rel_tolerance;
        self
    }

    pub fn relative_error(&self, analytic: f64, numeric: f64) -> f64 {
        let floor = self.abs_floor / self.rel_tolerance;
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
    }
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub input: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.max_relative_error = self.max_relative_error.max(other.max_relative_error);
        self.mismatches.extend(other.mismatches);
    }
}

/// Central differences of a scalar function with respect to every element
/// of every input.
pub fn numeric_gradient(
    mut f: impl FnMut(&[Tensor]) -> Result<f64>,
    inputs: &[Tensor],
    epsilon: f64,
) -> Result<Vec<Tensor>> {
    let mut work = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[i].shape());
        for e in 0..inputs[i].len() {
            let orig = work[i].data()[e];
            work[i].data_mut()[e] = orig + epsilon;
            let plus = f(&work)?;
            work[i].data_mut()[e] = orig - epsilon;
            let minus = f(&work)?;
            work[i].data_mut()[e] = orig;
            g.data_mut()[e] = (plus - minus) / (2.0 * epsilon);
        }
        grads.push(g);
    }
    Ok(grads)
}

pub fn compare(analytic: &[Tensor], numeric: &[Tensor], cfg: &GradCheckConfig) -> GradCheckReport {
    let mut report = GradCheckReport::default();
    for (input, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        for (element, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let err = cfg.relative_error(av, nv);
            report.checked += 1;
            report.max_relative_error = report.max_relative_error.max(err);
            if err.is_nan() || err >= cfg.rel_tolerance {
                report.mismatches.push(Mismatch {
                    input,
                    element,
                    analytic: av,
                    numeric: nv,
                    relative_error: err,
                });
            }
        }
    }
    report
}

/// Records `inputs` as trainable leaves, builds the scalar returned by
/// `build`, and checks its tape gradients against central differences.
pub fn check<F>(build: F, inputs: &[Tensor], cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| tape.grad_or_zeros(*v)).collect();

    let numeric = numeric_gradient(
        |xs| {
            let mut t = Tape::new();
            let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
            let l = build(&mut t, &vs)?;
            t.value(l).item()
        },
        inputs,
        cfg.epsilon,
    )?;
    Ok(compare(&analytic, &numeric, cfg))
}
