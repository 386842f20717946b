use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the configured base learning rate is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrReading {
    /// The base rate is the schedule's peak.
    #[default]
    Max,
    /// The base rate is the schedule's starting value; the peak is
    /// `base·div_factor`.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub reading: LrReading,
    pub div_factor: f64,
    pub final_div_factor: f64,
    pub pct_up: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            base_lr: 3e-4,
            reading: LrReading::Max,
            div_factor: 25.0,
            final_div_factor: 1e4,
            pct_up: 0.3,
        }
    }
}

impl ScheduleConfig {
    pub fn max_lr(&self) -> f64 {
        match self.reading {
            LrReading::Max => self.base_lr,
            LrReading::Initial => self.base_lr * self.div_factor,
        }
    }

    pub fn schedule(&self, total_steps: usize) -> Result<OneCycleSchedule> {
        OneCycleSchedule::new(self.max_lr(), self.div_factor, self.final_div_factor, self.pct_up, total_steps)
    }
}

/// Cosine one-cycle policy: rises from `max_lr/div_factor` to `max_lr`,
/// then decays to `max_lr/(div_factor·final_div_factor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneCycleSchedule {
    max_lr: f64,
    div_factor: f64,
    final_div_factor: f64,
    pct_up: f64,
    total_steps: usize,
    peak_step: usize,
}

impl OneCycleSchedule {
    pub fn new(max_lr: f64, div_factor: f64, final_div_factor: f64, pct_up: f64, total_steps: usize) -> Result<Self> {
        if !(max_lr.is_finite() && max_lr > 0.0) {
            return Err(Error::Config(format!("max_lr must be positive, got {max_lr}")));
        }
        if !(div_factor.is_finite() && div_factor > 1.0) || !(final_div_factor.is_finite() && final_div_factor > 1.0) {
            return Err(Error::Config("div_factor and final_div_factor must exceed 1".into()));
        }
        if !(pct_up > 0.0 && pct_up < 1.0) {
            return Err(Error::Config(format!("pct_up must lie in (0, 1), got {pct_up}")));
        }
        if total_steps < 2 {
            return Err(Error::Config("a one-cycle schedule needs at least 2 steps".into()));
        }
        // the 1e-9 keeps e.g. 0.3·1000 from rounding up to 301
        let peak = (pct_up * total_steps as f64 - 1e-9).ceil() as usize;
        Ok(Self {
            max_lr,
            div_factor,
            final_div_factor,
            pct_up,
            total_steps,
            peak_step: peak.clamp(1, total_steps - 1),
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn peak_step(&self) -> usize {
        self.peak_step
    }

    pub fn max_lr(&self) -> f64 {
        self.max_lr
    }

    pub fn pct_up(&self) -> f64 {
        self.pct_up
    }

    pub fn initial_lr(&self) -> f64 {
        self.max_lr / self.div_factor
    }

    pub fn final_lr(&self) -> f64 {
        self.initial_lr() / self.final_div_factor
    }

    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::Contract(format!(
                "step {step} outside schedule of {} steps",
                self.total_steps
            )));
        }
        let anneal = |from: f64, to: f64, t: f64| to + (from - to) * (1.0 + (PI * t).cos()) / 2.0;
        Ok(if step == 0 {
            self.initial_lr()
        } else if step == self.peak_step {
            self.max_lr
        } else if step == self.total_steps {
            self.final_lr()
        } else if step < self.peak_step {
            anneal(self.initial_lr(), self.max_lr, step as f64 / self.peak_step as f64)
        } else {
            let t = (step - self.peak_step) as f64 / (self.total_steps - self.peak_step) as f64;
            anneal(self.max_lr, self.final_lr(), t)
        })
    }
}
