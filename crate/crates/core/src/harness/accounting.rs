use std::fmt;

use crate::arch::{head_flop_deltas, head_parameter_deltas, HeadDims};

/// Optional expected values to flag against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccountingExpectations {
    pub parallel_params: Option<u64>,
    pub cascaded_params: Option<u64>,
    pub parallel_flops: Option<u64>,
    pub cascaded_flops: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountingLine {
    pub name: &'static str,
    pub value: u64,
    pub expected: Option<u64>,
}

impl AccountingLine {
    pub fn passed(&self) -> bool {
        self.expected.is_none_or(|e| e == self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountingReport {
    pub dims: HeadDims,
    pub lines: Vec<AccountingLine>,
}

impl AccountingReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(AccountingLine::passed)
    }

    pub fn value(&self, name: &str) -> Option<u64> {
        self.lines.iter().find(|l| l.name == name).map(|l| l.value)
    }
}

pub fn report_accounting(dims: HeadDims, expect: AccountingExpectations) -> AccountingReport {
    let (parallel, cascaded) = head_parameter_deltas(dims);
    let flops = head_flop_deltas(dims);
    let line = |name, value, expected| AccountingLine { name, value, expected };
    AccountingReport {
        dims,
        lines: vec![
            line("model_head_params", (dims.models * (dims.feature_dim + 1)) as u64, None),
            line("parallel_delta_params", parallel, expect.parallel_params),
            line("cascaded_extra_delta_params", cascaded, expect.cascaded_params),
            line("parallel_delta_flops", flops.parallel_delta, expect.parallel_flops),
            line("cascaded_extra_delta_flops", flops.cascaded_extra_delta, expect.cascaded_flops),
        ],
    }
}

impl fmt::Display for AccountingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let HeadDims {
            feature_dim,
            makes,
            models,
        } = self.dims;
        writeln!(f, "head accounting for d={feature_dim} K={makes} M={models}")?;
        for l in &self.lines {
            write!(f, "{:<28} {:>14}", l.name, l.value)?;
            match l.expected {
                Some(e) if e == l.value => writeln!(f, "  PASS (expected {e})")?,
                Some(e) => writeln!(f, "  FAIL (expected {e})")?,
                None => writeln!(f)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_dims() {
        let dims = HeadDims {
            feature_dim: 1,
            makes: 1,
            models: 1,
        };
        let r = report_accounting(dims, AccountingExpectations::default());
        assert_eq!(r.value("parallel_delta_params"), Some(2));
        assert_eq!(r.value("cascaded_extra_delta_params"), Some(1));
        assert_eq!(r.value("parallel_delta_flops"), Some(1));
        assert!(r.passed());
    }

    #[test]
    fn mismatch_flags_fail() {
        let dims = HeadDims {
            feature_dim: 8,
            makes: 1,
            models: 2,
        };
        let r = report_accounting(
            dims,
            AccountingExpectations {
                parallel_params: Some(10),
                ..Default::default()
            },
        );
        assert!(!r.passed());
        assert!(r.to_string().contains("parallel_delta_params                     9  FAIL (expected 10)"));
    }
}
