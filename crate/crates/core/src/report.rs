use rug::Float;

use crate::qcore::to_decimal;

/// A named family of residuals indexed by `n` (or by a flattened pair
/// index), with the largest magnitude and where it occurs.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub name: String,
    pub residuals: Vec<(usize, Float)>,
    pub max_abs: Float,
    pub argmax: Option<usize>,
}

impl ResidualReport {
    pub fn new(name: impl Into<String>, residuals: Vec<(usize, Float)>) -> ResidualReport {
        let prec = residuals.first().map(|(_, v)| v.prec()).unwrap_or(64);
        let mut max_abs = Float::new(prec);
        let mut argmax = None;
        for (i, v) in &residuals {
            let a = Float::with_val(prec, v.abs_ref());
            // a NaN residual becomes the maximum and stays there
            if max_abs.is_nan() {
                continue;
            }
            if a.is_nan() || argmax.is_none() || a > max_abs {
                max_abs = a;
                argmax = Some(*i);
            }
        }
        ResidualReport {
            name: name.into(),
            residuals,
            max_abs,
            argmax,
        }
    }

    /// True when every residual is finite and strictly below `bound`.
    pub fn below(&self, bound: &Float) -> bool {
        !self.max_abs.is_nan() && self.max_abs < *bound
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// `log10` of the largest residual, as `f64` (for printing only).
    pub fn max_log10(&self) -> f64 {
        if self.max_abs.is_zero() {
            f64::NEG_INFINITY
        } else {
            Float::with_val(self.max_abs.prec(), self.max_abs.log10_ref()).to_f64()
        }
    }

    /// CSV rows `index,residual` (no header).
    pub fn csv_rows(&self, digits: u32) -> impl Iterator<Item = String> + '_ {
        self.residuals
            .iter()
            .map(move |(i, v)| format!("{},{},{}", self.name, i, to_decimal(v, digits)))
    }

    pub fn merge(name: impl Into<String>, parts: &[ResidualReport]) -> ResidualReport {
        let all = parts.iter().flat_map(|r| r.residuals.iter().cloned()).collect();
        ResidualReport::new(name, all)
    }
}
