//! Error metrics over (truth, prediction) pairs in grams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Truth values below this are left out of MAPE.
pub const MAPE_MIN_TRUTH_G: f64 = 0.1;

pub fn mae(pairs: &[[f64; 2]]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("prediction pairs"));
    }
    Ok(mean(&abs_errors(pairs)))
}

pub fn mape(pairs: &[[f64; 2]]) -> Result<f64> {
    let (terms, _) = pct_errors(pairs);
    if terms.is_empty() {
        return Err(Error::Empty("prediction pairs with truth ≥ 0.1 g"));
    }
    Ok(mean(&terms))
}

pub fn abs_errors(pairs: &[[f64; 2]]) -> Vec<f64> {
    pairs.iter().map(|[t, p]| (p - t).abs()).collect()
}

/// Per-pair absolute percentage errors and the number of excluded pairs.
pub fn pct_errors(pairs: &[[f64; 2]]) -> (Vec<f64>, usize) {
    let terms: Vec<f64> = pairs
        .iter()
        .filter(|[t, _]| *t >= MAPE_MIN_TRUTH_G)
        .map(|[t, p]| (p - t).abs() / t * 100.0)
        .collect();
    let excluded = pairs.len() - terms.len();
    (terms, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: mean(values),
            std: sample_std(values),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[[2.0, 1.0], [4.0, 2.0]]).unwrap(), 1.5);
        assert!((mape(&[[8.0, 10.0]]).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(mae(&[[3.0, 3.0]]).unwrap(), 0.0);
        assert_eq!(mape(&[[3.0, 3.0]]).unwrap(), 0.0);
        assert!(mae(&[]).is_err());
        assert!(mape(&[[0.05, 1.0]]).is_err());
        assert_eq!(pct_errors(&[[0.05, 1.0], [1.0, 1.5]]), (vec![50.0], 1));
    }
}
