use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EstimatorModel, FittedParams, TrainSet};
use crate::linalg::{cholesky_solve, dot, Matrix};

/// Ridge jitter added to the Gram matrix diagonal.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Least squares with bias via the normal equations. The jitter grows by
/// decades if the Gram matrix is numerically singular.
pub fn solve_least_squares(x: &Matrix, y: &[f64]) -> LinearModel {
    let p = x.cols() + 1;
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut row_aug = vec![1.0; p];
    for (row, &t) in x.iter_rows().zip(y) {
        row_aug[..p - 1].copy_from_slice(row);
        for i in 0..p {
            let ri = row_aug[i];
            rhs[i] += ri * t;
            for j in 0..=i {
                gram[i * p + j] += ri * row_aug[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j * p + i] = gram[i * p + j];
        }
    }
    let mut lambda = RIDGE_JITTER;
    loop {
        let mut g = gram.clone();
        for i in 0..p {
            g[i * p + i] += lambda;
        }
        if let Some(sol) = cholesky_solve(&g, &rhs, p) {
            return LinearModel {
                weights: sol[..p - 1].to_vec(),
                bias: sol[p - 1],
            };
        }
        lambda *= 10.0;
    }
}

pub fn lr_fit(t: &TrainSet) -> EstimatorModel {
    let model = solve_least_squares(&t.x, &t.y);
    EstimatorModel {
        fitted: FittedParams::Lr(model),
        hyper_parameters: BTreeMap::from([("ridge_jitter".to_string(), RIDGE_JITTER)]),
        seed: 0,
        validation_mae: None,
        n_features: t.n_features(),
        candidates: Vec::new(),
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_two_points() {
        let t = TrainSet::ungrouped(Matrix::from_rows(&[[1.0], [2.0]]).unwrap(), vec![3.0, 5.0])
            .unwrap();
        let m = lr_fit(&t);
        let FittedParams::Lr(lm) = &m.fitted else { unreachable!() };
        assert!((lm.weights[0] - 2.0).abs() < 1e-6);
        assert!((lm.bias - 1.0).abs() < 1e-6);
        assert!((m.predict(&[3.0]).unwrap() - 7.0).abs() < 1e-6);
    }

    #[test]
    fn constant_target() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [2.0, 5.0], [3.0, -1.0], [0.5, 2.0]]).unwrap();
        let m = lr_fit(&TrainSet::ungrouped(x, vec![4.0; 4]).unwrap());
        let FittedParams::Lr(lm) = &m.fitted else { unreachable!() };
        assert!(lm.weights.iter().all(|w| w.abs() < 1e-6));
        assert!((lm.bias - 4.0).abs() < 1e-6);
    }

    #[test]
    fn rank_deficient_design_still_solves() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let m = lr_fit(&TrainSet::ungrouped(x, vec![2.0, 4.0, 6.0]).unwrap());
        assert!((m.predict(&[4.0, 4.0]).unwrap() - 8.0).abs() < 1e-4);
    }
}
