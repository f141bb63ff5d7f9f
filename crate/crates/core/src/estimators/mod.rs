//! Bite-weight regressors behind one fit/predict contract.
//!
//! | kind | model | hyper-parameter search |
//! |------|-------|------------------------|
//! | LR   | least squares with bias | none |
//! | SVR  | ε-SVR, RBF kernel, SMO | C × γ grid on a 70/30 split |
//! | FFNN | tanh MLP trained by BFGS on smoothed MAE | 8 architectures on a 90/10 split |
//! | GRNN | Gaussian Nadaraya–Watson | σ grid on a 90/10 split |
//!
//! Validation splits are random bite-level splits of the training set.

pub mod bfgs;
pub mod ffnn;
pub mod grnn;
pub mod lr;
pub mod svr;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::rng;

pub use ffnn::{ffnn_fit, FfnnConfig, Mlp};
pub use grnn::{grnn_fit, GrnnConfig, GrnnModel};
pub use lr::{lr_fit, LinearModel};
pub use svr::{svr_fit, SvrConfig, SvrModel};

pub type HyperParams = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "SVR")]
    Svr,
    #[serde(rename = "FFNN")]
    Ffnn,
    #[serde(rename = "GRNN")]
    Grnn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Lr,
        EstimatorKind::Svr,
        EstimatorKind::Ffnn,
        EstimatorKind::Grnn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Lr => "LR",
            EstimatorKind::Svr => "SVR",
            EstimatorKind::Ffnn => "FFNN",
            EstimatorKind::Grnn => "GRNN",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LR" => Ok(Self::Lr),
            "SVR" => Ok(Self::Svr),
            "FFNN" => Ok(Self::Ffnn),
            "GRNN" => Ok(Self::Grnn),
            _ => Err(format!("unknown estimator '{s}' (expected LR, SVR, FFNN or GRNN)")),
        }
    }
}

/// Training features, weights in grams, and the subject of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub groups: Vec<String>,
}

impl TrainSet {
    pub fn new(x: Matrix, y: Vec<f64>, groups: Vec<String>) -> Result<Self> {
        if x.rows() != y.len() || groups.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len().min(groups.len()),
            });
        }
        if y.len() < 2 {
            return Err(Error::NotEnoughData(format!(
                "training set needs ≥ 2 rows, got {}",
                y.len()
            )));
        }
        if let Some(bad) = y.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("training target {bad} is not a positive weight")));
        }
        Ok(Self { x, y, groups })
    }

    /// Training set with every row in one anonymous group.
    pub fn ungrouped(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let groups = vec![String::new(); y.len()];
        Self::new(x, y, groups)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> TrainSet {
        TrainSet {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
        }
    }
}

/// Random split of `0..n` into (train, validation) index lists, both
/// non-empty and sorted.
pub fn random_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters")]
pub enum FittedParams {
    #[serde(rename = "LR")]
    Lr(LinearModel),
    #[serde(rename = "SVR")]
    Svr(SvrModel),
    #[serde(rename = "FFNN")]
    Ffnn(Mlp),
    #[serde(rename = "GRNN")]
    Grnn(GrnnModel),
}

/// One hyper-parameter candidate and its validation MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hyper_parameters: HyperParams,
    pub validation_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    #[serde(flatten)]
    pub fitted: FittedParams,
    pub hyper_parameters: HyperParams,
    pub seed: u64,
    pub validation_mae: Option<f64>,
    pub n_features: usize,
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EstimatorModel {
    pub fn kind(&self) -> EstimatorKind {
        match self.fitted {
            FittedParams::Lr(_) => EstimatorKind::Lr,
            FittedParams::Svr(_) => EstimatorKind::Svr,
            FittedParams::Ffnn(_) => EstimatorKind::Ffnn,
            FittedParams::Grnn(_) => EstimatorKind::Grnn,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(self, x)
    }
}

pub fn predict(m: &EstimatorModel, x: &[f64]) -> Result<f64> {
    if x.len() != m.n_features {
        return Err(Error::DimensionMismatch {
            expected: m.n_features,
            found: x.len(),
        });
    }
    Ok(match &m.fitted {
        FittedParams::Lr(p) => p.predict(x),
        FittedParams::Svr(p) => p.predict(x),
        FittedParams::Ffnn(p) => p.predict(x),
        FittedParams::Grnn(p) => p.predict(x),
    })
}

pub fn mean_abs_error(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len().max(1) as f64
}

/// Search settings for every estimator kind; the seed is supplied per fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EstimatorSettings {
    pub svr: SvrConfig,
    pub ffnn: FfnnConfig,
    pub grnn: GrnnConfig,
}

pub fn fit(
    kind: EstimatorKind,
    t: &TrainSet,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<EstimatorModel> {
    match kind {
        EstimatorKind::Lr => {
            let mut m = lr_fit(t);
            m.seed = seed;
            Ok(m)
        }
        EstimatorKind::Svr => svr_fit(
            t,
            &SvrConfig {
                seed,
                ..settings.svr.clone()
            },
        ),
        EstimatorKind::Ffnn => ffnn_fit(
            t,
            &FfnnConfig {
                seed,
                ..settings.ffnn.clone()
            },
        ),
        EstimatorKind::Grnn => grnn_fit(
            t,
            &GrnnConfig {
                seed,
                ..settings.grnn.clone()
            },
        ),
    }
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}
