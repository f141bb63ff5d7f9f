//! Generalized regression neural network: a Gaussian-kernel weighted mean of
//! the stored training targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_abs_error, par_map, random_split, Candidate, EstimatorModel, FittedParams, TrainSet};
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::seed::derive_seed;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrnnConfig {
    pub sigma_count: usize,
    /// σ grid spans `[min_factor, max_factor] × median pairwise distance`.
    pub sigma_min_factor: f64,
    pub sigma_max_factor: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for GrnnConfig {
    fn default() -> Self {
        Self {
            sigma_count: 20,
            sigma_min_factor: 1e-2,
            sigma_max_factor: 1e2,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrnnModel {
    pub exemplars: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub sigma: f64,
}

impl GrnnModel {
    /// Kernel weights are shifted by the nearest exemplar's distance, so
    /// the weights never all underflow; for very small σ this tends to the
    /// nearest exemplar's target.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let d2: Vec<f64> = self.exemplars.iter().map(|e| sq_dist(e, x)).collect();
        let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut num = 0.0;
        let mut den = 0.0;
        for (d, y) in d2.iter().zip(&self.targets) {
            let w = (-(d - nearest) * scale).exp();
            num += w * y;
            den += w;
        }
        num / den
    }
}

pub fn median_pairwise_distance(x: &Matrix) -> f64 {
    let n = x.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    median(&d)
}

pub fn sigma_grid(x: &Matrix, cfg: &GrnnConfig) -> Vec<f64> {
    let mut base = median_pairwise_distance(x);
    if !(base > 0.0) {
        base = 1.0;
    }
    let (lo, hi) = (cfg.sigma_min_factor.ln(), cfg.sigma_max_factor.ln());
    let m = cfg.sigma_count;
    (0..m)
        .map(|i| {
            let t = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.5 };
            base * (lo + t * (hi - lo)).exp()
        })
        .collect()
}

pub fn grnn_with_sigma(t: &TrainSet, sigma: f64) -> GrnnModel {
    GrnnModel {
        exemplars: t.x.iter_rows().map(<[f64]>::to_vec).collect(),
        targets: t.y.clone(),
        sigma,
    }
}

pub fn grnn_fit(t: &TrainSet, cfg: &GrnnConfig) -> Result<EstimatorModel> {
    if cfg.sigma_count == 0 || !(cfg.sigma_min_factor > 0.0) {
        return Err(Error::Config("GRNN σ grid must be non-empty and positive".into()));
    }
    let grid = sigma_grid(&t.x, cfg);
    let (tr, va) = random_split(t.len(), cfg.train_fraction, derive_seed(cfg.seed, &[0]));
    let train = t.subset(&tr);
    let val = t.subset(&va);
    let scores = par_map(grid.len(), |i| {
        let m = grnn_with_sigma(&train, grid[i]);
        let pred: Vec<f64> = val.x.iter_rows().map(|r| m.predict(r)).collect();
        mean_abs_error(&pred, &val.y)
    });
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    let sigma_map = |s: f64| BTreeMap::from([("sigma".to_string(), s)]);
    Ok(EstimatorModel {
        fitted: FittedParams::Grnn(grnn_with_sigma(t, grid[best])),
        hyper_parameters: sigma_map(grid[best]),
        seed: cfg.seed,
        validation_mae: Some(scores[best]),
        n_features: t.n_features(),
        candidates: grid
            .iter()
            .zip(&scores)
            .map(|(s, v)| Candidate {
                hyper_parameters: sigma_map(*s),
                validation_mae: *v,
            })
            .collect(),
        warnings: Vec::new(),
    })
}
