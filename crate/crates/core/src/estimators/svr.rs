//! ε-SVR with an RBF kernel, solved in the dual by SMO with second-order
//! working-set selection.
//!
//! The dual is written over 2N variables `β = [α; α*]` with signs
//! `z = [+1; −1]`:
//!
//! ```text
//! min ½ βᵀQβ + pᵀβ   s.t.  zᵀβ = 0,  0 ≤ β ≤ C
//! Q_st = z_s z_t K(s mod N, t mod N),  p = [ε − y; ε + y]
//! ```
//!
//! and predictions are `f(x) = Σ (α_i − α*_i) K(x_i, x) + b`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_abs_error, par_map, random_split, Candidate, EstimatorModel, FittedParams, TrainSet};
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::seed::derive_seed;
use crate::stats::sample_std;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub c_grid: Vec<f64>,
    /// γ candidates are `factor / p` for feature length p.
    pub gamma_factors: Vec<f64>,
    /// ε = epsilon_scale × sample std of the training targets.
    pub epsilon_scale: f64,
    pub train_fraction: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c_grid: (-2..=2).map(|i| 10f64.powi(i)).collect(),
            gamma_factors: (-1..=3).map(|i| 10f64.powi(i)).collect(),
            epsilon_scale: 0.1,
            train_fraction: 0.7,
            tol: 1e-5,
            max_iter: 2_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// α_i − α*_i for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * (-self.gamma * sq_dist(s, x)).exp())
            .sum::<f64>()
            + self.bias
    }
}

pub fn rbf_kernel_matrix(x: &Matrix, gamma: f64) -> Vec<f64> {
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = (-gamma * sq_dist(x.row(i), x.row(j))).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Solves the ε-SVR dual for a precomputed n×n kernel matrix.
pub fn solve_dual(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> DualSolution {
    let n = y.len();
    let l = 2 * n;
    let z = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kidx = |s: usize, t: usize| kernel[(s % n) * n + (t % n)];
    let q = |s: usize, t: usize| z(s) * z(t) * kidx(s, t);

    let mut beta = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] })
        .collect();
    let is_upper = |b: f64| b >= c;
    let is_lower = |b: f64| b <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Maximal violating index i, then second-order choice of j.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if z(t) > 0.0 {
                if !is_upper(beta[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if !is_lower(beta[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i != usize::MAX {
            let zi = z(i);
            for t in 0..l {
                let zq = zi * q(i, t);
                if z(t) > 0.0 {
                    if !is_lower(beta[t]) {
                        let gd = gmax + grad[t];
                        if grad[t] >= gmax2 {
                            gmax2 = grad[t];
                        }
                        if gd > 0.0 {
                            let quad = (2.0 - 2.0 * zq).max(TAU);
                            let obj = -(gd * gd) / quad;
                            if obj <= best_obj {
                                best_obj = obj;
                                j = t;
                            }
                        }
                    }
                } else if !is_upper(beta[t]) {
                    let gd = gmax - grad[t];
                    if -grad[t] >= gmax2 {
                        gmax2 = -grad[t];
                    }
                    if gd > 0.0 {
                        let quad = (2.0 + 2.0 * zq).max(TAU);
                        let obj = -(gd * gd) / quad;
                        if obj <= best_obj {
                            best_obj = obj;
                            j = t;
                        }
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let qd_i = kidx(i, i);
        let qd_j = kidx(j, j);
        let q_ij = q(i, j);
        let (old_i, old_j) = (beta[i], beta[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if z(i) != z(j) {
            let quad = (qd_i + qd_j + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qd_i + qd_j - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        beta[i] = ai;
        beta[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..l {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Offset from free variables, or the midpoint of the feasible range.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..l {
        let yg = z(t) * grad[t];
        if is_upper(beta[t]) {
            if z(t) > 0.0 {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if is_lower(beta[t]) {
            if z(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    DualSolution {
        alpha: beta[..n].to_vec(),
        alpha_star: beta[n..].to_vec(),
        bias: -rho,
        iterations,
        converged,
    }
}

/// Trains one ε-SVR with fixed hyper-parameters.
pub fn svr_train(
    x: &Matrix,
    y: &[f64],
    params: SvrParams,
    tol: f64,
    max_iter: usize,
) -> (SvrModel, DualSolution) {
    let kernel = rbf_kernel_matrix(x, params.gamma);
    let sol = solve_dual(&kernel, y, params.c, params.epsilon, tol, max_iter);
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..y.len() {
        let coef = sol.alpha[i] - sol.alpha_star[i];
        if coef != 0.0 {
            support_vectors.push(x.row(i).to_vec());
            coefficients.push(coef);
        }
    }
    (
        SvrModel {
            support_vectors,
            coefficients,
            bias: sol.bias,
            gamma: params.gamma,
        },
        sol,
    )
}

fn hyper(p: SvrParams) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("c".to_string(), p.c),
        ("gamma".to_string(), p.gamma),
        ("epsilon".to_string(), p.epsilon),
    ])
}

/// Grid search over (C, γ) on a seeded 70/30 split, then a refit of the
/// winner on the full training set.
pub fn svr_fit(t: &TrainSet, cfg: &SvrConfig) -> Result<EstimatorModel> {
    if t.len() < 4 {
        return Err(Error::NotEnoughData(format!("SVR needs ≥ 4 rows, got {}", t.len())));
    }
    if cfg.c_grid.is_empty() || cfg.gamma_factors.is_empty() {
        return Err(Error::Config("SVR grids must be non-empty".into()));
    }
    let p = t.n_features().max(1) as f64;
    let epsilon = cfg.epsilon_scale * sample_std(&t.y);
    let grid: Vec<SvrParams> = cfg
        .c_grid
        .iter()
        .flat_map(|&c| {
            cfg.gamma_factors.iter().map(move |&g| SvrParams {
                c,
                gamma: g / p,
                epsilon,
            })
        })
        .collect();

    let (tr, va) = random_split(t.len(), cfg.train_fraction, derive_seed(cfg.seed, &[0]));
    let train = t.subset(&tr);
    let val = t.subset(&va);
    let scores = par_map(grid.len(), |g| {
        let (m, _) = svr_train(&train.x, &train.y, grid[g], cfg.tol, cfg.max_iter);
        let pred: Vec<f64> = val.x.iter_rows().map(|r| m.predict(r)).collect();
        mean_abs_error(&pred, &val.y)
    });
    let mut best = 0;
    for (g, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = g;
        }
    }
    let winner = grid[best];
    let (model, sol) = svr_train(&t.x, &t.y, winner, cfg.tol, cfg.max_iter);
    let mut warnings = Vec::new();
    if !sol.converged {
        warnings.push(format!(
            "SMO stopped at the iteration cap ({}) before reaching tolerance {}",
            cfg.max_iter, cfg.tol
        ));
    }
    Ok(EstimatorModel {
        fitted: FittedParams::Svr(model),
        hyper_parameters: hyper(winner),
        seed: cfg.seed,
        validation_mae: Some(scores[best]),
        n_features: t.n_features(),
        candidates: grid
            .iter()
            .zip(&scores)
            .map(|(g, s)| Candidate {
                hyper_parameters: hyper(*g),
                validation_mae: *s,
            })
            .collect(),
        warnings,
    })
}
