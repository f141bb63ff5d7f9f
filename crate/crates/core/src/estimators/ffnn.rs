//! Feed-forward network (tanh hidden layers, linear output) trained
//! full-batch by BFGS on a smoothed mean absolute error.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bfgs::{minimize, BfgsOptions, BfgsReport};
use super::{mean_abs_error, par_map, random_split, Candidate, EstimatorModel, FittedParams, TrainSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::seed::{derive_seed, rng};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfnnConfig {
    pub hidden_layer_counts: Vec<usize>,
    pub neurons_per_layer: Vec<usize>,
    /// Gradient step used when the BFGS line search fails.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub train_fraction: f64,
    pub grad_tol: f64,
    /// μ in |r| ≈ √(r² + μ²).
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for FfnnConfig {
    fn default() -> Self {
        Self {
            hidden_layer_counts: vec![2, 3],
            neurons_per_layer: vec![5, 10, 15, 20],
            learning_rate: 0.01,
            max_epochs: 1000,
            train_fraction: 0.9,
            grad_tol: 1e-6,
            smoothing: 1e-6,
            seed: 0,
        }
    }
}

impl FfnnConfig {
    /// (hidden layers, neurons) in search order.
    pub fn architectures(&self) -> Vec<(usize, usize)> {
        self.hidden_layer_counts
            .iter()
            .flat_map(|&l| self.neurons_per_layer.iter().map(move |&h| (l, h)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Input, hidden..., output (= 1).
    pub layer_sizes: Vec<usize>,
    /// Per layer: weights (out × in, row-major) followed by biases.
    pub params: Vec<f64>,
}

pub fn layer_sizes(n_inputs: usize, hidden_layers: usize, neurons: usize) -> Vec<usize> {
    let mut s = vec![n_inputs];
    s.extend(std::iter::repeat_n(neurons, hidden_layers));
    s.push(1);
    s
}

pub fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero hidden biases, output bias `output_bias`.
    pub fn initialized(sizes: Vec<usize>, seed: u64, output_bias: f64) -> Self {
        let mut r = rng(seed);
        let mut params = Vec::with_capacity(n_params(&sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| r.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        let last = params.len() - 1;
        params[last] = output_bias;
        Self {
            layer_sizes: sizes,
            params,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut acts = Vec::new();
        let mut nz = Vec::new();
        let sparse = sparse_support(x, &mut nz);
        forward(&self.layer_sizes, &self.params, x, sparse.then_some(&nz[..]), &mut acts)
    }
}

/// Nonzero input positions when the input is sparse enough to skip zeros.
fn sparse_support(x: &[f64], nz: &mut Vec<usize>) -> bool {
    nz.clear();
    nz.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j));
    2 * nz.len() < x.len()
}

/// Forward pass; `acts[l]` receives the activations of layer l (input
/// included). `nz` lists the nonzero inputs when the first layer may skip
/// zeros.
fn forward(
    sizes: &[usize],
    params: &[f64],
    x: &[f64],
    nz: Option<&[usize]>,
    acts: &mut Vec<Vec<f64>>,
) -> f64 {
    let n_layers = sizes.len() - 1;
    acts.resize_with(sizes.len(), Vec::new);
    acts[0].clear();
    acts[0].extend_from_slice(x);
    let mut off = 0;
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let (w, rest) = params[off..].split_at(n_in * n_out);
        let b = &rest[..n_out];
        off += n_in * n_out + n_out;
        let (prev, next) = acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut next[0];
        out.clear();
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let z = match (l, nz) {
                (0, Some(nz)) => nz.iter().map(|&j| row[j] * input[j]).sum::<f64>(),
                _ => dot(row, input),
            } + b[o];
            out.push(if l + 1 < n_layers { z.tanh() } else { z });
        }
    }
    acts[n_layers][0]
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Mean of √(r² + μ²) over the rows and its gradient w.r.t. `params`.
///
/// The first layer is evaluated input-major so zero inputs cost nothing.
pub fn smoothed_mae(
    sizes: &[usize],
    params: &[f64],
    x: &Matrix,
    y: &[f64],
    mu: f64,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n_layers = sizes.len() - 1;
    let offsets: Vec<usize> = sizes
        .windows(2)
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w[0] * w[1] + w[1];
            Some(o)
        })
        .collect();
    let (p, h) = (sizes[0], sizes[1]);
    let mut wt = vec![0.0; p * h];
    for o in 0..h {
        for j in 0..p {
            wt[j * h + o] = params[o * p + j];
        }
    }
    let mut gwt = vec![0.0; p * h];
    let mut acts: Vec<Vec<f64>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    let mut delta: Vec<f64> = Vec::new();
    let mut delta_prev: Vec<f64> = Vec::new();
    let n = y.len() as f64;
    let mut loss = 0.0;
    for (row, &t) in x.iter_rows().zip(y) {
        let z = &mut acts[1];
        z.clear();
        z.extend_from_slice(&params[p * h..p * h + h]);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                axpy(v, &wt[j * h..(j + 1) * h], z);
            }
        }
        if n_layers > 1 {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        for l in 1..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &params[offsets[l]..offsets[l] + n_in * n_out];
            let b = &params[offsets[l] + n_in * n_out..offsets[l] + n_in * n_out + n_out];
            let (prev, next) = acts.split_at_mut(l + 1);
            let out = &mut next[0];
            out.clear();
            for o in 0..n_out {
                let z = dot(&w[o * n_in..(o + 1) * n_in], &prev[l]) + b[o];
                out.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
        }
        let r = acts[n_layers][0] - t;
        let s = (r * r + mu * mu).sqrt();
        loss += s;
        delta.clear();
        delta.push(r / s / n);
        for l in (1..n_layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            delta_prev.clear();
            delta_prev.resize(n_in, 0.0);
            for o in 0..n_out {
                let d = delta[o];
                axpy(d, input, &mut grad[off + o * n_in..off + (o + 1) * n_in]);
                grad[off + n_in * n_out + o] += d;
                axpy(d, &params[off + o * n_in..off + (o + 1) * n_in], &mut delta_prev);
            }
            for (dp, a) in delta_prev.iter_mut().zip(input) {
                *dp *= 1.0 - a * a;
            }
            std::mem::swap(&mut delta, &mut delta_prev);
        }
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                axpy(v, &delta, &mut gwt[j * h..(j + 1) * h]);
            }
        }
        for (g, d) in grad[p * h..p * h + h].iter_mut().zip(&delta) {
            *g += d;
        }
    }
    for o in 0..h {
        for j in 0..p {
            grad[o * p + j] = gwt[j * h + o];
        }
    }
    loss / n
}

pub fn train_network(
    hidden_layers: usize,
    neurons: usize,
    t: &TrainSet,
    init_seed: u64,
    cfg: &FfnnConfig,
) -> (Mlp, BfgsReport) {
    let sizes = layer_sizes(t.n_features(), hidden_layers, neurons);
    let init = Mlp::initialized(sizes.clone(), init_seed, median(&t.y));
    let opts = BfgsOptions {
        max_iter: cfg.max_epochs,
        grad_tol: cfg.grad_tol,
        fallback_step: cfg.learning_rate,
        ..BfgsOptions::default()
    };
    let report = minimize(
        init.params,
        |p, g| smoothed_mae(&sizes, p, &t.x, &t.y, cfg.smoothing, g),
        &opts,
    );
    (
        Mlp {
            layer_sizes: sizes,
            params: report.x.clone(),
        },
        report,
    )
}

fn arch_params(layers: usize, neurons: usize) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("hidden_layers".to_string(), layers as f64),
        ("neurons".to_string(), neurons as f64),
    ])
}

/// Seed used to initialize candidate architecture `a`.
pub fn init_seed(cfg: &FfnnConfig, a: usize) -> u64 {
    derive_seed(cfg.seed, &[1, a as u64])
}

pub fn ffnn_fit(t: &TrainSet, cfg: &FfnnConfig) -> Result<EstimatorModel> {
    if t.len() < 10 {
        return Err(Error::NotEnoughData(format!("FFNN needs ≥ 10 rows, got {}", t.len())));
    }
    let archs = cfg.architectures();
    if archs.is_empty() {
        return Err(Error::Config("FFNN architecture list is empty".into()));
    }
    let (tr, va) = random_split(t.len(), cfg.train_fraction, derive_seed(cfg.seed, &[0]));
    let train = t.subset(&tr);
    let val = t.subset(&va);
    let scores = par_map(archs.len(), |a| {
        let (layers, neurons) = archs[a];
        let (net, _) = train_network(layers, neurons, &train, init_seed(cfg, a), cfg);
        let pred: Vec<f64> = val.x.iter_rows().map(|r| net.predict(r)).collect();
        mean_abs_error(&pred, &val.y)
    });
    let mut best = 0;
    for (a, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = a;
        }
    }
    let (layers, neurons) = archs[best];
    let (net, report) = train_network(layers, neurons, t, init_seed(cfg, best), cfg);
    let mut warnings = Vec::new();
    if report.fallback_steps > 0 {
        warnings.push(format!(
            "line search failed {} time(s); used gradient steps of size {}",
            report.fallback_steps, cfg.learning_rate
        ));
    }
    Ok(EstimatorModel {
        fitted: FittedParams::Ffnn(net),
        hyper_parameters: arch_params(layers, neurons),
        seed: cfg.seed,
        validation_mae: Some(scores[best]),
        n_features: t.n_features(),
        candidates: archs
            .iter()
            .zip(&scores)
            .map(|(&(l, h), s)| Candidate {
                hyper_parameters: arch_params(l, h),
                validation_mae: *s,
            })
            .collect(),
        warnings,
    })
}
