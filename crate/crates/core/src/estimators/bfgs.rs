//! BFGS with Armijo backtracking. Problems above `dense_limit` variables
//! keep only the last `memory` curvature pairs.

use std::collections::VecDeque;

use crate::linalg::{dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Plain gradient step used when the line search fails.
    pub fallback_step: f64,
    /// Relative decrease below which an iteration counts as stalled.
    pub f_tol: f64,
    /// Consecutive stalled iterations before giving up.
    pub stall_iters: usize,
    /// Largest problem that keeps a dense n × n inverse Hessian.
    pub dense_limit: usize,
    pub memory: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-6,
            fallback_step: 0.01,
            f_tol: 1e-9,
            stall_iters: 10,
            dense_limit: 1500,
            memory: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Gradient norm fell below `grad_tol`.
    pub converged: bool,
    pub fallback_steps: usize,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Inverse-Hessian approximation: a dense matrix, or the last `m` curvature
/// pairs applied by the two-loop recursion.
enum InverseHessian {
    Dense { h: Vec<f64>, n: usize, scaled: bool },
    Limited { pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, m: usize },
}

impl InverseHessian {
    fn new(n: usize, opts: &BfgsOptions) -> Self {
        if n <= opts.dense_limit {
            let mut h = vec![0.0; n * n];
            set_identity(&mut h, n, 1.0);
            InverseHessian::Dense { h, n, scaled: false }
        } else {
            InverseHessian::Limited {
                pairs: VecDeque::with_capacity(opts.memory),
                m: opts.memory.max(1),
            }
        }
    }

    fn reset(&mut self) {
        match self {
            InverseHessian::Dense { h, n, scaled } => {
                set_identity(h, *n, 1.0);
                *scaled = false;
            }
            InverseHessian::Limited { pairs, .. } => pairs.clear(),
        }
    }

    /// Writes −H·g into `d`.
    fn direction(&self, g: &[f64], d: &mut [f64]) {
        match self {
            InverseHessian::Dense { h, n, .. } => {
                for i in 0..*n {
                    d[i] = -dot(&h[i * n..(i + 1) * n], g);
                }
            }
            InverseHessian::Limited { pairs, .. } => {
                d.copy_from_slice(g);
                let mut alpha = vec![0.0; pairs.len()];
                for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
                    alpha[k] = rho * dot(s, d);
                    axpy(-alpha[k], y, d);
                }
                if let Some((s, y, _)) = pairs.back() {
                    let gamma = dot(s, y) / dot(y, y);
                    d.iter_mut().for_each(|v| *v *= gamma);
                }
                for (k, (s, y, rho)) in pairs.iter().enumerate() {
                    let beta = rho * dot(y, d);
                    axpy(alpha[k] - beta, s, d);
                }
                d.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    fn update(&mut self, s: &[f64], y: &[f64], sy: f64) {
        let rho = 1.0 / sy;
        match self {
            InverseHessian::Dense { h, n, scaled } => {
                let n = *n;
                if !*scaled {
                    set_identity(h, n, sy / dot(y, y));
                    *scaled = true;
                }
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
                let coef = rho * (1.0 + rho * dot(y, &hy));
                for i in 0..n {
                    let row = &mut h[i * n..(i + 1) * n];
                    let (si, hyi) = (s[i], hy[i]);
                    for j in 0..n {
                        row[j] += coef * si * s[j] - rho * (hyi * s[j] + si * hy[j]);
                    }
                }
            }
            InverseHessian::Limited { pairs, m } => {
                if pairs.len() == *m {
                    pairs.pop_front();
                }
                pairs.push_back((s.to_vec(), y.to_vec(), rho));
            }
        }
    }
}

fn set_identity(h: &mut [f64], n: usize, scale: f64) {
    h.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        h[i * n + i] = scale;
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Minimizes `f` from `x0`. The callback writes the gradient into its second
/// argument and returns the objective.
pub fn minimize<F>(x0: Vec<f64>, mut fg: F, opts: &BfgsOptions) -> BfgsReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut hinv = InverseHessian::new(n, opts);

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut yv = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = false;
    let mut fallback_steps = 0;
    let mut stalled = 0;
    while iterations < opts.max_iter {
        if norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        hinv.direction(&g, &mut d);
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            hinv.reset();
            for i in 0..n {
                d[i] = -g[i];
            }
            gd = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut f_new = f64::INFINITY;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = fg(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + ARMIJO_C1 * step * gd {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            fallback_steps += 1;
            for i in 0..n {
                x_new[i] = x[i] - opts.fallback_step * g[i];
            }
            f_new = fg(&x_new, &mut g_new);
            hinv.reset();
            if !(f_new < f) {
                break;
            }
        }

        for i in 0..n {
            s[i] = x_new[i] - x[i];
            yv[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) && sy > 0.0 {
            hinv.update(&s, &yv, sy);
        }

        if f - f_new <= opts.f_tol * f.abs().max(1e-12) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if stalled >= opts.stall_iters {
            break;
        }
    }
    BfgsReport {
        x,
        f,
        iterations,
        converged,
        fallback_steps,
    }
}
