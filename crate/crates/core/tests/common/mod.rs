//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use biteweight::linalg::Matrix;
use biteweight::seed::rng;
use nalgebra::DMatrix;
use rand::Rng;

pub fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let data = (0..n * p).map(|_| r.random_range(-2.0..2.0)).collect();
    Matrix::from_vec(n, p, data).unwrap()
}

pub fn augmented(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.cols() + 1, |i, j| if j < x.cols() { x.get(i, j) } else { 1.0 })
}

/// Projection of `v` onto {0 ≤ u ≤ c, Σ a_i u_i = 0} by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], a: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> (Vec<f64>, f64) {
        let u: Vec<f64> = v.iter().zip(a).map(|(vi, ai)| (vi - lam * ai).clamp(0.0, c)).collect();
        let s = u.iter().zip(a).map(|(ui, ai)| ui * ai).sum();
        (u, s)
    };
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Dense ε-SVR dual solved by accelerated projected gradient; returns the
/// coefficient vector α − α* and the bias from free multipliers.
pub fn dual_qp_oracle(k: &[f64], y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let a: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let trace: f64 = (0..n).map(|i| k[i * n + i]).sum();
    let step = 1.0 / (2.0 * trace);
    let grad = |u: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| u[i] - u[n + i]).collect();
        let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * beta[j]).sum()).collect();
        (0..2 * n)
            .map(|t| if t < n { kb[t] + eps - y[t] } else { -kb[t - n] + eps + y[t - n] })
            .collect()
    };
    let mut u = vec![0.0; 2 * n];
    let mut z = u.clone();
    let mut tk: f64 = 1.0;
    for _ in 0..200_000 {
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let u_next = project(&v, &a, c);
        let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        z = u_next
            .iter()
            .zip(&u)
            .map(|(un, uo)| un + (tk - 1.0) / t_next * (un - uo))
            .collect();
        u = u_next;
        tk = t_next;
    }
    let beta: Vec<f64> = (0..n).map(|i| u[i] - u[n + i]).collect();
    let f_no_b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * beta[j]).sum()).collect();
    let tol = 1e-6 * c;
    let mut bs = Vec::new();
    for i in 0..n {
        if u[i] > tol && u[i] < c - tol {
            bs.push(y[i] - eps - f_no_b[i]);
        }
        if u[n + i] > tol && u[n + i] < c - tol {
            bs.push(y[i] + eps - f_no_b[i]);
        }
    }
    assert!(!bs.is_empty(), "oracle found no free multipliers");
    (beta, bs.iter().sum::<f64>() / bs.len() as f64)
}

pub fn svr_instance() -> (Matrix, Vec<f64>) {
    let x = random_matrix(8, 2, 11);
    let y = x
        .iter_rows()
        .map(|r| 3.0 + (r[0]).sin() + 0.5 * r[1])
        .collect();
    (x, y)
}

/// ε-SVR decision function Σ β_i exp(−γ‖x_i − q‖²) + b.
pub fn rbf_expansion(x: &Matrix, beta: &[f64], b: f64, gamma: f64, q: &[f64]) -> f64 {
    x.iter_rows()
        .zip(beta)
        .map(|(xi, bi)| {
            let d2: f64 = xi.iter().zip(q).map(|(a, c)| (a - c) * (a - c)).sum();
            bi * (-gamma * d2).exp()
        })
        .sum::<f64>()
        + b
}

/// Plain Nadaraya–Watson estimate with a Gaussian kernel.
pub fn nadaraya_watson(x: &Matrix, y: &[f64], sigma: f64, q: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (xi, yi) in x.iter_rows().zip(y) {
        let d2: f64 = xi.iter().zip(q).map(|(a, c)| (a - c) * (a - c)).sum();
        let w = (-d2 / (2.0 * sigma * sigma)).exp();
        num += w * yi;
        den += w;
    }
    num / den
}

/// Two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Average ranks (1-based) by pairwise counting.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let below = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn rank_pearson(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let d = |c: &Vec<f64>| -> f64 { c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut best = 0;
    for j in 1..centroids.len() {
        if d(&centroids[j]) < d(&centroids[best]) {
            best = j;
        }
    }
    best
}

pub fn bow_oracle(centroids: &[Vec<f64>], descriptors: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; centroids.len()];
    for x in descriptors {
        h[nearest(centroids, x)] += 1.0;
    }
    h.iter().map(|c| c / descriptors.len() as f64).collect()
}

pub fn vlad_oracle(centroids: &[Vec<f64>], descriptors: &[Vec<f64>]) -> Vec<f64> {
    let d = centroids[0].len();
    let mut blocks = vec![vec![0.0; d]; centroids.len()];
    for x in descriptors {
        let j = nearest(centroids, x);
        for i in 0..d {
            blocks[j][i] += x[i] - centroids[j][i];
        }
    }
    for b in &mut blocks {
        let n = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            b.iter_mut().for_each(|v| *v /= n);
        }
    }
    let flat: Vec<f64> = blocks.concat();
    let n = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        flat.iter().map(|v| v / n).collect()
    } else {
        flat
    }
}

/// AIC of a hard partition read as an equal-variance Gaussian mixture,
/// evaluated directly from the densities.
pub fn mixture_aic(x: &Matrix, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let (n, d, k) = (x.rows(), x.cols(), centroids.len());
    let sse: f64 = x
        .iter_rows()
        .zip(assignments)
        .map(|(r, &a)| r.iter().zip(&centroids[a]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .sum();
    let var = sse / (n * d) as f64;
    let norm = (2.0 * std::f64::consts::PI * var).powf(-(d as f64) / 2.0);
    let mut loglik = 0.0;
    for r in x.iter_rows() {
        let dens: f64 = (0..k)
            .map(|j| {
                let w = assignments.iter().filter(|&&a| a == j).count() as f64 / n as f64;
                let d2: f64 = r.iter().zip(&centroids[j]).map(|(u, v)| (u - v) * (u - v)).sum();
                w * norm * (-d2 / (2.0 * var)).exp()
            })
            .sum();
        loglik += dens.ln();
    }
    2.0 * (k * d + k) as f64 - 2.0 * loglik
}

/// `n` points per cluster, unit spread, centers `separation` apart on axis 0.
pub fn clusters(centers: usize, n: usize, d: usize, separation: f64, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(centers * n * d);
    for c in 0..centers {
        for _ in 0..n {
            for j in 0..d {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
                data.push(z + if j == 0 { c as f64 * separation } else { 0.0 });
            }
        }
    }
    Matrix::from_vec(centers * n, d, data).unwrap()
}

/// Relative L2 error of `grad` against central differences of `f`.
pub fn gradient_error(f: impl Fn(&[f64]) -> f64, at: &[f64], grad: &[f64], h: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    let mut p = at.to_vec();
    for j in 0..at.len() {
        p[j] = at[j] + h;
        let fp = f(&p);
        p[j] = at[j] - h;
        let fm = f(&p);
        p[j] = at[j];
        let fd = (fp - fm) / (2.0 * h);
        num += (grad[j] - fd).powi(2);
        den += fd.powi(2);
    }
    (num / den).sqrt()
}

/// Random chew-like signal: enveloped noise with a random one-pole tilt.
pub fn chew_signal(seed: u64, len: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let tilt: f64 = r.random_range(-0.9..0.9);
    let gain: f64 = r.random_range(0.01..0.8);
    let mut prev = 0.0;
    (0..len)
        .map(|i| {
            let w = (std::f64::consts::PI * (i as f64 + 0.5) / len as f64).sin();
            let z: f64 = r.random_range(-1.0..1.0);
            let y = z + tilt * prev;
            prev = y;
            gain * w * y
        })
        .collect()
}
