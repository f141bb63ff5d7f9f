//! k-means codebooks over standardized chew descriptors, with the codebook
//! size chosen by AIC, and the BoW / VLAD bout encodings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boutfeat::Encoding;
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::seed::{derive_seed, rng};

pub const RESTARTS: usize = 10;
pub const MAX_ITER: usize = 100;
pub const SSE_TOL: f64 = 1e-6;
pub const DEFAULT_K_MAX: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub sse: f64,
    /// SSE after the initial assignment and after every Lloyd iteration.
    pub sse_history: Vec<f64>,
}

/// Seed of restart `r` for a k-means run seeded with `seed`.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, &[r as u64])
}

fn nearest_row(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>, f64) {
    let mut assign = Vec::with_capacity(x.rows());
    let mut dists = Vec::with_capacity(x.rows());
    let mut sse = 0.0;
    for row in x.iter_rows() {
        let (j, d) = nearest_row(centroids, row);
        assign.push(j);
        dists.push(d);
        sse += d;
    }
    (assign, dists, sse)
}

/// k-means++ seeding.
pub fn seed_centroids(x: &Matrix, k: usize, seed: u64) -> Matrix {
    let n = x.rows();
    let mut r = rng(seed);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(r.random_range(0..n));
    let mut d2: Vec<f64> = x.iter_rows().map(|row| sq_dist(row, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            r.random_range(0..n)
        };
        chosen.push(next);
        for (i, row) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Lloyd iterations from the given initial centroids.
pub fn lloyd(x: &Matrix, init: Matrix) -> KMeansFit {
    let k = init.rows();
    let d = x.cols();
    let mut centroids = init;
    let (mut assign, mut dists, mut sse) = assign_all(x, &centroids);
    let mut history = vec![sse];
    for _ in 0..MAX_ITER {
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (row, &j) in x.iter_rows().zip(&assign) {
            counts[j] += 1;
            for (s, v) in sums.row_mut(j).iter_mut().zip(row) {
                *s += v;
            }
        }
        // Empty clusters move to the points farthest from their centroids.
        let mut taken = vec![false; x.rows()];
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                for (dst, s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
            } else {
                let far = (0..x.rows())
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(i) = far {
                    taken[i] = true;
                    centroids.row_mut(j).copy_from_slice(x.row(i));
                }
            }
        }
        let (a, ds, s) = assign_all(x, &centroids);
        history.push(s);
        let improvement = sse - s;
        assign = a;
        dists = ds;
        sse = s;
        if improvement < SSE_TOL {
            break;
        }
    }
    KMeansFit {
        centroids,
        assignments: assign,
        sse,
        sse_history: history,
    }
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Best of [`RESTARTS`] k-means++ / Lloyd runs by SSE.
pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<KMeansFit> {
    if k == 0 || x.rows() < k {
        return Err(Error::NotEnoughData(format!(
            "k-means needs at least k = {k} points, got {}",
            x.rows()
        )));
    }
    let fits = map_indices(RESTARTS, |r| {
        lloyd(x, seed_centroids(x, k, restart_seed(seed, r)))
    });
    let mut best: Option<KMeansFit> = None;
    for fit in fits {
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// AIC of a k-means solution read as a Gaussian mixture: centroids as means,
/// cluster fractions as weights and one shared isotropic variance
/// `SSE / (N·d)` (floored at `var_floor`). Parameters: `k·d` means, one
/// variance and `k − 1` free weights.
pub fn aic_score(x: &Matrix, fit: &KMeansFit, var_floor: f64) -> f64 {
    let n = x.rows();
    let d = x.cols();
    let k = fit.centroids.rows();
    let var = (fit.sse / (n * d) as f64).max(var_floor);
    let mut counts = vec![0usize; k];
    for &a in &fit.assignments {
        counts[a] += 1;
    }
    let log_w: Vec<f64> = counts
        .iter()
        .map(|&c| if c > 0 { (c as f64 / n as f64).ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut loglik = 0.0;
    let mut terms = vec![0.0; k];
    for row in x.iter_rows() {
        let mut top = f64::NEG_INFINITY;
        for (j, c) in fit.centroids.iter_rows().enumerate() {
            terms[j] = log_w[j] - sq_dist(row, c) / (2.0 * var);
            top = top.max(terms[j]);
        }
        let s: f64 = terms.iter().map(|t| (t - top).exp()).sum();
        loglik += top + s.ln();
    }
    loglik -= 0.5 * (n * d) as f64 * (2.0 * std::f64::consts::PI * var).ln();
    let params = (k * d + 1 + (k - 1)) as f64;
    2.0 * params - 2.0 * loglik
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub k: usize,
    pub d: usize,
    pub mode: Encoding,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    /// AIC for k = 1, 2, ...; empty for hand-built codebooks.
    pub aic_curve: Vec<f64>,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let k = centroids.len();
        if k == 0 {
            return Err(Error::Empty("codebook centroids"));
        }
        let d = centroids[0].len();
        if let Some(bad) = centroids.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(Self {
            k,
            d,
            mode: Encoding::Bow,
            centroids,
            seed: 0,
            aic_curve: Vec::new(),
        })
    }

    pub fn with_mode(mut self, mode: Encoding) -> Self {
        self.mode = mode;
        self
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    pub fn encode<R: AsRef<[f64]>>(&self, descriptors: &[R]) -> Result<Vec<f64>> {
        match self.mode {
            Encoding::Bow => encode_bow(self, descriptors),
            Encoding::Vlad => encode_vlad(self, descriptors),
        }
    }

    pub fn output_len(&self, mode: Encoding) -> usize {
        match mode {
            Encoding::Bow => self.k,
            Encoding::Vlad => self.k * self.d,
        }
    }
}

/// Fits k-means for k = 1..=min(k_max, N) and keeps the k with the lowest
/// AIC (ties favour the smaller k).
pub fn select_k_aic(x: &Matrix, k_max: usize, seed: u64) -> Result<Codebook> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::NotEnoughData(format!(
            "codebook selection needs ≥ 2 descriptors, got {n}"
        )));
    }
    let k_upper = k_max.max(1).min(n);
    let all_same = x.iter_rows().all(|r| r == x.row(0));
    let ks = if all_same { 1 } else { k_upper };

    let fits = map_indices(ks, |i| kmeans(x, i + 1, derive_seed(seed, &[(i + 1) as u64])));
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let var_floor = 1e-12 * fits[0].sse / (n * x.cols()) as f64;
    let var_floor = var_floor.max(f64::MIN_POSITIVE);
    let aic_curve: Vec<f64> = fits.iter().map(|f| aic_score(x, f, var_floor)).collect();

    let mut best = 0;
    for (i, &a) in aic_curve.iter().enumerate() {
        if a < aic_curve[best] {
            best = i;
        }
    }
    let fit = &fits[best];
    Ok(Codebook {
        k: best + 1,
        d: x.cols(),
        mode: Encoding::Bow,
        centroids: fit.centroids.iter_rows().map(<[f64]>::to_vec).collect(),
        seed,
        aic_curve,
    })
}

fn check_descriptors<R: AsRef<[f64]>>(cb: &Codebook, descriptors: &[R]) -> Result<()> {
    if descriptors.is_empty() {
        return Err(Error::Empty("bout descriptors"));
    }
    for x in descriptors {
        if x.as_ref().len() != cb.d {
            return Err(Error::DimensionMismatch {
                expected: cb.d,
                found: x.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Normalized histogram of nearest-centroid assignments.
pub fn encode_bow<R: AsRef<[f64]>>(cb: &Codebook, descriptors: &[R]) -> Result<Vec<f64>> {
    check_descriptors(cb, descriptors)?;
    let mut hist = vec![0.0; cb.k];
    for x in descriptors {
        hist[cb.nearest(x.as_ref())] += 1.0;
    }
    let n = descriptors.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    Ok(hist)
}

/// Residual sums per centroid, L2-normalized per block and then globally.
pub fn encode_vlad<R: AsRef<[f64]>>(cb: &Codebook, descriptors: &[R]) -> Result<Vec<f64>> {
    check_descriptors(cb, descriptors)?;
    let d = cb.d;
    let mut v = vec![0.0; cb.k * d];
    for x in descriptors {
        let x = x.as_ref();
        let j = cb.nearest(x);
        for ((acc, xi), ci) in v[j * d..(j + 1) * d].iter_mut().zip(x).zip(&cb.centroids[j]) {
            *acc += xi - ci;
        }
    }
    for block in v.chunks_mut(d) {
        let n = crate::linalg::norm(block);
        if n > 0.0 {
            block.iter_mut().for_each(|b| *b /= n);
        }
    }
    let n = crate::linalg::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|b| *b /= n);
    }
    Ok(v)
}
