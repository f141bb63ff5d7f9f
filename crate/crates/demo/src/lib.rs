//! Browser demo: chew descriptor of a generated signal, AIC codebook sizing
//! on two 2-D clusters, and GRNN smoothing of a noisy 1-D curve.
//!
//! The `*_json` functions are exported to JavaScript and return JSON text;
//! the plain functions behind them are ordinary Rust and tested natively.

use biteweight::chewfeat::{band_edges_hz, extract_chew_descriptor, FEATURE_NAMES};
use biteweight::codebook::select_k_aic;
use biteweight::estimators::grnn::{grnn_with_sigma, median_pairwise_distance};
use biteweight::estimators::TrainSet;
use biteweight::linalg::Matrix;
use biteweight::seed::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const DEMO_FS: f64 = 44_100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Sine,
    Noise,
    Chirp,
}

impl SignalKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sine" => Some(SignalKind::Sine),
            "noise" => Some(SignalKind::Noise),
            "chirp" => Some(SignalKind::Chirp),
            _ => None,
        }
    }
}

/// `n` samples at 44.1 kHz. `freq_hz` is the sine frequency, the chirp end
/// frequency, or the noise low-pass corner.
pub fn generate_signal(kind: SignalKind, n: usize, freq_hz: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match kind {
        SignalKind::Sine => (0..n)
            .map(|i| amplitude * (two_pi * freq_hz * i as f64 / DEMO_FS).sin())
            .collect(),
        SignalKind::Chirp => {
            let dur = n as f64 / DEMO_FS;
            (0..n)
                .map(|i| {
                    let t = i as f64 / DEMO_FS;
                    amplitude * (two_pi * (20.0 * t + 0.5 * (freq_hz - 20.0) / dur * t * t)).sin()
                })
                .collect()
        }
        SignalKind::Noise => {
            let mut r = rng(seed);
            let a = (-two_pi * freq_hz / DEMO_FS).exp();
            let mut y = 0.0;
            (0..n)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut r);
                    y = a * y + (1.0 - a) * x;
                    amplitude * y
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DescriptorView {
    pub samples: Vec<f64>,
    pub band_edges_hz: Vec<f64>,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

pub fn describe(kind: SignalKind, n: usize, freq_hz: f64, amplitude: f64, seed: u64) -> Result<DescriptorView, String> {
    let samples = generate_signal(kind, n, freq_hz, amplitude, seed);
    let d = extract_chew_descriptor(&samples, DEMO_FS).map_err(|e| e.to_string())?;
    Ok(DescriptorView {
        band_edges_hz: band_edges_hz().to_vec(),
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        values: d.as_slice().to_vec(),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AicView {
    pub points: Vec<[f64; 2]>,
    pub centroids: Vec<Vec<f64>>,
    pub aic_curve: Vec<f64>,
    pub k: usize,
}

/// Two isotropic clusters `separation` apart (unit spread), `n` points each.
pub fn aic_scan(separation: f64, n: usize, k_max: usize, seed: u64) -> Result<AicView, String> {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let half = separation / 2.0;
    let points: Vec<[f64; 2]> = (0..2 * n)
        .map(|i| {
            let cx = if i < n { -half } else { half };
            [cx + normal.sample(&mut r), normal.sample(&mut r)]
        })
        .collect();
    let x = Matrix::from_rows(&points).map_err(|e| e.to_string())?;
    let cb = select_k_aic(&x, k_max, seed).map_err(|e| e.to_string())?;
    Ok(AicView {
        points,
        centroids: cb.centroids,
        aic_curve: cb.aic_curve,
        k: cb.k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrnnView {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub grid: Vec<f64>,
    pub prediction: Vec<f64>,
    pub sigma: f64,
}

/// Noisy samples of 3 + sin(x) on [0, 2π], smoothed with
/// σ = `sigma_factor` × median pairwise distance.
pub fn grnn_curve(sigma_factor: f64, n: usize, noise: f64, seed: u64) -> Result<GrnnView, String> {
    if n < 2 {
        return Err("need at least 2 samples".into());
    }
    let mut r = rng(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..two_pi)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut r);
            3.0 + v.sin() + noise * z
        })
        .collect();
    let m = Matrix::from_vec(n, 1, x.clone()).map_err(|e| e.to_string())?;
    let base = median_pairwise_distance(&m);
    let sigma = sigma_factor * if base > 0.0 { base } else { 1.0 };
    let t = TrainSet::ungrouped(m, y.clone()).map_err(|e| e.to_string())?;
    let model = grnn_with_sigma(&t, sigma);
    let grid: Vec<f64> = (0..=200).map(|i| two_pi * i as f64 / 200.0).collect();
    let prediction = grid.iter().map(|g| model.predict(&[*g])).collect();
    Ok(GrnnView {
        x,
        y,
        grid,
        prediction,
        sigma,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn describe_json(kind: &str, n: usize, freq_hz: f64, amplitude: f64, seed: u64) -> Result<String, JsValue> {
    let kind = SignalKind::parse(kind).ok_or_else(|| JsValue::from_str("kind must be sine, noise or chirp"))?;
    to_js(describe(kind, n, freq_hz, amplitude, seed))
}

#[wasm_bindgen]
pub fn aic_json(separation: f64, n: usize, k_max: usize, seed: u64) -> Result<String, JsValue> {
    to_js(aic_scan(separation, n, k_max, seed))
}

#[wasm_bindgen]
pub fn grnn_json(sigma_factor: f64, n: usize, noise: f64, seed: u64) -> Result<String, JsValue> {
    to_js(grnn_curve(sigma_factor, n, noise, seed))
}
