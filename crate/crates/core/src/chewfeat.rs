//! Per-chew audio descriptors.
//!
//! Every chew yields a 13-dimensional [`ChewDescriptor`]: nine octave-band
//! log energies (20 Hz to 10.24 kHz), skewness, kurtosis, Katz fractal
//! dimension and broadband log energy. Energies are per-sample averages, so
//! chews of different length give comparable values.
//!
//! Band energies come from a single DFT over the whole chew, taken at the
//! chew's own length with a rectangular frame. A self-concatenated signal
//! then has exactly the same per-sample band energies as the original.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

pub const N_BANDS: usize = 9;
pub const DESCRIPTOR_DIM: usize = N_BANDS + 4;
pub const MIN_CHEW_SAMPLES: usize = 16;
/// Lowest band edge; band `k` spans `[20·2^k, 20·2^(k+1))` Hz.
pub const BAND_BASE_HZ: f64 = 20.0;
/// Log-energy floor relative to the chew's broadband energy.
const REL_ENERGY_FLOOR: f64 = 1e-12;
const MAX_KATZ_FD: f64 = 10.0;
const MIN_STD: f64 = 1e-12;

pub const FEATURE_NAMES: [&str; DESCRIPTOR_DIM] = [
    "band_20_40",
    "band_40_80",
    "band_80_160",
    "band_160_320",
    "band_320_640",
    "band_640_1280",
    "band_1280_2560",
    "band_2560_5120",
    "band_5120_10240",
    "skewness",
    "kurtosis",
    "katz_fd",
    "log_total_energy",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChewDescriptor(pub [f64; DESCRIPTOR_DIM]);

impl ChewDescriptor {
    pub fn band_log_energy(&self) -> &[f64] {
        &self.0[..N_BANDS]
    }

    pub fn skewness(&self) -> f64 {
        self.0[N_BANDS]
    }

    pub fn kurtosis(&self) -> f64 {
        self.0[N_BANDS + 1]
    }

    pub fn katz_fd(&self) -> f64 {
        self.0[N_BANDS + 2]
    }

    pub fn log_total_energy(&self) -> f64 {
        self.0[N_BANDS + 3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ChewDescriptor {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn band_edges_hz() -> [f64; N_BANDS + 1] {
    std::array::from_fn(|k| BAND_BASE_HZ * (1u32 << k) as f64)
}

// A shared planner's choice depends on what it has already planned, so each
// size gets a fresh planner to keep results independent of call history.
thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(n))
            .clone()
    })
}

/// Per-sample energy in each octave band.
pub fn band_energies(samples: &[f64], fs: f64) -> [f64; N_BANDS] {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    plan(n).process(&mut buf);

    let edges = band_edges_hz();
    let norm = 1.0 / (n as f64 * n as f64);
    let mut bands = [0.0; N_BANDS];
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * fs / n as f64;
        if f < edges[0] || f >= edges[N_BANDS] {
            continue;
        }
        // Two-sided power folds onto positive bins, except Nyquist.
        let fold = if 2 * k == n { 1.0 } else { 2.0 };
        let band = ((f / BAND_BASE_HZ).log2().floor() as usize).min(N_BANDS - 1);
        // log2 can round an exact edge down; keep membership consistent.
        let band = if f >= edges[band + 1] { band + 1 } else { band };
        bands[band] += fold * c.norm_sqr() * norm;
    }
    bands
}

/// Population skewness and (non-excess) kurtosis; both 0 for constant input.
pub fn moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mu = mean(samples);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let scale = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if m2 <= f64::EPSILON * f64::EPSILON * scale || m2 == 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Katz fractal dimension `log10(n) / (log10(n) + log10(d/L))` with `n`
/// steps, path length `L` and maximal excursion `d` from the first sample.
/// Flat signals give 1; the value is capped at 10 for pathological
/// oscillations where the denominator vanishes.
pub fn katz_fd(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 1.0;
    }
    let path: f64 = samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let first = samples[0];
    let extent = samples
        .iter()
        .map(|x| (x - first).abs())
        .fold(0.0, f64::max);
    if path <= 0.0 || extent <= 0.0 {
        return 1.0;
    }
    let log_n = ((samples.len() - 1) as f64).log10();
    let denom = log_n + (extent / path).log10();
    if denom <= 0.0 {
        return MAX_KATZ_FD;
    }
    (log_n / denom).min(MAX_KATZ_FD)
}

/// Computes the descriptor of one chew.
pub fn extract_chew_descriptor(samples: &[f64], fs: f64) -> Result<ChewDescriptor> {
    if samples.len() < MIN_CHEW_SAMPLES {
        return Err(Error::ChewTooShort {
            len: samples.len(),
            min: MIN_CHEW_SAMPLES,
        });
    }
    let total = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    let floor = REL_ENERGY_FLOOR * total.max(f64::MIN_POSITIVE);
    let bands = band_energies(samples, fs);
    let (skew, kurt) = moments(samples);

    let mut d = [0.0; DESCRIPTOR_DIM];
    for (slot, e) in d.iter_mut().zip(bands) {
        *slot = (e + floor).ln();
    }
    d[N_BANDS] = skew;
    d[N_BANDS + 1] = kurt;
    d[N_BANDS + 2] = katz_fd(samples);
    d[N_BANDS + 3] = (total + floor).ln();
    Ok(ChewDescriptor(d))
}

/// Per-dimension z-scoring fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits mean and sample standard deviation per dimension. Dimensions
    /// with std below 1e-12 pass through unscaled.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("standardizer training rows"))?;
        let dim = first.as_ref().len();
        let mut mean_v = Vec::with_capacity(dim);
        let mut std_v = Vec::with_capacity(dim);
        let mut col = Vec::with_capacity(rows.len());
        for j in 0..dim {
            col.clear();
            for r in rows {
                let r = r.as_ref();
                if r.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: r.len(),
                    });
                }
                col.push(r[j]);
            }
            let s = sample_std(&col);
            mean_v.push(mean(&col));
            std_v.push(if s < MIN_STD { 1.0 } else { s });
        }
        Ok(Self {
            mean: mean_v,
            std: std_v,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

pub fn fit_standardizer(train: &[ChewDescriptor]) -> Result<Standardizer> {
    Standardizer::fit(train)
}

pub fn apply_standardizer(s: &Standardizer, x: &ChewDescriptor) -> Result<ChewDescriptor> {
    let v = s.apply(x.as_slice())?;
    let mut out = [0.0; DESCRIPTOR_DIM];
    out.copy_from_slice(&v);
    Ok(ChewDescriptor(out))
}

/// One descriptor row per chew, keyed by subject, bout and chew index.
pub struct DescriptorRow<'a> {
    pub subject: &'a str,
    pub bout: usize,
    pub chew: usize,
    pub descriptor: &'a ChewDescriptor,
}

pub fn write_descriptor_csv<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = DescriptorRow<'a>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["subject", "bout", "chew"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.subject.to_string(), row.bout.to_string(), row.chew.to_string()];
        rec.extend(row.descriptor.0.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<descriptor csv>", e))?;
    Ok(())
}
