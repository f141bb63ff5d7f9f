//! Deterministic synthetic corpora.
//!
//! Each chew is a Hann-windowed burst of white noise passed through a
//! one-pole tilt filter `y[n] = g·x[n] − tilt·y[n−1]`, so positive tilt
//! moves energy to high frequencies (crispy foods) and negative tilt to low
//! frequencies (wet foods). Chew count and burst energy both grow with the
//! bite weight.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Bout, ChewAnnotation, Dataset, Food, Recording, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

const LEAD_S: f64 = 0.25;
const BOUT_PAUSE_S: f64 = 0.6;
const MIN_CHEW_S: f64 = 0.02;
const MIN_GAP_S: f64 = 0.02;
/// Mean of the squared Hann window.
const HANN_POWER: f64 = 3.0 / 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodParams {
    pub weight_range_g: [f64; 2],
    pub chews_per_gram: f64,
    /// Chew counts are perturbed uniformly within ± this many chews.
    pub chew_count_noise: u32,
    pub chew_duration_mean_s: f64,
    pub chew_duration_sd_s: f64,
    pub gap_mean_s: f64,
    pub gap_sd_s: f64,
    /// One-pole tilt in (−1, 1); positive emphasizes high frequencies.
    pub spectral_tilt: f64,
    /// Per-sample burst energy at zero weight.
    pub energy_base: f64,
    pub energy_per_gram: f64,
    /// Standard deviation of the background noise.
    pub noise_floor: f64,
}

impl FoodParams {
    pub fn default_for(food: Food) -> Self {
        let base = FoodParams {
            weight_range_g: [2.0, 20.0],
            chews_per_gram: 0.8,
            chew_count_noise: 1,
            chew_duration_mean_s: 0.10,
            chew_duration_sd_s: 0.015,
            gap_mean_s: 0.08,
            gap_sd_s: 0.015,
            spectral_tilt: 0.0,
            energy_base: 2e-4,
            energy_per_gram: 4e-4,
            noise_floor: 5e-4,
        };
        match food {
            Food::Apple => FoodParams {
                spectral_tilt: 0.6,
                ..base
            },
            Food::Banana => FoodParams {
                chews_per_gram: 0.6,
                chew_duration_mean_s: 0.12,
                spectral_tilt: -0.6,
                energy_per_gram: 2.5e-4,
                ..base
            },
            Food::Rice => FoodParams {
                chews_per_gram: 0.7,
                chew_duration_mean_s: 0.11,
                spectral_tilt: -0.3,
                energy_per_gram: 3e-4,
                ..base
            },
            Food::Chips => FoodParams {
                weight_range_g: [0.5, 3.0],
                chews_per_gram: 2.0,
                chew_duration_mean_s: 0.09,
                spectral_tilt: 0.8,
                energy_base: 2e-4,
                energy_per_gram: 3e-3,
                ..base
            },
        }
    }

    fn check(&self, food: Food) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{food}: {what}")));
        let [lo, hi] = self.weight_range_g;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("weight range must be positive and ordered");
        }
        if !(self.chews_per_gram > 0.0) {
            return bad("chews_per_gram must be positive");
        }
        if !(self.chew_duration_mean_s > 0.0 && self.gap_mean_s >= 0.0) {
            return bad("chew duration must be positive and gaps non-negative");
        }
        if !(self.chew_duration_sd_s >= 0.0 && self.gap_sd_s >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        if !(self.spectral_tilt > -1.0 && self.spectral_tilt < 1.0) {
            return bad("spectral_tilt must lie in (-1, 1)");
        }
        if !(self.energy_base >= 0.0 && self.energy_per_gram >= 0.0 && self.noise_floor >= 0.0) {
            return bad("energies and noise floor must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodTable {
    pub apple: FoodParams,
    pub banana: FoodParams,
    pub rice: FoodParams,
    pub chips: FoodParams,
}

impl FoodTable {
    pub fn get(&self, food: Food) -> &FoodParams {
        match food {
            Food::Apple => &self.apple,
            Food::Banana => &self.banana,
            Food::Rice => &self.rice,
            Food::Chips => &self.chips,
        }
    }

    pub fn get_mut(&mut self, food: Food) -> &mut FoodParams {
        match food {
            Food::Apple => &mut self.apple,
            Food::Banana => &mut self.banana,
            Food::Rice => &mut self.rice,
            Food::Chips => &mut self.chips,
        }
    }
}

impl Default for FoodTable {
    fn default() -> Self {
        Self {
            apple: FoodParams::default_for(Food::Apple),
            banana: FoodParams::default_for(Food::Banana),
            rice: FoodParams::default_for(Food::Rice),
            chips: FoodParams::default_for(Food::Chips),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub bouts_per_subject_per_food: usize,
    pub seed: u64,
    /// Foods to generate; one recording per (subject, food).
    pub foods: Vec<Food>,
    /// Relative spread of per-subject chewing pace and loudness.
    pub subject_variation: f64,
    /// Log-normal sigma of per-chew energy.
    pub energy_jitter: f64,
    /// Replace each weight by `n_chews / chews_per_gram`, making weight an
    /// exact linear function of the chew count.
    pub snap_weight_to_chews: bool,
    pub food_params: FoodTable,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 8,
            bouts_per_subject_per_food: 15,
            seed: 0x5eed,
            foods: Food::ALL.to_vec(),
            subject_variation: 0.1,
            energy_jitter: 0.1,
            snap_weight_to_chews: false,
            food_params: FoodTable::default(),
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_subjects < 1 || self.bouts_per_subject_per_food < 1 {
            return Err(Error::Config("subject and bout counts must be ≥ 1".into()));
        }
        if self.foods.is_empty() {
            return Err(Error::Config("at least one food is required".into()));
        }
        if !(0.0..1.0).contains(&self.subject_variation) || !(self.energy_jitter >= 0.0) {
            return Err(Error::Config(
                "subject_variation must lie in [0, 1) and energy_jitter be non-negative".into(),
            ));
        }
        for &food in &self.foods {
            self.food_params.get(food).check(food)?;
        }
        Ok(())
    }
}

pub fn subject_name(i: usize) -> String {
    format!("s{:02}", i + 1)
}

/// Generates a synthetic dataset; a pure function of `cfg`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.check()?;
    let fs = SAMPLE_RATE_HZ as f64;
    let mut recordings = Vec::new();
    for s in 0..cfg.n_subjects {
        let subject_id = subject_name(s);
        let mut subj_rng = rng(derive_seed(cfg.seed, &[s as u64, u64::MAX]));
        let v = cfg.subject_variation;
        let pace = 1.0 + subj_rng.random_range(-v..=v);
        let loudness = 1.0 + subj_rng.random_range(-v..=v);

        for &food in &cfg.foods {
            let p = cfg.food_params.get(food);
            let mut r = rng(derive_seed(cfg.seed, &[s as u64, food.index() as u64]));
            let dur_dist = Normal::new(p.chew_duration_mean_s * pace, p.chew_duration_sd_s)
                .map_err(|e| Error::Config(e.to_string()))?;
            let gap_dist = Normal::new(p.gap_mean_s * pace, p.gap_sd_s)
                .map_err(|e| Error::Config(e.to_string()))?;

            // (start, len, energy) per chew, in samples.
            let mut bursts: Vec<(usize, usize, f64)> = Vec::new();
            let mut bouts = Vec::with_capacity(cfg.bouts_per_subject_per_food);
            let mut cursor = (LEAD_S * fs) as usize;
            for _ in 0..cfg.bouts_per_subject_per_food {
                let [lo, hi] = p.weight_range_g;
                let mut weight = if hi > lo { r.random_range(lo..hi) } else { lo };
                let nominal = (p.chews_per_gram * weight).round() as i64;
                let n = if cfg.snap_weight_to_chews {
                    let n = nominal.max(1);
                    weight = n as f64 / p.chews_per_gram;
                    n
                } else {
                    let k = p.chew_count_noise as i64;
                    (nominal + r.random_range(-k..=k)).max(1)
                } as usize;

                let mut chews = Vec::with_capacity(n);
                for _ in 0..n {
                    let dur = dur_dist.sample(&mut r).max(MIN_CHEW_S);
                    let len = (dur * fs).round() as usize;
                    let z: f64 = StandardNormal.sample(&mut r);
                    let energy = (p.energy_base + p.energy_per_gram * weight)
                        * loudness
                        * (cfg.energy_jitter * z).exp();
                    bursts.push((cursor, len, energy));
                    chews.push(ChewAnnotation::new(
                        cursor as f64 / fs,
                        (cursor + len) as f64 / fs,
                    ));
                    let gap = gap_dist.sample(&mut r).max(MIN_GAP_S);
                    cursor += len + (gap * fs).round() as usize;
                }
                cursor += (BOUT_PAUSE_S * fs) as usize;
                bouts.push(Bout {
                    subject_id: subject_id.clone(),
                    food,
                    weight_g: weight,
                    chews,
                });
            }
            let total = cursor + (LEAD_S * fs) as usize;

            let mut audio = vec![0.0f64; total];
            if p.noise_floor > 0.0 {
                for a in audio.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut r);
                    *a = p.noise_floor * z;
                }
            }
            let gain = (1.0 - p.spectral_tilt * p.spectral_tilt).sqrt();
            for &(start, len, energy) in &bursts {
                let amp = (energy / HANN_POWER).sqrt();
                let mut y = 0.0;
                for i in 0..len {
                    let x: f64 = StandardNormal.sample(&mut r);
                    y = gain * x - p.spectral_tilt * y;
                    let w = 0.5
                        - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos();
                    audio[start + i] += amp * w * y;
                }
            }
            let samples = audio
                .iter()
                .map(|&a| ((a * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0) as f32)
                .collect();

            recordings.push(Recording {
                name: format!("{subject_id}_{}", food.label().to_ascii_lowercase()),
                subject_id: subject_id.clone(),
                sample_rate_hz: SAMPLE_RATE_HZ,
                samples,
                bouts,
            });
        }
    }
    Ok(Dataset { recordings })
}
