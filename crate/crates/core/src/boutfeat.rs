//! Non-audio bout features and assembly of the F1–F5 feature sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chewfeat::{ChewDescriptor, DESCRIPTOR_DIM};
use crate::codebook::{encode_bow, encode_vlad, Codebook};
use crate::dataset::{Bout, Food};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Number of numeric (non one-hot) timing features.
pub const N_TIMING: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoutFeatures {
    pub n_chews: usize,
    pub chew_dur_mean: f64,
    pub chew_dur_std: f64,
    /// Mean inter-onset interval `t1[i] − t1[i−1]`, in seconds.
    pub rate_mean: f64,
    pub rate_std: f64,
    pub food_onehot: [f64; 4],
}

impl BoutFeatures {
    pub fn timing(&self) -> [f64; N_TIMING] {
        [
            self.n_chews as f64,
            self.chew_dur_mean,
            self.chew_dur_std,
            self.rate_mean,
            self.rate_std,
        ]
    }
}

pub fn nonaudio_features(b: &Bout) -> BoutFeatures {
    let durations: Vec<f64> = b.chews.iter().map(|c| c.duration_s()).collect();
    let intervals: Vec<f64> = b
        .chews
        .windows(2)
        .map(|w| w[1].start_s - w[0].start_s)
        .collect();
    let mut food_onehot = [0.0; 4];
    food_onehot[b.food.index()] = 1.0;
    BoutFeatures {
        n_chews: b.chews.len(),
        chew_dur_mean: mean(&durations),
        chew_dur_std: sample_std(&durations),
        rate_mean: mean(&intervals),
        rate_std: sample_std(&intervals),
        food_onehot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSetId {
    /// Non-audio timing features.
    F1,
    /// Audio, bag-of-words.
    F2,
    /// Audio, VLAD.
    F3,
    /// F1 ‖ F2.
    F4,
    /// F1 ‖ F3.
    F5,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 5] = [
        FeatureSetId::F1,
        FeatureSetId::F2,
        FeatureSetId::F3,
        FeatureSetId::F4,
        FeatureSetId::F5,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn uses_timing(self) -> bool {
        matches!(self, FeatureSetId::F1 | FeatureSetId::F4 | FeatureSetId::F5)
    }

    pub fn uses_audio(self) -> bool {
        !matches!(self, FeatureSetId::F1)
    }

    pub fn audio_encoding(self) -> Option<Encoding> {
        match self {
            FeatureSetId::F1 => None,
            FeatureSetId::F2 | FeatureSetId::F4 => Some(Encoding::Bow),
            FeatureSetId::F3 | FeatureSetId::F5 => Some(Encoding::Vlad),
        }
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.index() + 1)
    }
}

impl FromStr for FeatureSetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Self::F1),
            "F2" => Ok(Self::F2),
            "F3" => Ok(Self::F3),
            "F4" => Ok(Self::F4),
            "F5" => Ok(Self::F5),
            _ => Err(format!("unknown feature set '{s}' (expected F1..F5)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    Bow,
    Vlad,
}

/// Training regime: one food only, or all foods pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Food(Food),
    All,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Food(Food::Apple),
        Regime::Food(Food::Banana),
        Regime::Food(Food::Rice),
        Regime::Food(Food::Chips),
        Regime::All,
    ];

    pub fn index(self) -> usize {
        match self {
            Regime::Food(f) => f.index(),
            Regime::All => 4,
        }
    }

    pub fn includes(self, food: Food) -> bool {
        match self {
            Regime::Food(f) => f == food,
            Regime::All => true,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Food(f) => f.label(),
            Regime::All => "All",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            Ok(Regime::All)
        } else {
            Food::from_str(s).map(Regime::Food)
        }
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Regime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Length of the F1 block: the five timing features, plus the food one-hot
/// in the all-foods regime.
pub fn timing_len(regime: Regime) -> usize {
    match regime {
        Regime::All => N_TIMING + 4,
        Regime::Food(_) => N_TIMING,
    }
}

pub fn feature_len(set: FeatureSetId, k: usize, regime: Regime) -> usize {
    let audio = match set.audio_encoding() {
        None => 0,
        Some(Encoding::Bow) => k,
        Some(Encoding::Vlad) => k * DESCRIPTOR_DIM,
    };
    let timing = if set.uses_timing() { timing_len(regime) } else { 0 };
    timing + audio
}

/// Builds the feature vector of one bout. `descriptors` must already be
/// standardized; `cb` is required for F2..F5.
pub fn assemble(
    set: FeatureSetId,
    bout: &Bout,
    descriptors: &[ChewDescriptor],
    cb: Option<&Codebook>,
    regime: Regime,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if set.uses_timing() {
        let f = nonaudio_features(bout);
        out.extend(f.timing());
        if regime == Regime::All {
            out.extend(f.food_onehot);
        }
    }
    if let Some(enc) = set.audio_encoding() {
        let cb = cb.ok_or_else(|| Error::MissingCodebook(set.to_string()))?;
        let v = match enc {
            Encoding::Bow => encode_bow(cb, descriptors)?,
            Encoding::Vlad => encode_vlad(cb, descriptors)?,
        };
        out.extend(v);
    }
    Ok(out)
}

/// Column names matching [`assemble`]'s output layout.
pub fn feature_names(set: FeatureSetId, k: usize, regime: Regime) -> Vec<String> {
    let mut names = Vec::new();
    if set.uses_timing() {
        names.extend(
            ["n_chews", "chew_dur_mean", "chew_dur_std", "rate_mean", "rate_std"]
                .map(String::from),
        );
        if regime == Regime::All {
            names.extend(Food::ALL.map(|f| format!("food_{}", f.label().to_ascii_lowercase())));
        }
    }
    match set.audio_encoding() {
        Some(Encoding::Bow) => names.extend((0..k).map(|c| format!("bow_{c}"))),
        Some(Encoding::Vlad) => names.extend(
            (0..k).flat_map(|c| (0..DESCRIPTOR_DIM).map(move |j| format!("vlad_{c}_{j}"))),
        ),
        None => {}
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ChewAnnotation;

    fn bout(t1: &[f64], t2: &[f64]) -> Bout {
        Bout {
            subject_id: "s".into(),
            food: Food::Rice,
            weight_g: 1.0,
            chews: t1
                .iter()
                .zip(t2)
                .map(|(&a, &b)| ChewAnnotation::new(a, b))
                .collect(),
        }
    }

    #[test]
    fn equal_spacing() {
        let f = nonaudio_features(&bout(&[0.0, 0.5, 1.0], &[0.4, 0.9, 1.4]));
        assert_eq!(f.n_chews, 3);
        assert!((f.chew_dur_mean - 0.4).abs() < 1e-12);
        assert!(f.chew_dur_std < 1e-12);
        assert!((f.rate_mean - 0.5).abs() < 1e-12);
        assert!(f.rate_std < 1e-12);
        assert_eq!(f.food_onehot, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_chews() {
        let f = nonaudio_features(&bout(&[0.0, 0.6], &[0.3, 1.1]));
        assert_eq!(f.n_chews, 2);
        assert!((f.chew_dur_mean - 0.4).abs() < 1e-12);
        // Durations 0.3 and 0.5: sample std = sqrt(0.02) ≈ 0.1414.
        assert!((f.chew_dur_std - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((f.rate_mean - 0.6).abs() < 1e-12);
        assert_eq!(f.rate_std, 0.0);
    }

    #[test]
    fn single_chew_conventions() {
        let f = nonaudio_features(&bout(&[0.0], &[0.3]));
        assert_eq!(f.n_chews, 1);
        assert!((f.chew_dur_mean - 0.3).abs() < 1e-12);
        assert_eq!((f.chew_dur_std, f.rate_mean, f.rate_std), (0.0, 0.0, 0.0));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("f4".parse::<FeatureSetId>().unwrap(), FeatureSetId::F4);
        assert_eq!(FeatureSetId::F5.to_string(), "F5");
        assert_eq!("Chips".parse::<Regime>().unwrap(), Regime::Food(Food::Chips));
        assert_eq!("all".parse::<Regime>().unwrap(), Regime::All);
        assert!("F6".parse::<FeatureSetId>().is_err());
    }

    #[test]
    fn audio_set_without_codebook_fails() {
        let b = bout(&[0.0], &[0.3]);
        assert!(matches!(
            assemble(FeatureSetId::F2, &b, &[], None, Regime::All),
            Err(Error::MissingCodebook(_))
        ));
        let f1 = assemble(FeatureSetId::F1, &b, &[], None, Regime::Food(Food::Rice)).unwrap();
        assert_eq!(f1.len(), 5);
        let f1 = assemble(FeatureSetId::F1, &b, &[], None, Regime::All).unwrap();
        assert_eq!(f1.len(), 9);
    }
}
