//! Corpus data model: recordings of chewing audio with annotated bouts.

mod io;
mod synth;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{load_dataset, load_dataset_unchecked, read_annotations, write_dataset};
pub use synth::{synth_generate, FoodParams, FoodTable, SynthConfig};
pub use validate::{validate, ValidationIssue, ValidationReport};

pub const SAMPLE_RATE_HZ: u32 = 44_100;
pub const BIT_DEPTH: u16 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Food {
    Apple,
    Banana,
    Rice,
    Chips,
}

impl Food {
    pub const ALL: [Food; 4] = [Food::Apple, Food::Banana, Food::Rice, Food::Chips];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Food::Apple => "Apple",
            Food::Banana => "Banana",
            Food::Rice => "Rice",
            Food::Chips => "Chips",
        }
    }
}

impl fmt::Display for Food {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Food {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "apple" => Ok(Food::Apple),
            "banana" => Ok(Food::Banana),
            "rice" => Ok(Food::Rice),
            "chips" | "potato chips" => Ok(Food::Chips),
            other => Err(format!("unknown food type '{other}'")),
        }
    }
}

/// Start and stop time-stamps of one chew, in seconds from the start of the
/// recording. Serialized as a `[start_s, stop_s]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ChewAnnotation {
    pub start_s: f64,
    pub stop_s: f64,
}

impl ChewAnnotation {
    pub fn new(start_s: f64, stop_s: f64) -> Self {
        Self { start_s, stop_s }
    }

    pub fn duration_s(&self) -> f64 {
        self.stop_s - self.start_s
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self::new(self.start_s + dt, self.stop_s + dt)
    }
}

impl From<[f64; 2]> for ChewAnnotation {
    fn from([start_s, stop_s]: [f64; 2]) -> Self {
        Self { start_s, stop_s }
    }
}

impl From<ChewAnnotation> for [f64; 2] {
    fn from(c: ChewAnnotation) -> Self {
        [c.start_s, c.stop_s]
    }
}

/// One bite: its chews, food type and ground-truth weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bout {
    pub subject_id: String,
    pub food: Food,
    pub weight_g: f64,
    pub chews: Vec<ChewAnnotation>,
}

impl Bout {
    pub fn n_chews(&self) -> usize {
        self.chews.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// File stem shared by the WAV and annotation files.
    pub name: String,
    pub subject_id: String,
    pub sample_rate_hz: u32,
    /// Mono samples normalized to [−1, 1].
    pub samples: Vec<f32>,
    pub bouts: Vec<Bout>,
}

impl Recording {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Sample index range covered by a chew, clamped to the recording.
    pub fn chew_range(&self, chew: &ChewAnnotation) -> std::ops::Range<usize> {
        let fs = self.sample_rate_hz as f64;
        let to_idx = |t: f64| ((t * fs).round().max(0.0) as usize).min(self.samples.len());
        let start = to_idx(chew.start_s);
        let stop = to_idx(chew.stop_s).max(start);
        start..stop
    }

    pub fn chew_samples(&self, chew: &ChewAnnotation) -> Vec<f64> {
        self.samples[self.chew_range(chew)]
            .iter()
            .map(|&s| s as f64)
            .collect()
    }
}

/// Position of a bout within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoutId {
    pub recording: usize,
    pub bout: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn subjects(&self) -> BTreeSet<String> {
        self.recordings
            .iter()
            .flat_map(|r| {
                std::iter::once(r.subject_id.clone())
                    .chain(r.bouts.iter().map(|b| b.subject_id.clone()))
            })
            .collect()
    }

    pub fn bouts(&self) -> impl Iterator<Item = (BoutId, &Bout)> + '_ {
        self.recordings.iter().enumerate().flat_map(|(ri, r)| {
            r.bouts.iter().enumerate().map(move |(bi, b)| {
                (
                    BoutId {
                        recording: ri,
                        bout: bi,
                    },
                    b,
                )
            })
        })
    }

    pub fn n_bouts(&self) -> usize {
        self.recordings.iter().map(|r| r.bouts.len()).sum()
    }

    pub fn bout(&self, id: BoutId) -> &Bout {
        &self.recordings[id.recording].bouts[id.bout]
    }
}
