//! On-disk layout: one `<name>.wav` (RIFF PCM, 44.1 kHz, 16-bit, mono) and
//! one `<name>.json` annotation file per recording.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, Bout, Dataset, Recording, BIT_DEPTH, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationFile {
    subject_id: String,
    bouts: Vec<Bout>,
}

/// Parses one annotation file, returning the subject id and its bouts.
pub fn read_annotations(path: &Path) -> Result<(String, Vec<Bout>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: AnnotationFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((file.subject_id, file.bouts))
}

fn read_wav(path: &Path) -> Result<(u32, Vec<f32>)> {
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != BIT_DEPTH {
        return Err(wav_err(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.sample_rate != SAMPLE_RATE_HZ {
        return Err(wav_err(format!(
            "expected {SAMPLE_RATE_HZ} Hz, found {} Hz",
            spec.sample_rate
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    if raw.len() % channels != 0 {
        return Err(wav_err("truncated sample frame".into()));
    }
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f32 = frame.iter().map(|&s| s as f32 / 32768.0).sum();
            sum / channels as f32
        })
        .collect();
    Ok((spec.sample_rate, samples))
}

fn write_wav(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE_HZ,
        bits_per_sample: BIT_DEPTH,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

/// Loads every `<name>.json` + `<name>.wav` pair under `root` without
/// checking annotation invariants. Malformed files are still errors.
pub fn load_dataset_unchecked(root: &Path) -> Result<Dataset> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();

    let mut recordings = Vec::with_capacity(stems.len());
    for name in stems {
        let json_path = root.join(format!("{name}.json"));
        let wav_path = root.join(format!("{name}.wav"));
        let (subject_id, bouts) = read_annotations(&json_path)?;
        let (sample_rate_hz, samples) = read_wav(&wav_path)?;
        recordings.push(Recording {
            name,
            subject_id,
            sample_rate_hz,
            samples,
            bouts,
        });
    }
    Ok(Dataset { recordings })
}

/// Loads a dataset directory and verifies every invariant; the first
/// violation is reported with its annotation file and bout index.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let ds = load_dataset_unchecked(root)?;
    let report = validate(&ds);
    if let Some(issue) = report.issues.into_iter().next() {
        let file = match &issue.recording {
            Some(r) => format!("{}", root.join(format!("{r}.json")).display()),
            None => format!("{}", root.display()),
        };
        let message = match issue.chew {
            Some(c) => format!("chew {c}: {}", issue.message),
            None => issue.message,
        };
        return Err(Error::Annotation {
            file,
            record: issue.bout,
            message,
        });
    }
    Ok(ds)
}

/// Writes the dataset in the layout read by [`load_dataset`].
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for rec in &ds.recordings {
        write_wav(&root.join(format!("{}.wav", rec.name)), &rec.samples)?;
        let ann = AnnotationFile {
            subject_id: rec.subject_id.clone(),
            bouts: rec.bouts.clone(),
        };
        let json_path = root.join(format!("{}.json", rec.name));
        let mut text = serde_json::to_string_pretty(&ann).map_err(|source| Error::Json {
            path: json_path.clone(),
            source,
        })?;
        text.push('\n');
        fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    }
    Ok(())
}
