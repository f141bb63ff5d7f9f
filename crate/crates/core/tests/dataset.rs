use std::fs;

use biteweight::dataset::{
    load_dataset, load_dataset_unchecked, synth_generate, validate, write_dataset, ChewAnnotation, Dataset,
    Food, SynthConfig,
};
use proptest::prelude::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 2,
        bouts_per_subject_per_food: 2,
        seed,
        ..SynthConfig::default()
    }
}

fn sorted(mut ds: Dataset) -> Dataset {
    ds.recordings.sort_by(|a, b| a.name.cmp(&b.name));
    ds
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn default_config_gives_480_bouts() {
    let ds = synth_generate(&SynthConfig::default()).unwrap();
    assert_eq!(ds.n_bouts(), 480);
    assert_eq!(ds.subjects().len(), 8);
    assert!(validate(&ds).is_empty());
}

#[test]
fn weight_tracks_chew_count() {
    let cfg = SynthConfig {
        n_subjects: 5,
        bouts_per_subject_per_food: 25,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&cfg).unwrap();
    assert_eq!(ds.n_bouts(), 500);
    let (w, n): (Vec<f64>, Vec<f64>) = ds.bouts().map(|(_, b)| (b.weight_g, b.n_chews() as f64)).unzip();
    let r = pearson_oracle(&w, &n);
    assert!(r > 0.8, "correlation {r}");
}

#[test]
fn synthesis_is_deterministic_and_seeded() {
    let a = synth_generate(&small(3)).unwrap();
    let b = synth_generate(&small(3)).unwrap();
    let c = synth_generate(&small(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn disk_round_trip_is_exact() {
    let ds = synth_generate(&small(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(sorted(back), sorted(ds));
}

#[test]
fn writing_twice_gives_identical_files() {
    let ds = synth_generate(&small(1)).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(&ds, a.path()).unwrap();
    write_dataset(&ds, b.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 * ds.recordings.len());
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap());
    }
}

fn corrupt(edit: impl FnOnce(&mut Dataset)) -> (tempfile::TempDir, String) {
    let mut ds = synth_generate(&small(2)).unwrap();
    edit(&mut ds);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    (dir, err)
}

#[test]
fn inverted_chew_is_rejected_with_location() {
    let (_d, err) = corrupt(|ds| {
        let c = &mut ds.recordings[0].bouts[1].chews[0];
        std::mem::swap(&mut c.start_s, &mut c.stop_s);
    });
    assert!(err.contains("chew interval inverted"), "{err}");
    assert!(err.contains(".json"), "{err}");
}

#[test]
fn zero_weight_is_rejected() {
    let (_d, err) = corrupt(|ds| ds.recordings[1].bouts[0].weight_g = 0.0);
    assert!(err.contains("non-positive weight"), "{err}");
}

#[test]
fn annotation_past_audio_end_is_rejected() {
    let (_d, err) = corrupt(|ds| {
        let end = ds.recordings[0].duration_s();
        ds.recordings[0].bouts.last_mut().unwrap().chews.push(ChewAnnotation::new(end + 1.0, end + 1.2));
    });
    assert!(!err.is_empty());
}

#[test]
fn overlapping_chews_are_reported_by_bout() {
    let mut ds = synth_generate(&small(2)).unwrap();
    let chews = &mut ds.recordings[0].bouts[1].chews;
    chews[1].start_s = chews[0].start_s;
    let report = validate(&ds);
    let issue = report.issues.iter().find(|i| i.message == "overlapping chews").expect("overlap reported");
    assert_eq!(issue.bout, Some(1));
}

#[test]
fn single_subject_is_reported() {
    let ds = synth_generate(&SynthConfig {
        n_subjects: 1,
        ..small(0)
    })
    .unwrap();
    let report = validate(&ds);
    assert!(report.issues.iter().any(|i| i.message == "LOSO requires ≥ 2 subjects"));
}

#[test]
fn validate_lists_every_issue() {
    let mut ds = synth_generate(&small(5)).unwrap();
    ds.recordings[0].bouts[0].weight_g = -1.0;
    ds.recordings[1].bouts[1].weight_g = 0.0;
    assert_eq!(validate(&ds).issues.len(), 2);
}

#[test]
fn unchecked_load_keeps_invalid_data() {
    let mut ds = synth_generate(&small(6)).unwrap();
    ds.recordings[0].bouts[0].weight_g = 0.0;
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    assert!(load_dataset(dir.path()).is_err());
    let back = load_dataset_unchecked(dir.path()).unwrap();
    assert_eq!(validate(&back).issues.len(), 1);
}

#[test]
fn stereo_wav_is_downmixed() {
    let ds = synth_generate(&small(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    let rec = &ds.recordings[0];
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 44_100,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let path = dir.path().join(format!("{}.wav", rec.name));
    let mut w = hound::WavWriter::create(&path, spec).unwrap();
    for &s in &rec.samples {
        let q = (s * 32768.0).round() as i32;
        // Left/right differ by 2 LSB; the average is the original sample.
        w.write_sample((q + 1).min(32767) as i16).unwrap();
        w.write_sample((q - 1).max(-32768) as i16).unwrap();
    }
    w.finalize().unwrap();
    let back = sorted(load_dataset(dir.path()).unwrap());
    let got = &back.recordings.iter().find(|r| r.name == rec.name).unwrap().samples;
    let clipped = |s: f32| (s * 32768.0).round().abs() >= 32767.0;
    for (a, b) in got.iter().zip(&rec.samples) {
        if !clipped(*b) {
            assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_bouts_are_valid(seed in any::<u64>(), subjects in 2usize..4, bouts in 1usize..4) {
        let ds = synth_generate(&SynthConfig {
            n_subjects: subjects,
            bouts_per_subject_per_food: bouts,
            seed,
            ..SynthConfig::default()
        }).unwrap();
        prop_assert!(validate(&ds).is_empty());
        prop_assert_eq!(ds.n_bouts(), subjects * bouts * Food::ALL.len());
        for (_, b) in ds.bouts() {
            prop_assert!(b.weight_g > 0.0 && b.n_chews() >= 1);
        }
    }
}
