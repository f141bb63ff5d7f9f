//! Chew-statistics baseline: 50 timing/energy features per bout, feature
//! selection, and a linear model on the selected columns.
//!
//! Per segment (whole bout, three index thirds, first 3 chews, first 5
//! chews) the features are, in order:
//!
//! 1. chew count
//! 2. segment duration, first start to last stop
//! 3. mean chew duration
//! 4. std chew duration
//! 5. mean start-to-start interval
//! 6. std start-to-start interval
//! 7. chewing-time fraction, Σ durations / segment duration
//! 8. mean per-sample signal energy over the segment's chews
//!
//! followed by total bout duration and total bout log-energy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::chewfeat::Standardizer;
use crate::dataset::{Bout, ChewAnnotation, Recording};
use crate::error::{Error, Result};
use crate::estimators::lr::{solve_least_squares, LinearModel};
use crate::estimators::TrainSet;
use crate::linalg::Matrix;
use crate::stats::{average_ranks, mean, pearson, sample_std};

pub const SEGMENT_FEATURES: usize = 8;
pub const N_SEGMENTS: usize = 6;
pub const BASELINE_DIM: usize = SEGMENT_FEATURES * N_SEGMENTS + 2;
pub const SPEARMAN_KEEP: usize = 10;
pub const STEPWISE_P_ENTER: f64 = 0.05;
pub const STEPWISE_P_REMOVE: f64 = 0.10;
pub const STEPWISE_MAX_ITER: usize = 50;

pub type BaselineFeatureVector = [f64; BASELINE_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentSpec {
    Whole,
    Third(u8),
    First(usize),
}

impl SegmentSpec {
    pub const ALL: [SegmentSpec; N_SEGMENTS] = [
        SegmentSpec::Whole,
        SegmentSpec::Third(0),
        SegmentSpec::Third(1),
        SegmentSpec::Third(2),
        SegmentSpec::First(3),
        SegmentSpec::First(5),
    ];

    /// Chew index range of this segment in an `n`-chew bout.
    pub fn range(self, n: usize) -> std::ops::Range<usize> {
        let cut = |i: usize| (i * n).div_ceil(3);
        match self {
            SegmentSpec::Whole => 0..n,
            SegmentSpec::Third(t) => cut(t as usize)..cut(t as usize + 1),
            SegmentSpec::First(m) => 0..m.min(n),
        }
    }

    pub fn label(self) -> String {
        match self {
            SegmentSpec::Whole => "whole".into(),
            SegmentSpec::Third(t) => format!("third{}", t + 1),
            SegmentSpec::First(m) => format!("first{m}"),
        }
    }
}

const SEGMENT_FEATURE_NAMES: [&str; SEGMENT_FEATURES] = [
    "count",
    "duration",
    "chew_dur_mean",
    "chew_dur_std",
    "interval_mean",
    "interval_std",
    "chewing_fraction",
    "energy_mean",
];

pub fn baseline_feature_names() -> Vec<String> {
    let mut names: Vec<String> = SegmentSpec::ALL
        .iter()
        .flat_map(|s| {
            let seg = s.label();
            SEGMENT_FEATURE_NAMES.iter().map(move |f| format!("{seg}_{f}"))
        })
        .collect();
    names.push("bout_duration".into());
    names.push("bout_log_energy".into());
    names
}

/// Sum of squared samples and sample count of one chew.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChewEnergy {
    pub sum_sq: f64,
    pub n_samples: usize,
}

pub fn chew_energies(b: &Bout, rec: &Recording) -> Vec<ChewEnergy> {
    b.chews
        .iter()
        .map(|c| {
            let s = &rec.samples[rec.chew_range(c)];
            ChewEnergy {
                sum_sq: s.iter().map(|&v| (v as f64) * (v as f64)).sum(),
                n_samples: s.len(),
            }
        })
        .collect()
}

fn segment_features(chews: &[ChewAnnotation], energy: &[ChewEnergy]) -> [f64; SEGMENT_FEATURES] {
    let (Some(first), Some(last)) = (chews.first(), chews.last()) else {
        return [0.0; SEGMENT_FEATURES];
    };
    let durations: Vec<f64> = chews.iter().map(|c| c.duration_s()).collect();
    let intervals: Vec<f64> = chews.windows(2).map(|w| w[1].start_s - w[0].start_s).collect();
    let span = last.stop_s - first.start_s;
    let fraction = if span > 0.0 {
        durations.iter().sum::<f64>() / span
    } else {
        0.0
    };
    let sum_sq: f64 = energy.iter().map(|e| e.sum_sq).sum();
    let n: usize = energy.iter().map(|e| e.n_samples).sum();
    [
        chews.len() as f64,
        span,
        mean(&durations),
        sample_std(&durations),
        mean(&intervals),
        sample_std(&intervals),
        fraction,
        if n > 0 { sum_sq / n as f64 } else { 0.0 },
    ]
}

/// Feature vector from precomputed per-chew energies; `energy` is aligned
/// with `b.chews`.
pub fn baseline_features_from_energies(b: &Bout, energy: &[ChewEnergy]) -> Result<BaselineFeatureVector> {
    if b.chews.is_empty() {
        return Err(Error::Empty("bout has no chews"));
    }
    if energy.len() != b.chews.len() {
        return Err(Error::DimensionMismatch {
            expected: b.chews.len(),
            found: energy.len(),
        });
    }
    let n = b.chews.len();
    let mut out = [0.0; BASELINE_DIM];
    for (s, seg) in SegmentSpec::ALL.iter().enumerate() {
        let r = seg.range(n);
        let f = segment_features(&b.chews[r.clone()], &energy[r]);
        out[s * SEGMENT_FEATURES..(s + 1) * SEGMENT_FEATURES].copy_from_slice(&f);
    }
    out[BASELINE_DIM - 2] = b.chews[n - 1].stop_s - b.chews[0].start_s;
    let total: f64 = energy.iter().map(|e| e.sum_sq).sum();
    out[BASELINE_DIM - 1] = total.max(f64::MIN_POSITIVE).ln();
    Ok(out)
}

pub fn baseline_features(b: &Bout, rec: &Recording) -> Result<BaselineFeatureVector> {
    baseline_features_from_energies(b, &chew_energies(b, rec))
}

/// Pearson correlation of average-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::NotEnoughData(format!(
            "Spearman needs ≥ 3 pairs, got {}",
            x.len()
        )));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectionMethod {
    Spearman,
    #[default]
    Stepwise,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::Spearman => "spearman",
            SelectionMethod::Stepwise => "stepwise",
        })
    }
}

impl FromStr for SelectionMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spearman" => Ok(Self::Spearman),
            "stepwise" => Ok(Self::Stepwise),
            _ => Err(format!("unknown selection method '{s}' (expected spearman or stepwise)")),
        }
    }
}

/// Sorted indices of the selected columns.
pub fn select_features(t: &TrainSet, method: SelectionMethod) -> Result<Vec<usize>> {
    if t.len() < 10 {
        return Err(Error::NotEnoughData(format!(
            "feature selection needs ≥ 10 rows, got {}",
            t.len()
        )));
    }
    Ok(match method {
        SelectionMethod::Spearman => spearman_top(&t.x, &t.y, SPEARMAN_KEEP),
        SelectionMethod::Stepwise => stepwise(&t.x, &t.y).selected,
    })
}

/// The `keep` columns with largest |rho|; ties go to the lower index.
pub fn spearman_top(x: &Matrix, y: &[f64], keep: usize) -> Vec<usize> {
    let ry = average_ranks(y);
    let mut scored: Vec<(usize, f64)> = (0..x.cols())
        .map(|j| {
            let col: Vec<f64> = x.iter_rows().map(|r| r[j]).collect();
            let rho = pearson(&average_ranks(&col), &ry).abs();
            (j, if rho.is_finite() { rho } else { 0.0 })
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut sel: Vec<usize> = scored.into_iter().take(keep).map(|(j, _)| j).collect();
    sel.sort_unstable();
    sel
}

/// Residual sum of squares of least squares with bias on columns `cols`.
pub fn subset_sse(x: &Matrix, y: &[f64], cols: &[usize]) -> f64 {
    if cols.is_empty() {
        let m = mean(y);
        return y.iter().map(|v| (v - m) * (v - m)).sum();
    }
    let xs = x.select_cols(cols);
    let model = solve_least_squares(&xs, y);
    xs.iter_rows()
        .zip(y)
        .map(|(r, t)| {
            let e = model.predict(r) - t;
            e * e
        })
        .sum()
}

/// p-value of the partial F test for one extra column. `sse_small` excludes
/// it, `sse_big` includes it, `p_big` counts columns of the larger model.
pub fn partial_f_pvalue(sse_small: f64, sse_big: f64, n: usize, p_big: usize) -> f64 {
    let df = n as f64 - p_big as f64 - 1.0;
    if df < 1.0 {
        return 1.0;
    }
    let gain = sse_small - sse_big;
    if !(gain > 0.0) {
        return 1.0;
    }
    if sse_big <= 0.0 {
        return 0.0;
    }
    let f = gain / (sse_big / df);
    match FisherSnedecor::new(1.0, df) {
        Ok(dist) => {
            let p = dist.sf(f);
            if p.is_nan() {
                1.0
            } else {
                p
            }
        }
        Err(_) => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseTrace {
    pub selected: Vec<usize>,
    pub iterations: usize,
    /// False when the iteration cap stopped the search.
    pub converged: bool,
}

/// Forward addition at p < 0.05 and backward removal at p > 0.10, repeated
/// until neither step changes the set.
pub fn stepwise(x: &Matrix, y: &[f64]) -> StepwiseTrace {
    let n = y.len();
    let mut sel: Vec<usize> = Vec::new();
    let mut sse = subset_sse(x, y, &sel);
    for it in 0..STEPWISE_MAX_ITER {
        let mut changed = false;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..x.cols()).filter(|j| !sel.contains(j)) {
            let mut cols = sel.clone();
            cols.push(j);
            let s = subset_sse(x, y, &cols);
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((j, s));
            }
        }
        if let Some((j, s)) = best {
            if partial_f_pvalue(sse, s, n, sel.len() + 1) < STEPWISE_P_ENTER {
                sel.push(j);
                sse = s;
                changed = true;
            }
        }
        let mut worst: Option<(usize, f64, f64)> = None;
        for (pos, _) in sel.iter().enumerate() {
            let mut cols = sel.clone();
            cols.remove(pos);
            let s = subset_sse(x, y, &cols);
            let p = partial_f_pvalue(s, sse, n, sel.len());
            if worst.is_none_or(|(_, wp, _)| p > wp) {
                worst = Some((pos, p, s));
            }
        }
        if let Some((pos, p, s)) = worst {
            if p > STEPWISE_P_REMOVE {
                sel.remove(pos);
                sse = s;
                changed = true;
            }
        }
        if !changed {
            sel.sort_unstable();
            return StepwiseTrace {
                selected: sel,
                iterations: it + 1,
                converged: true,
            };
        }
    }
    sel.sort_unstable();
    StepwiseTrace {
        selected: sel,
        iterations: STEPWISE_MAX_ITER,
        converged: false,
    }
}

/// Column selection, z-scoring and least squares on the selected columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub method: SelectionMethod,
    pub mask: Vec<usize>,
    pub standardizer: Standardizer,
    pub lr: LinearModel,
}

impl BaselineModel {
    /// Standardizes on `t`, selects columns, then fits least squares.
    pub fn fit(t: &TrainSet, method: SelectionMethod) -> Result<Self> {
        let rows: Vec<&[f64]> = t.x.iter_rows().collect();
        let standardizer = Standardizer::fit(&rows)?;
        let z: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| standardizer.apply(r))
            .collect::<Result<_>>()?;
        let z = Matrix::from_rows(&z)?;
        let zt = TrainSet {
            x: z,
            y: t.y.clone(),
            groups: t.groups.clone(),
        };
        let mask = select_features(&zt, method)?;
        let lr = solve_least_squares(&zt.x.select_cols(&mask), &t.y);
        Ok(Self {
            method,
            mask,
            standardizer,
            lr,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardizer.apply(x)?;
        let sel: Vec<f64> = self.mask.iter().map(|&j| z[j]).collect();
        Ok(self.lr.predict(&sel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Food;

    fn bout(times: &[(f64, f64)]) -> Bout {
        Bout {
            subject_id: "s01".into(),
            food: Food::Apple,
            weight_g: 5.0,
            chews: times.iter().map(|&(a, b)| ChewAnnotation::new(a, b)).collect(),
        }
    }

    fn flat(n: usize) -> Vec<ChewEnergy> {
        vec![
            ChewEnergy {
                sum_sq: 2.0,
                n_samples: 100,
            };
            n
        ]
    }

    #[test]
    fn thirds_use_ceil_boundaries() {
        assert_eq!(SegmentSpec::Third(0).range(4), 0..2);
        assert_eq!(SegmentSpec::Third(1).range(4), 2..3);
        assert_eq!(SegmentSpec::Third(2).range(4), 3..4);
        assert_eq!(SegmentSpec::Third(1).range(1), 1..1);
        assert_eq!(SegmentSpec::First(5).range(3), 0..3);
    }

    #[test]
    fn single_chew_has_length_50() {
        let b = bout(&[(0.0, 0.1)]);
        let f = baseline_features_from_energies(&b, &flat(1)).unwrap();
        assert_eq!(f.len(), 50);
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(baseline_feature_names().len(), 50);
    }

    #[test]
    fn three_chews_first3_equals_whole() {
        let b = bout(&[(0.0, 0.1), (0.2, 0.25), (0.5, 0.62)]);
        let f = baseline_features_from_energies(&b, &flat(3)).unwrap();
        assert_eq!(f[0..8], f[32..40]);
        assert_eq!(f[0..8], f[40..48]);
    }

    #[test]
    fn uniform_six_chews_equal_thirds() {
        let t: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.25, i as f64 * 0.25 + 0.125)).collect();
        let f = baseline_features_from_energies(&bout(&t), &flat(6)).unwrap();
        assert_eq!(f[8..16], f[16..24]);
        assert_eq!(f[16..24], f[24..32]);
    }

    #[test]
    fn spearman_hand_ranked_ties() {
        // ranks x: [1.5, 1.5, 3], y: [1, 3, 2]
        let rx = [1.5, 1.5, 3.0];
        let ry = [1.0, 3.0, 2.0];
        let (mx, my) = (2.0, 2.0);
        let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
        let dy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
        let oracle = num / (dx * dy);
        let rho = spearman(&[1.0, 1.0, 2.0], &[3.0, 5.0, 4.0]).unwrap();
        assert!((rho - oracle).abs() <= 1e-12);
        assert!(rho.abs() <= 1e-12);
    }

    #[test]
    fn spearman_monotone_and_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[2.0, 5.0, 7.0, 100.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[9.0, 5.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 4]).unwrap(), 0.0);
        assert!(spearman(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn pvalue_edges() {
        assert_eq!(partial_f_pvalue(1.0, 1.0, 20, 1), 1.0);
        assert_eq!(partial_f_pvalue(1.0, 0.0, 20, 1), 0.0);
        assert_eq!(partial_f_pvalue(1.0, 0.5, 2, 1), 1.0);
        // F(1, 18) = 18 has upper tail ≈ 4.8e-4.
        let p = partial_f_pvalue(2.0, 1.0, 20, 1);
        assert!(p > 1e-4 && p < 1e-3, "{p}");
    }
}
