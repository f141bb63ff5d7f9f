//! Leave-one-subject-out evaluation of every (estimator, feature set,
//! training regime) cell plus the chew-statistics baseline and a
//! training-mean reference predictor.
//!
//! Per fold and regime the pipeline is: fit the descriptor standardizer on
//! training chews, fit the codebook on standardized training descriptors,
//! z-score the timing block with training statistics, fit each estimator,
//! predict the held-out subject's bouts. Every seed is derived from the
//! master seed and the (regime, fold, cell) key, so results do not depend on
//! the thread count.

pub mod metrics;
pub mod render;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_features, BaselineFeatureVector, BaselineModel, SelectionMethod};
use crate::boutfeat::{assemble, timing_len, FeatureSetId, Regime};
use crate::chewfeat::{extract_chew_descriptor, ChewDescriptor, Standardizer};
use crate::codebook::{select_k_aic, Codebook, DEFAULT_K_MAX};
use crate::dataset::{Bout, BoutId, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{self, par_map, EstimatorKind, EstimatorModel, EstimatorSettings, HyperParams, TrainSet};
use crate::linalg::Matrix;
use crate::seed::derive_seed;
use crate::stats::mean;

pub use metrics::{mae, mape, Summary};
pub use render::{render_plot, render_tables, write_outputs, Metric, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub feature_sets: Vec<FeatureSetId>,
    pub estimators: Vec<EstimatorKind>,
    pub regimes: Vec<Regime>,
    pub include_baseline: bool,
    pub baseline_selection: SelectionMethod,
    pub seed: u64,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub estimator_settings: EstimatorSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            feature_sets: FeatureSetId::ALL.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            regimes: Regime::ALL.to_vec(),
            include_baseline: true,
            baseline_selection: SelectionMethod::Stepwise,
            seed: 0,
            k_max: DEFAULT_K_MAX,
            out: None,
            estimator_settings: EstimatorSettings::default(),
        }
    }
}

fn check_unique<T: Ord + fmt::Debug>(what: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{what} selection is empty")));
    }
    let set: BTreeSet<&T> = v.iter().collect();
    if set.len() != v.len() {
        return Err(Error::Config(format!("{what} selection has duplicates: {v:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        check_unique("feature set", &self.feature_sets)?;
        check_unique("estimator", &self.estimators)?;
        check_unique("regime", &self.regimes)?;
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be ≥ 1".into()));
        }
        Ok(())
    }

    fn uses_audio(&self) -> bool {
        self.feature_sets.iter().any(|s| s.uses_audio())
    }

    fn uses_timing(&self) -> bool {
        self.feature_sets.iter().any(|s| s.uses_timing())
    }

    /// Table rows in output order; the mean predictor comes last.
    pub fn rows(&self) -> Vec<RowId> {
        let mut rows: Vec<RowId> = self
            .estimators
            .iter()
            .flat_map(|&e| self.feature_sets.iter().map(move |&s| RowId::Model(e, s)))
            .collect();
        if self.include_baseline {
            rows.push(RowId::Baseline);
        }
        rows.push(RowId::Mean);
        rows
    }
}

/// A row of the result grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowId {
    Model(EstimatorKind, FeatureSetId),
    Baseline,
    /// Predicts the training-fold mean weight.
    Mean,
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowId::Model(e, s) => write!(f, "{e}/{s}"),
            RowId::Baseline => f.write_str("Baseline"),
            RowId::Mean => f.write_str("Mean"),
        }
    }
}

impl FromStr for RowId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Baseline" => Ok(RowId::Baseline),
            "Mean" => Ok(RowId::Mean),
            _ => {
                let (e, set) = s.split_once('/').ok_or_else(|| format!("bad row id '{s}'"))?;
                Ok(RowId::Model(e.parse()?, set.parse()?))
            }
        }
    }
}

impl Serialize for RowId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RowId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: String,
    /// [truth, prediction] in grams, aligned with the fold's test bouts.
    pub pairs: Vec<[f64; 2]>,
    pub mae: f64,
    pub mape: Option<f64>,
}

impl FoldResult {
    fn new(held_out: &str, pairs: Vec<[f64; 2]>) -> Result<Self> {
        Ok(Self {
            held_out: held_out.to_string(),
            mae: mae(&pairs)?,
            mape: mape(&pairs).ok(),
            pairs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: RowId,
    pub regime: Regime,
    pub folds: Vec<FoldResult>,
    /// Over per-bout errors pooled across folds.
    pub mae: Option<Summary>,
    pub mape: Option<Summary>,
    /// Over per-fold means.
    pub mae_by_subject: Option<Summary>,
    pub mape_by_subject: Option<Summary>,
    /// Bouts left out of MAPE for truth < 0.1 g.
    pub mape_excluded: usize,
}

impl Cell {
    pub fn from_folds(row: RowId, regime: Regime, folds: Vec<FoldResult>) -> Self {
        let pairs: Vec<[f64; 2]> = folds.iter().flat_map(|f| f.pairs.iter().copied()).collect();
        let (pct, excluded) = metrics::pct_errors(&pairs);
        let fold_mae: Vec<f64> = folds.iter().map(|f| f.mae).collect();
        let fold_mape: Vec<f64> = folds.iter().filter_map(|f| f.mape).collect();
        Self {
            row,
            regime,
            mae: Summary::of(&metrics::abs_errors(&pairs)),
            mape: Summary::of(&pct),
            mae_by_subject: Summary::of(&fold_mae),
            mape_by_subject: Summary::of(&fold_mape),
            mape_excluded: excluded,
            folds,
        }
    }

    pub fn summary(&self, metric: Metric) -> Option<Summary> {
        match metric {
            Metric::Mae => self.mae,
            Metric::Mape => self.mape,
        }
    }
}

/// Hyper-parameters and search outcome of one fitted cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub row: RowId,
    pub seed: u64,
    pub hyper_parameters: HyperParams,
    pub validation_mae: Option<f64>,
    /// Selected baseline columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Set when the cell could not be fitted in this fold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a fold learned from its training bouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldArtifacts {
    pub descriptor_standardizer: Option<Standardizer>,
    pub codebook: Option<Codebook>,
    pub timing_standardizer: Option<Standardizer>,
    pub training_mean_g: f64,
    pub models: Vec<ModelMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMeta {
    pub regime: Regime,
    pub fold: usize,
    pub held_out: String,
    pub seed: u64,
    pub train_bouts: Vec<BoutId>,
    pub test_bouts: Vec<BoutId>,
    /// Absent when the fold was skipped.
    pub artifacts: Option<FoldArtifacts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub subjects: Vec<String>,
    pub rows: Vec<RowId>,
    /// Row-major over `rows` × `config.regimes`.
    pub cells: Vec<Cell>,
    pub folds: Vec<FoldMeta>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn cell(&self, row: RowId, regime: Regime) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.regime == regime)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: PathBuf::from("report.json"),
            source: e,
        })?;
        s.push('\n');
        Ok(s)
    }
}

pub const NOTES: [&str; 5] = [
    "descriptor standardizer, codebook and timing z-scoring are fit on each fold's training bouts only",
    "mae/mape summaries: mean and sample std of per-bout errors pooled over folds; *_by_subject: over fold means",
    "MAPE excludes bouts with truth < 0.1 g",
    "baseline in the All regime is one pooled linear model over all foods",
    "validation splits inside estimator searches are random bout-level splits of the training fold",
];

/// Per-bout inputs shared by all folds.
struct Prepared<'a> {
    ids: Vec<BoutId>,
    bouts: Vec<&'a Bout>,
    /// Raw descriptors per bout; empty when no audio set is configured.
    descriptors: Vec<Vec<ChewDescriptor>>,
    /// Empty when the baseline is off.
    baseline_rows: Vec<BaselineFeatureVector>,
}

impl<'a> Prepared<'a> {
    fn new(ds: &'a Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        let (ids, bouts): (Vec<BoutId>, Vec<&Bout>) = ds.bouts().unzip();
        let descriptors = if cfg.uses_audio() {
            par_map(ids.len(), |i| {
                let rec = &ds.recordings[ids[i].recording];
                bouts[i]
                    .chews
                    .iter()
                    .map(|c| {
                        extract_chew_descriptor(&rec.chew_samples(c), rec.sample_rate_hz as f64)
                            .map_err(|e| Error::Annotation {
                                file: rec.name.clone(),
                                record: Some(ids[i].bout),
                                message: e.to_string(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let baseline_rows = if cfg.include_baseline {
            par_map(ids.len(), |i| baseline_features(bouts[i], &ds.recordings[ids[i].recording]))
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            ids,
            bouts,
            descriptors,
            baseline_rows,
        })
    }

    /// Copy restricted to the bouts at `idx`.
    fn restrict(&self, idx: &[usize]) -> Prepared<'a> {
        let pick = |v: &Vec<Vec<ChewDescriptor>>| -> Vec<Vec<ChewDescriptor>> {
            if v.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| v[i].clone()).collect()
            }
        };
        Prepared {
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            bouts: idx.iter().map(|&i| self.bouts[i]).collect(),
            descriptors: pick(&self.descriptors),
            baseline_rows: if self.baseline_rows.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.baseline_rows[i]).collect()
            },
        }
    }

    fn index_of(&self, id: BoutId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }
}

enum Fitted {
    Estimator(EstimatorModel),
    Baseline(BaselineModel),
    Mean(f64),
}

struct FoldFit {
    artifacts: FoldArtifacts,
    fitted: Vec<Option<Fitted>>,
}

/// Fold-level transforms applied to every bout before a cell sees it.
struct Transforms<'p> {
    prep: &'p Prepared<'p>,
    regime: Regime,
    desc_std: Option<&'p Standardizer>,
    codebook: Option<&'p Codebook>,
    timing_std: Option<&'p Standardizer>,
}

impl Transforms<'_> {
    fn features(&self, set: FeatureSetId, i: usize) -> Result<Vec<f64>> {
        let descriptors: Vec<ChewDescriptor> = match (set.uses_audio(), self.desc_std) {
            (true, Some(s)) => self.prep.descriptors[i]
                .iter()
                .map(|d| crate::chewfeat::apply_standardizer(s, d))
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        let mut v = assemble(set, self.prep.bouts[i], &descriptors, self.codebook, self.regime)?;
        if set.uses_timing() {
            let tl = timing_len(self.regime);
            if let Some(ts) = self.timing_std {
                let z = ts.apply(&v[..tl])?;
                v[..tl].copy_from_slice(&z);
            }
        }
        Ok(v)
    }

    fn matrix(&self, set: FeatureSetId, idx: &[usize]) -> Result<Matrix> {
        let rows = idx
            .iter()
            .map(|&i| self.features(set, i))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }
}

fn timing_rows(prep: &Prepared, idx: &[usize], regime: Regime) -> Result<Vec<Vec<f64>>> {
    idx.iter()
        .map(|&i| assemble(FeatureSetId::F1, prep.bouts[i], &[], None, regime))
        .collect()
}

fn cell_seed(fold_seed: u64, row: RowId) -> u64 {
    match row {
        RowId::Model(e, s) => derive_seed(fold_seed, &[1, e.index() as u64, s.index() as u64]),
        RowId::Baseline => derive_seed(fold_seed, &[2]),
        RowId::Mean => derive_seed(fold_seed, &[3]),
    }
}

struct FittedTransforms {
    desc_std: Option<Standardizer>,
    codebook: Option<Codebook>,
    timing_std: Option<Standardizer>,
}

impl FittedTransforms {
    fn view<'p>(&'p self, prep: &'p Prepared<'p>, regime: Regime) -> Transforms<'p> {
        Transforms {
            prep,
            regime,
            desc_std: self.desc_std.as_ref(),
            codebook: self.codebook.as_ref(),
            timing_std: self.timing_std.as_ref(),
        }
    }
}

/// Descriptor standardizer and codebook (when audio sets are configured)
/// and timing standardizer, all fit on the bouts at `train`.
fn fit_transforms(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    regime: Regime,
    train: &[usize],
    fold_seed: u64,
) -> Result<FittedTransforms> {
    let (desc_std, codebook) = if cfg.uses_audio() {
        let raw: Vec<&[f64]> = train
            .iter()
            .flat_map(|&i| prep.descriptors[i].iter().map(|d| d.as_slice()))
            .collect();
        let s = Standardizer::fit(&raw)?;
        let z = raw.iter().map(|r| s.apply(r)).collect::<Result<Vec<_>>>()?;
        let cb = select_k_aic(&Matrix::from_rows(&z)?, cfg.k_max, derive_seed(fold_seed, &[0]))?;
        (Some(s), Some(cb))
    } else {
        (None, None)
    };
    let timing_std = if cfg.uses_timing() {
        Some(Standardizer::fit(&timing_rows(prep, train, regime)?)?)
    } else {
        None
    };
    Ok(FittedTransforms {
        desc_std,
        codebook,
        timing_std,
    })
}

/// Fits every fold-level transform and cell model on the bouts at `train`.
fn fit_fold(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    regime: Regime,
    train: &[usize],
    fold_seed: u64,
) -> Result<FoldFit> {
    let y: Vec<f64> = train.iter().map(|&i| prep.bouts[i].weight_g).collect();
    let groups: Vec<String> = train.iter().map(|&i| prep.bouts[i].subject_id.clone()).collect();
    let ft = fit_transforms(prep, cfg, regime, train, fold_seed)?;
    let tf = ft.view(prep, regime);

    let rows = cfg.rows();
    let outcomes = par_map(rows.len(), |r| {
        let row = rows[r];
        let seed = cell_seed(fold_seed, row);
        let fitted: Result<Fitted> = match row {
            RowId::Model(kind, set) => tf
                .matrix(set, train)
                .and_then(|x| TrainSet::new(x, y.clone(), groups.clone()))
                .and_then(|t| estimators::fit(kind, &t, &cfg.estimator_settings, seed))
                .map(Fitted::Estimator),
            RowId::Baseline => {
                let rows: Vec<&[f64]> = train.iter().map(|&i| &prep.baseline_rows[i][..]).collect();
                Matrix::from_rows(&rows)
                    .and_then(|x| TrainSet::new(x, y.clone(), groups.clone()))
                    .and_then(|t| BaselineModel::fit(&t, cfg.baseline_selection))
                    .map(Fitted::Baseline)
            }
            RowId::Mean => Ok(Fitted::Mean(mean(&y))),
        };
        let mut meta = ModelMeta {
            row,
            seed,
            hyper_parameters: HyperParams::new(),
            validation_mae: None,
            mask: None,
            warnings: Vec::new(),
            error: None,
        };
        match &fitted {
            Ok(Fitted::Estimator(m)) => {
                meta.hyper_parameters = m.hyper_parameters.clone();
                meta.validation_mae = m.validation_mae;
                meta.warnings = m.warnings.clone();
            }
            Ok(Fitted::Baseline(b)) => meta.mask = Some(b.mask.clone()),
            Ok(Fitted::Mean(_)) => {}
            Err(e) => meta.error = Some(e.to_string()),
        }
        (meta, fitted.ok())
    });
    let (models, fitted): (Vec<ModelMeta>, Vec<Option<Fitted>>) = outcomes.into_iter().unzip();
    Ok(FoldFit {
        artifacts: FoldArtifacts {
            descriptor_standardizer: ft.desc_std,
            codebook: ft.codebook,
            timing_standardizer: ft.timing_std,
            training_mean_g: mean(&y),
            models,
        },
        fitted,
    })
}

fn predict_fold(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    regime: Regime,
    fit: &FoldFit,
    test: &[usize],
) -> Result<Vec<Option<Vec<f64>>>> {
    let a = &fit.artifacts;
    let tf = Transforms {
        prep,
        regime,
        desc_std: a.descriptor_standardizer.as_ref(),
        codebook: a.codebook.as_ref(),
        timing_std: a.timing_standardizer.as_ref(),
    };
    cfg.rows()
        .iter()
        .zip(&fit.fitted)
        .map(|(row, f)| {
            let Some(f) = f else { return Ok(None) };
            let preds = match (row, f) {
                (RowId::Model(_, set), Fitted::Estimator(m)) => test
                    .iter()
                    .map(|&i| tf.features(*set, i).and_then(|x| m.predict(&x)))
                    .collect::<Result<Vec<_>>>()?,
                (_, Fitted::Baseline(b)) => test
                    .iter()
                    .map(|&i| b.predict(&prep.baseline_rows[i]))
                    .collect::<Result<Vec<_>>>()?,
                (_, Fitted::Mean(m)) => vec![*m; test.len()],
                (_, Fitted::Estimator(_)) => unreachable!("estimator fitted for a non-model row"),
            };
            Ok(Some(preds))
        })
        .collect()
}

fn fold_seed(master: u64, regime: Regime, fold: usize) -> u64 {
    derive_seed(master, &[regime.index() as u64, fold as u64])
}

/// (train, test) indices of one fold.
fn split(prep: &Prepared, regime: Regime, held_out: &str) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, b) in prep.bouts.iter().enumerate() {
        if !regime.includes(b.food) {
            continue;
        }
        if b.subject_id == held_out {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

struct FoldOutcome {
    meta: FoldMeta,
    predictions: Vec<Option<Vec<f64>>>,
    truth: Vec<f64>,
}

fn run_fold(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    regime: Regime,
    fold: usize,
    held_out: &str,
) -> Result<FoldOutcome> {
    let (train, test) = split(prep, regime, held_out);
    let seed = fold_seed(cfg.seed, regime, fold);
    let mut meta = FoldMeta {
        regime,
        fold,
        held_out: held_out.to_string(),
        seed,
        train_bouts: train.iter().map(|&i| prep.ids[i]).collect(),
        test_bouts: test.iter().map(|&i| prep.ids[i]).collect(),
        artifacts: None,
        warnings: Vec::new(),
    };
    let truth: Vec<f64> = test.iter().map(|&i| prep.bouts[i].weight_g).collect();
    let n_rows = cfg.rows().len();
    if train.len() < 2 || test.is_empty() {
        meta.warnings.push(format!(
            "regime {regime}, held-out {held_out}: skipped ({} training, {} test bouts)",
            train.len(),
            test.len()
        ));
        return Ok(FoldOutcome {
            meta,
            predictions: vec![None; n_rows],
            truth,
        });
    }
    let fit = fit_fold(prep, cfg, regime, &train, seed)?;
    let predictions = predict_fold(prep, cfg, regime, &fit, &test)?;
    for m in &fit.artifacts.models {
        if let Some(e) = &m.error {
            meta.warnings.push(format!("regime {regime}, held-out {held_out}, {}: {e}", m.row));
        }
    }
    meta.artifacts = Some(fit.artifacts);
    Ok(FoldOutcome {
        meta,
        predictions,
        truth,
    })
}

/// Runs the configured grid on the current thread pool.
pub fn loso_run(ds: &Dataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.check()?;
    let subjects: Vec<String> = ds.subjects().into_iter().collect();
    if subjects.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "LOSO needs ≥ 2 subjects, found {}",
            subjects.len()
        )));
    }
    let prep = Prepared::new(ds, cfg)?;
    let units: Vec<(Regime, usize)> = cfg
        .regimes
        .iter()
        .flat_map(|&r| (0..subjects.len()).map(move |f| (r, f)))
        .collect();
    let outcomes = par_map(units.len(), |u| {
        let (regime, fold) = units[u];
        run_fold(&prep, cfg, regime, fold, &subjects[fold])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let rows = cfg.rows();
    let mut cells = Vec::with_capacity(rows.len() * cfg.regimes.len());
    for (r, &row) in rows.iter().enumerate() {
        for &regime in &cfg.regimes {
            let folds = outcomes
                .iter()
                .filter(|o| o.meta.regime == regime)
                .filter_map(|o| {
                    o.predictions[r].as_ref().map(|p| {
                        let pairs = o.truth.iter().zip(p).map(|(&t, &y)| [t, y]).collect();
                        FoldResult::new(&o.meta.held_out, pairs)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(Cell::from_folds(row, regime, folds));
        }
    }
    let warnings = outcomes.iter().flat_map(|o| o.meta.warnings.clone()).collect();
    let mut config = cfg.clone();
    config.dataset = None;
    config.out = None;
    Ok(EvalReport {
        config,
        subjects,
        rows,
        cells,
        folds: outcomes.into_iter().map(|o| o.meta).collect(),
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
        warnings,
    })
}

/// Runs [`loso_run`] on a dedicated pool of `jobs` threads (0 = all cores).
pub fn loso_run_with_jobs(ds: &Dataset, cfg: &ExperimentConfig, jobs: usize) -> Result<EvalReport> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| loso_run(ds, cfg))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        loso_run(ds, cfg)
    }
}

/// Leakage audit: every fold's logged artifacts must be reproducible from
/// its logged training bouts alone, and every bout must be tested exactly
/// once per regime that includes it. Returns the violations found.
pub fn audit_no_leakage(ds: &Dataset, report: &EvalReport) -> Result<Vec<String>> {
    let cfg = &report.config;
    let prep = Prepared::new(ds, cfg)?;
    let mut issues = Vec::new();
    for &regime in &cfg.regimes {
        let mut seen = vec![0usize; prep.ids.len()];
        for meta in report.folds.iter().filter(|m| m.regime == regime) {
            for id in &meta.test_bouts {
                match prep.index_of(*id) {
                    Some(i) => seen[i] += 1,
                    None => issues.push(format!("{regime}: unknown test bout {id:?}")),
                }
            }
        }
        for (i, b) in prep.bouts.iter().enumerate() {
            if regime.includes(b.food) && seen[i] != 1 {
                issues.push(format!(
                    "{regime}: bout {:?} tested {} times",
                    prep.ids[i], seen[i]
                ));
            }
        }
    }
    for meta in &report.folds {
        let tag = format!("{} fold {} ({})", meta.regime, meta.fold, meta.held_out);
        let mut train = Vec::with_capacity(meta.train_bouts.len());
        for id in &meta.train_bouts {
            match prep.index_of(*id) {
                Some(i) if prep.bouts[i].subject_id == meta.held_out => {
                    issues.push(format!("{tag}: training bout {id:?} belongs to the held-out subject"))
                }
                Some(i) => train.push(i),
                None => issues.push(format!("{tag}: unknown training bout {id:?}")),
            }
        }
        for id in &meta.test_bouts {
            if let Some(i) = prep.index_of(*id) {
                if prep.bouts[i].subject_id != meta.held_out {
                    issues.push(format!("{tag}: test bout {id:?} is not from the held-out subject"));
                }
            }
        }
        let Some(logged) = &meta.artifacts else { continue };
        let sub = prep.restrict(&train);
        let all: Vec<usize> = (0..train.len()).collect();
        let refit = fit_fold(&sub, cfg, meta.regime, &all, meta.seed)?;
        if &refit.artifacts != logged {
            issues.push(format!("{tag}: artifacts differ when refit on training bouts only"));
        }
    }
    Ok(issues)
}

/// An estimator plus the transforms it was trained behind, fit on every bout
/// of one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_set: FeatureSetId,
    pub regime: Regime,
    pub k_max: usize,
    pub seed: u64,
    pub descriptor_standardizer: Option<Standardizer>,
    pub codebook: Option<Codebook>,
    pub timing_standardizer: Option<Standardizer>,
    pub model: EstimatorModel,
    pub n_training_bouts: usize,
}

fn single_cell_config(
    set: FeatureSetId,
    kind: EstimatorKind,
    regime: Regime,
    settings: &EstimatorSettings,
    k_max: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        feature_sets: vec![set],
        estimators: vec![kind],
        regimes: vec![regime],
        include_baseline: false,
        seed,
        k_max,
        estimator_settings: settings.clone(),
        ..ExperimentConfig::default()
    }
}

fn regime_bouts(prep: &Prepared, regime: Regime) -> Vec<usize> {
    (0..prep.bouts.len())
        .filter(|&i| regime.includes(prep.bouts[i].food))
        .collect()
}

/// Trains one (estimator, feature set) model on all bouts of `regime`.
pub fn train_model(
    ds: &Dataset,
    kind: EstimatorKind,
    set: FeatureSetId,
    regime: Regime,
    settings: &EstimatorSettings,
    k_max: usize,
    seed: u64,
) -> Result<TrainedModel> {
    let cfg = single_cell_config(set, kind, regime, settings, k_max, seed);
    cfg.check()?;
    let prep = Prepared::new(ds, &cfg)?;
    let train = regime_bouts(&prep, regime);
    if train.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "regime {regime} has {} bouts; training needs ≥ 2",
            train.len()
        )));
    }
    let fit = fit_fold(&prep, &cfg, regime, &train, derive_seed(seed, &[regime.index() as u64]))?;
    let model = match fit.fitted.into_iter().next().flatten() {
        Some(Fitted::Estimator(m)) => m,
        _ => {
            let msg = fit.artifacts.models[0].error.clone().unwrap_or_default();
            return Err(Error::NotEnoughData(format!("{kind} on {set}: {msg}")));
        }
    };
    let a = fit.artifacts;
    Ok(TrainedModel {
        feature_set: set,
        regime,
        k_max,
        seed,
        descriptor_standardizer: a.descriptor_standardizer,
        codebook: a.codebook,
        timing_standardizer: a.timing_standardizer,
        model,
        n_training_bouts: train.len(),
    })
}

/// Feature rows of every bout in `regime` with transforms fit on those
/// same bouts, for offline inspection.
pub struct FeatureTable {
    pub names: Vec<String>,
    pub ids: Vec<BoutId>,
    pub rows: Vec<Vec<f64>>,
}

pub fn feature_table(
    ds: &Dataset,
    set: FeatureSetId,
    regime: Regime,
    k_max: usize,
    seed: u64,
) -> Result<FeatureTable> {
    let cfg = single_cell_config(set, EstimatorKind::Lr, regime, &EstimatorSettings::default(), k_max, seed);
    cfg.check()?;
    let prep = Prepared::new(ds, &cfg)?;
    let idx = regime_bouts(&prep, regime);
    if idx.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "regime {regime} has {} bouts; need ≥ 2",
            idx.len()
        )));
    }
    let ft = fit_transforms(&prep, &cfg, regime, &idx, derive_seed(seed, &[regime.index() as u64]))?;
    let tf = ft.view(&prep, regime);
    let k = ft.codebook.as_ref().map_or(0, |c| c.k);
    let rows = idx.iter().map(|&i| tf.features(set, i)).collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        names: crate::boutfeat::feature_names(set, k, regime),
        ids: idx.iter().map(|&i| prep.ids[i]).collect(),
        rows,
    })
}

impl FeatureTable {
    /// CSV with bout keys and ground truth ahead of the feature columns.
    pub fn to_csv(&self, ds: &Dataset) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["recording", "bout", "subject", "food", "weight_g"]
            .map(String::from)
            .to_vec();
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let rec = &ds.recordings[id.recording];
            let b = &rec.bouts[id.bout];
            let mut line = vec![
                rec.name.clone(),
                id.bout.to_string(),
                b.subject_id.clone(),
                b.food.to_string(),
                b.weight_g.to_string(),
            ];
            line.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&line)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }
}

impl TrainedModel {
    /// Predicted weight in grams of bout `bout` of `ds.recordings[recording]`.
    pub fn predict(&self, ds: &Dataset, id: BoutId) -> Result<f64> {
        let rec = &ds.recordings[id.recording];
        let bout = &rec.bouts[id.bout];
        let descriptors = bout
            .chews
            .iter()
            .map(|c| extract_chew_descriptor(&rec.chew_samples(c), rec.sample_rate_hz as f64))
            .collect::<Result<Vec<_>>>()?;
        let prep = Prepared {
            ids: vec![id],
            bouts: vec![bout],
            descriptors: vec![descriptors],
            baseline_rows: Vec::new(),
        };
        let tf = Transforms {
            prep: &prep,
            regime: self.regime,
            desc_std: self.descriptor_standardizer.as_ref(),
            codebook: self.codebook.as_ref(),
            timing_std: self.timing_standardizer.as_ref(),
        };
        self.model.predict(&tf.features(self.feature_set, 0)?)
    }
}
