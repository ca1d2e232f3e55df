//! Metrics, stratified fold plans, the CV / holdout protocols and baselines.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Session, PHQ8_MAX};
use crate::exec;
use crate::features::{context_unaware_vectors, FeatureVector, WordCategoryDictionary};
use crate::matrix::{Matrix, MatrixError};
use crate::model::{
    fit_fold, fold_seed, grid_search, predict, predict_layout, prepare_fold, task_seed, train, GridResult, ModelError, ModelKind,
    RegressorSpec, TrainedModel,
};
use crate::seed;
use crate::select::{cfs_search, pearson, CorrelationCache, SelectConfig, SelectError, SelectionMode};

/// Scores at or above this count as depressed.
pub const DEPRESSION_THRESHOLD: f64 = 10.0;
pub const DEFAULT_FOLDS: usize = 10;

const OVER_OPTIMISM: &str =
    "CFS ran once on the whole train+dev pool before fold splitting; CV metrics are optimistic";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {k} samples for {k} folds, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("{} session(s) appear in both train and holdout sets, e.g. `{}`", .0.len(), .0[0])]
    Overlap(Vec<String>),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<EvalError> },
    #[error("feature table line {line}: {reason}")]
    Table { line: usize, reason: String },
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, yhat)?;
    let se: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((se / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// A metric value with a flag for inputs on which it is undefined (reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub degenerate: bool,
}

/// Pearson correlation between labels and predictions; constant inputs are flagged.
pub fn pearson_cc(y: &[f64], yhat: &[f64]) -> Result<Flagged, EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    match pearson(y, yhat) {
        Ok(r) => Ok(Flagged { value: r, degenerate: false }),
        Err(SelectError::DegenerateInput) => Ok(Flagged { value: 0.0, degenerate: true }),
        Err(e) => Err(e.into()),
    }
}

/// F1 of the depressed class after binarizing both sides at `threshold`.
pub fn f1_at_threshold(y: &[f64], yhat: &[f64], threshold: f64) -> Result<Flagged, EvalError> {
    check_lengths(y, yhat)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&a, &b) in y.iter().zip(yhat) {
        match (a >= threshold, b >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        // precision or recall is 0 or undefined
        return Ok(Flagged { value: 0.0, degenerate: tp + fp == 0 || tp + fn_ == 0 });
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    Ok(Flagged { value: 2.0 * p * r / (p + r), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub cc: Flagged,
    pub f1: Flagged,
}

impl Metrics {
    pub fn compute(y: &[f64], yhat: &[f64], threshold: f64) -> Result<Self, EvalError> {
        Ok(Self {
            rmse: rmse(y, yhat)?,
            mae: mae(y, yhat)?,
            cc: pearson_cc(y, yhat)?,
            f1: f1_at_threshold(y, yhat, threshold)?,
        })
    }
}

/// Held-out index sets, one per fold, each ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub n: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside the fold, ascending.
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let held: HashSet<usize> = self.folds[fold].iter().copied().collect();
        (0..self.n).filter(|i| !held.contains(i)).collect()
    }
}

/// `k` folds stratified on `label >= 10`. Each class is shuffled with the seed
/// and dealt round-robin; the negatives start where the positives stopped.
pub fn stratified_folds(labels: &[f64], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k == 0 || labels.len() < k {
        return Err(EvalError::TooFewSamples { n: labels.len(), k });
    }
    let mut rng = seed::rng(seed, &[seed::label("folds")]);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= DEPRESSION_THRESHOLD).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < DEPRESSION_THRESHOLD).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        folds[slot % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { folds, n: labels.len(), threshold: DEPRESSION_THRESHOLD, seed })
}

/// Sessions' ids, feature rows and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub ids: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl LabeledSet {
    pub fn new(ids: Vec<String>, x: Matrix, y: Vec<f64>) -> Result<Self, EvalError> {
        if ids.len() != x.rows() || y.len() != x.rows() {
            return Err(EvalError::LengthMismatch { left: y.len(), right: x.rows() });
        }
        Ok(Self { ids, x, y })
    }

    pub fn from_vectors(sessions: &[Session], vectors: &[FeatureVector]) -> Result<Self, EvalError> {
        let dim = vectors.first().map_or(0, FeatureVector::len);
        let x = Matrix::from_rows(&vectors.iter().map(FeatureVector::as_slice).collect::<Vec<_>>(), dim)?;
        Self::new(
            sessions.iter().map(|s| s.meta.session_id.clone()).collect(),
            x,
            sessions.iter().map(|s| f64::from(s.meta.phq8)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Comma-separated table: a `session_id,phq8,<names>` header, then one
    /// row per session. Values are written in shortest round-trip form.
    pub fn to_csv(&self, names: &[String]) -> Result<String, EvalError> {
        if names.len() != self.x.cols() {
            return Err(EvalError::LengthMismatch { left: names.len(), right: self.x.cols() });
        }
        let mut out = String::with_capacity(self.len() * self.x.cols() * 6);
        out.push_str("session_id,phq8");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{},{}", self.ids[i], self.y[i]);
            for v in self.x.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Reads a table written by [`LabeledSet::to_csv`], returning the feature names too.
    pub fn from_csv(raw: &str) -> Result<(Self, Vec<String>), EvalError> {
        let bad = |line: usize, reason: String| EvalError::Table { line, reason };
        let mut lines = raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty table".into()))?;
        let mut cols = header.split(',').map(str::trim);
        if cols.next() != Some("session_id") || cols.next() != Some("phq8") {
            return Err(bad(1, "header must start with session_id,phq8".into()));
        }
        let names: Vec<String> = cols.map(String::from).collect();
        let (mut ids, mut y, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let mut cells = line.split(',').map(str::trim);
            let id = cells.next().filter(|c| !c.is_empty()).ok_or_else(|| bad(i + 1, "missing session id".into()))?;
            let num = |c: Option<&str>| -> Result<f64, EvalError> {
                let c = c.ok_or_else(|| bad(i + 1, format!("expected {} columns", names.len() + 2)))?;
                c.parse().map_err(|_| bad(i + 1, format!("non-numeric cell `{c}`")))
            };
            y.push(num(cells.next())?);
            for _ in 0..names.len() {
                data.push(num(cells.next())?);
            }
            if cells.next().is_some() {
                return Err(bad(i + 1, format!("expected {} columns", names.len() + 2)));
            }
            ids.push(id.to_string());
        }
        let x = Matrix::new(ids.len(), names.len(), data)?;
        Ok((Self::new(ids, x, y)?, names))
    }

    /// Copy ordered by session id, so results do not depend on input order.
    pub fn sorted_by_id(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        Self {
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.x.select_rows(&order),
            y: order.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub spec: RegressorSpec,
    /// Number of F-ranked features fed to the model.
    pub k: usize,
    pub selection: SelectConfig,
    pub folds: usize,
    pub seed: u64,
    /// Clip predictions to the score range before computing metrics.
    pub clamp: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            spec: RegressorSpec::sgd_squared(),
            k: 10,
            selection: SelectConfig::default(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            clamp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Cv,
    Dev,
    Test,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Cv => "CV",
            Protocol::Dev => "Dev",
            Protocol::Test => "Test",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cv" => Ok(Protocol::Cv),
            "dev" => Ok(Protocol::Dev),
            "test" => Ok(Protocol::Test),
            _ => Err(format!("unknown protocol `{s}` (expected cv, dev or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n: usize,
    pub features: Vec<usize>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub session_id: String,
    pub label: f64,
    pub predicted: f64,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub n: usize,
    /// Pooled over all held-out predictions.
    pub metrics: Metrics,
    pub per_fold: Vec<FoldReport>,
    pub cfs_subset: Vec<usize>,
    /// Model inputs of the holdout fit; per fold lists live in `per_fold`.
    pub features: Vec<usize>,
    pub predictions: Vec<Prediction>,
    pub config: EvalConfig,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned one-row table with the RMSE / MAE / CC / F1 columns.
    pub fn table(&self) -> String {
        format_table(&[(self.protocol.as_str(), self)])
    }
}

/// Aligned table of several named reports; degenerate values carry a `*`.
pub fn format_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}", "", "RMSE", "MAE", "CC", "F1");
    let flag = |f: Flagged| format!("{:.2}{}", f.value, if f.degenerate { "*" } else { "" });
    for (name, r) in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>8.2}  {:>8}  {:>8}",
            name,
            m.rmse,
            m.mae,
            flag(m.cc),
            flag(m.f1)
        );
    }
    if rows.iter().any(|r| r.1.metrics.cc.degenerate || r.1.metrics.f1.degenerate) {
        out.push_str("* undefined for these predictions, reported as 0\n");
    }
    out
}

fn finish(yhat: &mut [f64], clamp: bool) {
    if clamp {
        yhat.iter_mut().for_each(|v| *v = v.clamp(0.0, f64::from(PHQ8_MAX)));
    }
}

/// Candidate features for the per-fold ranking: the CFS subset of the whole
/// pool, or every feature in step-2-only mode. Mean models need none.
fn candidates(data: &LabeledSet, cfg: &EvalConfig) -> Result<(Vec<usize>, Vec<usize>, Vec<String>), EvalError> {
    if cfg.spec.kind == ModelKind::Mean {
        return Ok((Vec::new(), Vec::new(), Vec::new()));
    }
    match cfg.selection.mode {
        SelectionMode::TwoStep => {
            let cache = CorrelationCache::new(&data.x, &data.y)?;
            let cfs = cfs_search(&cache, &cfg.selection.cfs)?;
            Ok((cfs.subset.clone(), cfs.subset, Vec::new()))
        }
        SelectionMode::Step2Only => Ok(((0..data.x.cols()).collect(), Vec::new(), Vec::new())),
    }
}

/// Feature count actually used for a candidate set.
fn effective_k(cfg: &EvalConfig, available: usize, warnings: &mut Vec<String>) -> usize {
    if cfg.spec.kind == ModelKind::Mean {
        return 0;
    }
    if cfg.k > available {
        warnings.push(format!("k = {} exceeds the {available} candidate features; using {available}", cfg.k));
    }
    cfg.k.min(available)
}

/// Stratified k-fold CV over train+dev vectors.
pub fn run_cv(data: &LabeledSet, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let data = data.sorted_by_id();
    let (cands, cfs_subset, warnings) = candidates(&data, cfg)?;
    cv_with_candidates(&data, cfg, cands, cfs_subset, warnings)
}

fn cv_with_candidates(
    data: &LabeledSet,
    cfg: &EvalConfig,
    cands: Vec<usize>,
    cfs_subset: Vec<usize>,
    mut warnings: Vec<String>,
) -> Result<EvalReport, EvalError> {
    if cfg.selection.mode == SelectionMode::TwoStep && cfg.spec.kind != ModelKind::Mean {
        warnings.push(OVER_OPTIMISM.to_string());
    }
    let k = effective_k(cfg, cands.len(), &mut warnings);
    let plan = stratified_folds(&data.y, cfg.folds, cfg.seed)?;
    let per_fold = exec::map_range(plan.len(), |f| -> Result<(Vec<usize>, Vec<f64>), EvalError> {
        let fold = prepare_fold(&data.x, &data.y, &plan.train(f), plan.test(f), &cands, k, fold_seed(cfg.seed, f))?;
        let mut spec = cfg.spec.clone();
        spec.seed = task_seed(cfg.seed, &cfg.spec, k, f);
        let model = fit_fold(&spec, &fold, k)?;
        let mut yhat = predict(&model, &fold.test_x)?;
        finish(&mut yhat, cfg.clamp);
        Ok((model.features, yhat))
    });

    let mut pooled = vec![0.0; data.len()];
    let mut fold_of = vec![0usize; data.len()];
    let mut folds = Vec::with_capacity(plan.len());
    for (f, res) in per_fold.into_iter().enumerate() {
        let (features, yhat) = res.map_err(|e| EvalError::Fold { fold: f, source: Box::new(e) })?;
        let test = plan.test(f);
        let y: Vec<f64> = test.iter().map(|&i| data.y[i]).collect();
        for (&i, &v) in test.iter().zip(&yhat) {
            pooled[i] = v;
            fold_of[i] = f;
        }
        folds.push(FoldReport { fold: f, n: test.len(), features, metrics: Metrics::compute(&y, &yhat, DEPRESSION_THRESHOLD)? });
    }
    let metrics = Metrics::compute(&data.y, &pooled, DEPRESSION_THRESHOLD)?;
    if metrics.cc.degenerate {
        warnings.push("pooled predictions are constant; CC reported as 0".into());
    }
    Ok(EvalReport {
        protocol: Protocol::Cv,
        n: data.len(),
        metrics,
        per_fold: folds,
        cfs_subset,
        features: Vec::new(),
        predictions: (0..data.len())
            .map(|i| Prediction {
                session_id: data.ids[i].clone(),
                label: data.y[i],
                predicted: pooled[i],
                fold: Some(fold_of[i]),
            })
            .collect(),
        config: cfg.clone(),
        warnings,
    })
}

/// Grid search and the CV report of its best cell, sharing one CFS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCv {
    pub grid: GridResult,
    pub report: EvalReport,
}

pub fn run_grid_cv(
    data: &LabeledSet,
    grid: &[RegressorSpec],
    k_range: &[usize],
    cfg: &EvalConfig,
) -> Result<GridCv, EvalError> {
    let data = data.sorted_by_id();
    let mut probe = cfg.clone();
    probe.spec = RegressorSpec::sgd_squared();
    let (cands, cfs_subset, warnings) = candidates(&data, &probe)?;
    let plan = stratified_folds(&data.y, cfg.folds, cfg.seed)?;
    let result = grid_search(grid, k_range, &data.x, &data.y, &plan, &cands, cfg.seed)?;
    let mut best = cfg.clone();
    best.spec = result.best_spec.clone();
    best.k = result.best_k;
    let report = cv_with_candidates(&data, &best, cands, cfs_subset, warnings)?;
    Ok(GridCv { grid: result, report })
}

/// A model trained on a whole set, with the selection that fed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub model: TrainedModel,
    pub cfs_subset: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Selection, balancing, F ranking and training on every session of `data`.
/// The model's features index the full layout.
pub fn fit_pipeline(data: &LabeledSet, cfg: &EvalConfig) -> Result<FittedPipeline, EvalError> {
    let data = data.sorted_by_id();
    if data.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (cands, cfs_subset, mut warnings) = candidates(&data, cfg)?;
    let k = effective_k(cfg, cands.len(), &mut warnings);
    let rows: Vec<usize> = (0..data.len()).collect();
    let fold = prepare_fold(&data.x, &data.y, &rows, &[], &cands, k, fold_seed(cfg.seed, 0))?;
    let mut spec = cfg.spec.clone();
    spec.seed = task_seed(cfg.seed, &cfg.spec, k, 0);
    let model = fit_fold(&spec, &fold, k)?;
    Ok(FittedPipeline { model, cfs_subset, warnings })
}

/// Fits the whole pipeline (CFS included) on `train` and scores `holdout` once.
/// Shared sessions are an error unless `allow_overlap` is set, in which case
/// the report is flagged as a sanity run.
pub fn run_holdout(
    train_set: &LabeledSet,
    holdout: &LabeledSet,
    cfg: &EvalConfig,
    protocol: Protocol,
    allow_overlap: bool,
) -> Result<EvalReport, EvalError> {
    let holdout = holdout.sorted_by_id();
    if holdout.is_empty() || train_set.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let seen: HashSet<&str> = train_set.ids.iter().map(String::as_str).collect();
    let shared: Vec<String> = holdout.ids.iter().filter(|id| seen.contains(id.as_str())).cloned().collect();
    let mut warnings = Vec::new();
    if !shared.is_empty() {
        if !allow_overlap {
            return Err(EvalError::Overlap(shared));
        }
        warnings.push(format!("sanity run: {} holdout session(s) also used for training", shared.len()));
    }
    if train_set.x.cols() != holdout.x.cols() {
        return Err(ModelError::DimensionMismatch { expected: train_set.x.cols(), found: holdout.x.cols() }.into());
    }
    let fitted = fit_pipeline(train_set, cfg)?;
    warnings.extend(fitted.warnings);
    let mut yhat = predict_layout(&fitted.model, &holdout.x)?;
    finish(&mut yhat, cfg.clamp);
    let metrics = Metrics::compute(&holdout.y, &yhat, DEPRESSION_THRESHOLD)?;
    if metrics.cc.degenerate {
        warnings.push("predictions are constant; CC reported as 0".into());
    }
    Ok(EvalReport {
        protocol,
        n: holdout.len(),
        metrics,
        per_fold: Vec::new(),
        cfs_subset: fitted.cfs_subset,
        features: fitted.model.features,
        predictions: holdout
            .ids
            .iter()
            .zip(&holdout.y)
            .zip(&yhat)
            .map(|((id, &label), &predicted)| Prediction { session_id: id.clone(), label, predicted, fold: None })
            .collect(),
        config: cfg.clone(),
        warnings,
    })
}

/// Constant predictor at the mean training score.
pub fn baseline_mean(y_train: &[f64]) -> Result<TrainedModel, EvalError> {
    if y_train.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let x = Matrix::zeros(y_train.len(), 0);
    if y_train.len() == 1 {
        let mut m = train(&RegressorSpec::mean(), &Matrix::zeros(2, 0), &[y_train[0]; 2])?;
        m.spec = RegressorSpec::mean();
        return Ok(m);
    }
    Ok(train(&RegressorSpec::mean(), &x, y_train)?)
}

/// Same CV protocol on whole-interview (391-dim) vectors.
pub fn baseline_context_unaware(
    sessions: &[Session],
    words: &WordCategoryDictionary,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    run_cv(&context_unaware_set(sessions, words)?, cfg)
}

pub fn context_unaware_set(sessions: &[Session], words: &WordCategoryDictionary) -> Result<LabeledSet, EvalError> {
    LabeledSet::from_vectors(sessions, &context_unaware_vectors(sessions, words))
}
