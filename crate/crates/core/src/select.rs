//! Two-step feature selection: correlation-based subset search (CFS), then
//! F-value ranking with top-k truncation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::matrix::Matrix;

pub const DEFAULT_PATIENCE: usize = 5;
pub const DEFAULT_OPEN_CAP: usize = 512;
pub const DEFAULT_MAX_K: usize = 46;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input has zero variance")]
    DegenerateInput,
    #[error("labels have zero variance")]
    DegenerateLabels,
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("empty feature subset")]
    EmptySubset,
    #[error("every feature has zero variance")]
    NoUsableFeatures,
    #[error("k = {k} exceeds the {available} available features")]
    KTooLarge { k: usize, available: usize },
    #[error("feature index {index} out of range for {cols} columns")]
    FeatureOutOfRange { index: usize, cols: usize },
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SelectError> {
    if x.len() != y.len() {
        return Err(SelectError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 || is_constant(x) || is_constant(y) {
        return Err(SelectError::DegenerateInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SelectError::DegenerateInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Centered column scaled to unit norm, or `None` when constant.
fn unit_column(x: &[f64]) -> Option<Vec<f64>> {
    if x.len() < 2 || is_constant(x) {
        return None;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let mut z: Vec<f64> = x.iter().map(|v| v - m).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    z.iter_mut().for_each(|v| *v /= norm);
    Some(z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Absolute Pearson correlations over one sample matrix. Feature-label values
/// are computed up front; feature-feature rows are computed on first use and
/// memoized. Constant features correlate 0 with everything.
pub struct CorrelationCache {
    n: usize,
    p: usize,
    // unit-norm centered columns, `n` values per feature; empty for degenerate ones
    columns: Vec<Option<Vec<f64>>>,
    label: Vec<f64>,
    rows: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl CorrelationCache {
    pub fn new(x: &Matrix, y: &[f64]) -> Result<Self, SelectError> {
        if x.rows() != y.len() {
            return Err(SelectError::LengthMismatch { left: x.rows(), right: y.len() });
        }
        if y.len() < 2 {
            return Err(SelectError::TooFewSamples { n: y.len(), min: 2 });
        }
        let n = x.rows();
        let cm = x.to_column_major();
        let columns = exec::map_range(x.cols(), |j| unit_column(&cm[j * n..(j + 1) * n]));
        let zy = unit_column(y).ok_or(SelectError::DegenerateLabels)?;
        let label = exec::map(&columns, |c| c.as_ref().map_or(0.0, |z| dot(z, &zy).abs().min(1.0)));
        Ok(Self { n, p: x.cols(), columns, label, rows: Mutex::new(HashMap::new()) })
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.p
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.columns[j].is_none()
    }

    /// |r| between feature `j` and the label.
    pub fn label_corr(&self, j: usize) -> f64 {
        self.label[j]
    }

    /// |r| between feature `i` and every feature.
    pub fn feature_row(&self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.rows.lock().expect("cache lock").get(&i) {
            return Arc::clone(r);
        }
        let row = match &self.columns[i] {
            None => vec![0.0; self.p],
            Some(zi) => {
                let mut row = exec::map(&self.columns, |c| c.as_ref().map_or(0.0, |z| dot(zi, z).abs().min(1.0)));
                row[i] = 1.0;
                row
            }
        };
        let row = Arc::new(row);
        self.rows.lock().expect("cache lock").entry(i).or_insert_with(|| Arc::clone(&row));
        row
    }

    /// |r| between two features.
    pub fn feature_corr(&self, i: usize, j: usize) -> f64 {
        self.feature_row(i)[j]
    }
}

/// Subset merit `k·r̄cf / sqrt(k + k(k−1)·r̄ff)`.
pub fn cfs_merit(subset: &[usize], cache: &CorrelationCache) -> Result<f64, SelectError> {
    if subset.is_empty() {
        return Err(SelectError::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= cache.features()) {
        return Err(SelectError::FeatureOutOfRange { index: bad, cols: cache.features() });
    }
    let sum_cf: f64 = subset.iter().map(|&j| cache.label_corr(j)).sum();
    let mut sum_ff = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        let row = cache.feature_row(i);
        sum_ff += subset[a + 1..].iter().map(|&j| row[j]).sum::<f64>();
    }
    Ok(merit_from_sums(subset.len(), sum_cf, sum_ff))
}

/// `sum_ff` runs over unordered pairs.
fn merit_from_sums(k: usize, sum_cf: f64, sum_ff: f64) -> f64 {
    let denom = (k as f64 + 2.0 * sum_ff).sqrt();
    if denom > 0.0 {
        sum_cf / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfsConfig {
    /// Consecutive expansions without a better subset before stopping.
    pub patience: usize,
    /// Bound on the open list; the weakest states are dropped first.
    pub open_cap: usize,
}

impl Default for CfsConfig {
    fn default() -> Self {
        Self { patience: DEFAULT_PATIENCE, open_cap: DEFAULT_OPEN_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfsOutcome {
    /// Ascending feature indices.
    pub subset: Vec<usize>,
    pub merit: f64,
    pub expansions: usize,
}

#[derive(Debug, Clone)]
struct State {
    merit: f64,
    seq: u64,
    subset: Vec<usize>,
    sum_cf: f64,
    sum_ff: f64,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    // max-heap: higher merit first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        self.merit.total_cmp(&other.merit).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Forward best-first search over subsets.
///
/// Each step expands the best open state by every single-feature addition.
/// The search stops once `patience` consecutive expansions fail to beat the
/// best subset seen, and returns that subset. Ties go to the lower feature
/// index (children are queued in index order).
pub fn cfs_search(cache: &CorrelationCache, cfg: &CfsConfig) -> Result<CfsOutcome, SelectError> {
    if cache.samples() < 2 {
        return Err(SelectError::TooFewSamples { n: cache.samples(), min: 2 });
    }
    let usable: Vec<usize> = (0..cache.features()).filter(|&j| !cache.is_degenerate(j)).collect();
    if usable.is_empty() {
        return Err(SelectError::NoUsableFeatures);
    }
    let cap = cfg.open_cap.max(1);
    let mut seq = 0u64;
    let mut open = BinaryHeap::new();
    open.push(State { merit: 0.0, seq, subset: Vec::new(), sum_cf: 0.0, sum_ff: 0.0 });
    let mut expanded: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut stale = 0;
    let mut expansions = 0;

    while stale < cfg.patience.max(1) {
        let Some(state) = open.pop() else { break };
        if !expanded.insert(state.subset.clone()) {
            continue;
        }
        expansions += 1;
        let rows: Vec<Arc<Vec<f64>>> = state.subset.iter().map(|&i| cache.feature_row(i)).collect();
        let k = state.subset.len() + 1;
        let mut children: Vec<(f64, usize, f64, f64)> = exec::map(&usable, |&j| {
            if state.subset.binary_search(&j).is_ok() {
                return (f64::NEG_INFINITY, j, 0.0, 0.0);
            }
            let cf = state.sum_cf + cache.label_corr(j);
            let ff = state.sum_ff + rows.iter().map(|r| r[j]).sum::<f64>();
            (merit_from_sums(k, cf, ff), j, cf, ff)
        });
        children.retain(|c| c.0 > f64::NEG_INFINITY);
        let by_merit = |a: &(f64, usize, f64, f64), b: &(f64, usize, f64, f64)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if children.len() > cap {
            children.select_nth_unstable_by(cap - 1, by_merit);
            children.truncate(cap);
        }
        children.sort_by(by_merit);

        let improved = match (children.first(), &best) {
            (Some(c), Some((m, _))) => c.0 > *m + 1e-14,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            let c = children[0];
            let mut subset = state.subset.clone();
            subset.insert(subset.partition_point(|&i| i < c.1), c.1);
            best = Some((c.0, subset));
            stale = 0;
        } else {
            stale += 1;
        }
        for (merit, j, sum_cf, sum_ff) in children {
            let mut subset = state.subset.clone();
            subset.insert(subset.partition_point(|&i| i < j), j);
            if expanded.contains(&subset) {
                continue;
            }
            seq += 1;
            open.push(State { merit, seq, subset, sum_cf, sum_ff });
        }
        if open.len() > 2 * cap {
            let mut keep = open.into_sorted_vec();
            keep.drain(..keep.len() - cap);
            open = keep.into_iter().collect();
        }
    }
    let (merit, subset) = best.ok_or(SelectError::NoUsableFeatures)?;
    Ok(CfsOutcome { subset, merit, expansions })
}

/// Univariate regression F statistic `r²/(1−r²)·(n−2)`. Constant `x` gives 0;
/// a perfect fit gives `+∞`.
pub fn f_value(x: &[f64], y: &[f64]) -> Result<f64, SelectError> {
    if x.len() != y.len() {
        return Err(SelectError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if y.len() < 3 {
        return Err(SelectError::TooFewSamples { n: y.len(), min: 3 });
    }
    if is_constant(y) {
        return Err(SelectError::DegenerateLabels);
    }
    if is_constant(x) {
        return Ok(0.0);
    }
    let r = pearson(x, y)?;
    Ok(f_from_r(r, y.len()))
}

fn f_from_r(r: f64, n: usize) -> f64 {
    let r2 = r * r;
    let rest = 1.0 - r2;
    if rest <= 4.0 * f64::EPSILON {
        f64::INFINITY
    } else {
        r2 / rest * (n as f64 - 2.0)
    }
}

fn check_indices(cols: usize, idx: &[usize]) -> Result<(), SelectError> {
    match idx.iter().find(|&&j| j >= cols) {
        Some(&index) => Err(SelectError::FeatureOutOfRange { index, cols }),
        None => Ok(()),
    }
}

/// F value of every listed column, in the given order.
pub fn f_values(x: &Matrix, y: &[f64], features: &[usize]) -> Result<Vec<f64>, SelectError> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    f_values_on_rows(x, y, &rows, features)
}

/// F values computed on the listed rows only (repeats allowed); `y` is
/// indexed like the rows of `x`.
pub fn f_values_on_rows(x: &Matrix, y: &[f64], rows: &[usize], features: &[usize]) -> Result<Vec<f64>, SelectError> {
    if x.rows() != y.len() {
        return Err(SelectError::LengthMismatch { left: x.rows(), right: y.len() });
    }
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    if ys.len() < 3 {
        return Err(SelectError::TooFewSamples { n: ys.len(), min: 3 });
    }
    if is_constant(&ys) {
        return Err(SelectError::DegenerateLabels);
    }
    check_indices(x.cols(), features)?;
    exec::map(features, |&j| {
        let col: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
        f_value(&col, &ys)
    })
    .into_iter()
    .collect()
}

/// `features` with their F values, by descending F (ties: lower index).
pub fn rank_features(x: &Matrix, y: &[f64], features: &[usize]) -> Result<Vec<(usize, f64)>, SelectError> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    rank_features_on_rows(x, y, &rows, features)
}

/// [`rank_features`] restricted to the listed rows.
pub fn rank_features_on_rows(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
) -> Result<Vec<(usize, f64)>, SelectError> {
    let f = f_values_on_rows(x, y, rows, features)?;
    let mut ranked: Vec<(usize, f64)> = features.iter().copied().zip(f).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// The `k` highest-F members of `subset`.
pub fn rank_and_truncate(x: &Matrix, y: &[f64], subset: &[usize], k: usize) -> Result<Vec<usize>, SelectError> {
    if k > subset.len() {
        return Err(SelectError::KTooLarge { k, available: subset.len() });
    }
    Ok(rank_features(x, y, subset)?.into_iter().take(k).map(|(j, _)| j).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// CFS subset, then F ranking inside it.
    TwoStep,
    /// F ranking over every feature.
    Step2Only,
}

impl std::str::FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_step" => Ok(SelectionMode::TwoStep),
            "step2_only" => Ok(SelectionMode::Step2Only),
            _ => Err(format!("unknown selection mode `{s}` (expected two_step or step2_only)")),
        }
    }
}

impl std::fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMode::TwoStep => "two_step",
            SelectionMode::Step2Only => "step2_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub mode: SelectionMode,
    pub cfs: CfsConfig,
    /// Upper bound on the number of kept features.
    pub max_k: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { mode: SelectionMode::TwoStep, cfs: CfsConfig::default(), max_k: DEFAULT_MAX_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mode: SelectionMode,
    /// Empty in step-2-only mode.
    pub cfs_subset: Vec<usize>,
    pub cfs_merit: Option<f64>,
    pub cfs_expansions: usize,
    /// Ranked candidates: the whole CFS subset, or the top `max_k` features
    /// in step-2-only mode.
    pub f_ranked: Vec<usize>,
    /// F value of each entry of `f_ranked`.
    #[serde(with = "inf_safe")]
    pub f_values: Vec<f64>,
    pub chosen_k: usize,
}

impl SelectionReport {
    /// The kept features, best first.
    pub fn selected(&self) -> &[usize] {
        &self.f_ranked[..self.chosen_k]
    }
}

/// Runs the configured selection on one sample matrix.
pub fn select(x: &Matrix, y: &[f64], cfg: &SelectConfig) -> Result<SelectionReport, SelectError> {
    match cfg.mode {
        SelectionMode::TwoStep => {
            let cache = CorrelationCache::new(x, y)?;
            let cfs = cfs_search(&cache, &cfg.cfs)?;
            let ranked = rank_features(x, y, &cfs.subset)?;
            let chosen_k = cfg.max_k.min(ranked.len());
            Ok(SelectionReport {
                mode: cfg.mode,
                cfs_merit: Some(cfs.merit),
                cfs_expansions: cfs.expansions,
                cfs_subset: cfs.subset,
                f_ranked: ranked.iter().map(|r| r.0).collect(),
                f_values: ranked.iter().map(|r| r.1).collect(),
                chosen_k,
            })
        }
        SelectionMode::Step2Only => {
            let all: Vec<usize> = (0..x.cols()).collect();
            let mut ranked = rank_features(x, y, &all)?;
            ranked.truncate(cfg.max_k);
            Ok(SelectionReport {
                mode: cfg.mode,
                cfs_subset: Vec::new(),
                cfs_merit: None,
                cfs_expansions: 0,
                chosen_k: ranked.len(),
                f_ranked: ranked.iter().map(|r| r.0).collect(),
                f_values: ranked.iter().map(|r| r.1).collect(),
            })
        }
    }
}

/// Serializes non-finite floats as the strings `inf`, `-inf` and `nan`.
pub mod inf_safe {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            if x.is_finite() {
                seq.serialize_element(&x)?;
            } else if x.is_nan() {
                seq.serialize_element("nan")?;
            } else if x > 0.0 {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element("-inf")?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Cell>::deserialize(d)?
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) => Ok(x),
                Cell::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(serde::de::Error::custom(format!("not a number: {t}"))),
                },
            })
            .collect()
    }
}
