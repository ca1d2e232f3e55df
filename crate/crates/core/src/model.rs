//! Score-balanced oversampling, the regressor family and the (model, k) grid.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::FoldPlan;
use crate::exec;
use crate::matrix::Matrix;
use crate::seed;
use crate::select::{rank_features_on_rows, SelectError};

/// Tree counts searched by the default grid.
pub const FOREST_SIZES: [usize; 8] = [1, 10, 20, 30, 40, 50, 100, 200];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    DegenerateInput(usize),
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("column {0} is not finite after standardization")]
    NonFiniteFeature(usize),
    #[error("model expects {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("training diverged (non-finite parameters)")]
    Diverged,
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("grid cell {model} k={k}, fold {fold}: {source}")]
    Cell { model: String, k: usize, fold: usize, source: Box<ModelError> },
}

/// Row indices after balancing: every original row once, then duplicates.
///
/// Rows are grouped by exact score. A group of `c` rows is repeated whole
/// `max/c` times and the remaining `max mod c` copies are drawn without
/// replacement, so every score ends with `max` rows.
pub fn oversample_indices(y: &[f64], seed: u64) -> Result<Vec<usize>, ModelError> {
    if y.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(ModelError::InvalidSpec(format!("label {i} is not finite")));
        }
        // scores are integers; the key keeps exact values apart
        groups.entry(v.to_bits() as i64).or_default().push(i);
    }
    let max = groups.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = seed::rng(seed, &[seed::label("oversample")]);
    let mut out: Vec<usize> = (0..y.len()).collect();
    let mut ordered: Vec<&Vec<usize>> = groups.values().collect();
    ordered.sort_by(|a, b| y[a[0]].total_cmp(&y[b[0]]));
    for g in ordered {
        let c = g.len();
        for _ in 1..max / c {
            out.extend_from_slice(g);
        }
        let rest = max % c;
        if rest > 0 {
            let mut pick: Vec<usize> = index::sample(&mut rng, c, rest).into_iter().map(|k| g[k]).collect();
            pick.sort_unstable();
            out.extend(pick);
        }
    }
    Ok(out)
}

/// Balanced copy of `(x, y)`; see [`oversample_indices`].
pub fn oversample(x: &Matrix, y: &[f64], seed: u64) -> Result<(Matrix, Vec<f64>), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch { features: x.rows(), labels: y.len() });
    }
    let idx = oversample_indices(y, seed)?;
    Ok((x.select_rows(&idx), idx.iter().map(|&i| y[i]).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SgdSquared,
    SvrLinear,
    RandomForest,
    /// Constant training-mean predictor.
    Mean,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SgdSquared => "sgd_squared",
            ModelKind::SvrLinear => "svr_linear",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mean => "mean",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd_squared" | "sgd" => Ok(ModelKind::SgdSquared),
            "svr_linear" | "svr" => Ok(ModelKind::SvrLinear),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "mean" => Ok(ModelKind::Mean),
            _ => Err(format!("unknown model `{s}`")),
        }
    }
}

/// Model family plus every hyperparameter; fields a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorSpec {
    pub kind: ModelKind,
    /// Initial step size; epoch `e` (0-based) uses `learning_rate / sqrt(e + 1)`.
    /// Capped by the inverse curvature of the standardized data.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    /// Half-width of the insensitive band of the SVR loss.
    pub epsilon: f64,
    pub tree_count: usize,
    /// `None` grows trees until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of features tried at each split.
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::SgdSquared,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 8,
            l2: 1e-4,
            epsilon: 0.1,
            tree_count: 10,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: 1.0 / 3.0,
            seed: 0,
        }
    }
}

impl RegressorSpec {
    pub fn of(kind: ModelKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn sgd_squared() -> Self {
        Self::of(ModelKind::SgdSquared)
    }

    pub fn svr_linear() -> Self {
        Self::of(ModelKind::SvrLinear)
    }

    pub fn random_forest(tree_count: usize) -> Self {
        Self { tree_count, ..Self::of(ModelKind::RandomForest) }
    }

    pub fn mean() -> Self {
        Self::of(ModelKind::Mean)
    }

    /// SGD, linear SVR and one forest per size in [`FOREST_SIZES`].
    pub fn default_grid() -> Vec<Self> {
        let mut grid = vec![Self::sgd_squared(), Self::svr_linear()];
        grid.extend(FOREST_SIZES.iter().map(|&t| Self::random_forest(t)));
        grid
    }

    /// Sets one hyperparameter from text, e.g. `tree_count=50`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let bad = || ModelError::InvalidSpec(format!("bad value `{value}` for `{key}`"));
        let f = || value.parse::<f64>().map_err(|_| bad());
        let u = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "kind" => self.kind = value.parse().map_err(ModelError::InvalidSpec)?,
            "learning_rate" | "lr" => self.learning_rate = f()?,
            "epochs" => self.epochs = u()?,
            "batch_size" => self.batch_size = u()?,
            "l2" => self.l2 = f()?,
            "epsilon" => self.epsilon = f()?,
            "tree_count" | "trees" => self.tree_count = u()?,
            "max_depth" => self.max_depth = if value == "none" { None } else { Some(u()?) },
            "min_leaf" => self.min_leaf = u()?,
            "feature_subsample" => self.feature_subsample = f()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(ModelError::InvalidSpec(format!("unknown hyperparameter `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidSpec(m.to_string()));
        match self.kind {
            ModelKind::SgdSquared | ModelKind::SvrLinear => {
                if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
                    return bad("learning_rate must be positive");
                }
                if self.batch_size == 0 {
                    return bad("batch_size must be positive");
                }
                if !(self.l2 >= 0.0 && self.epsilon >= 0.0) {
                    return bad("l2 and epsilon must be non-negative");
                }
            }
            ModelKind::RandomForest => {
                if self.tree_count == 0 {
                    return bad("tree_count must be positive");
                }
                if self.min_leaf == 0 {
                    return bad("min_leaf must be positive");
                }
                if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
                    return bad("feature_subsample must lie in (0, 1]");
                }
            }
            ModelKind::Mean => {}
        }
        Ok(())
    }

    /// Short name used in grid tables.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::RandomForest => format!("random_forest[{}]", self.tree_count),
            k => k.as_str().to_string(),
        }
    }
}

impl fmt::Display for RegressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Regression tree over standardized features; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Params {
    Linear { weights: Vec<f64>, bias: f64 },
    Forest { trees: Vec<Tree> },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: RegressorSpec,
    /// Layout indices of the input columns, in column order.
    pub features: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub params: Params,
}

impl TrainedModel {
    /// Records which layout columns the model was trained on.
    pub fn with_features(mut self, features: Vec<usize>) -> Result<Self, ModelError> {
        if features.len() != self.means.len() {
            return Err(ModelError::DimensionMismatch { expected: self.means.len(), found: features.len() });
        }
        self.features = features;
        Ok(self)
    }

    /// Linear weights and bias in the original (unstandardized) feature space.
    pub fn raw_coefficients(&self) -> Option<(Vec<f64>, f64)> {
        match &self.params {
            Params::Linear { weights, bias } => {
                let w: Vec<f64> = weights.iter().zip(&self.scales).map(|(w, s)| w / s).collect();
                let b = bias - w.iter().zip(&self.means).map(|(w, m)| w * m).sum::<f64>();
                Some((w, b))
            }
            Params::Constant { value } => Some((vec![0.0; self.means.len()], *value)),
            Params::Forest { .. } => None,
        }
    }

    fn standardize_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.means[j]) / self.scales[j];
        }
    }

    fn predict_standardized(&self, z: &[f64]) -> f64 {
        match &self.params {
            Params::Linear { weights, bias } => bias + dot(weights, z),
            Params::Forest { trees } => trees.iter().map(|t| t.predict_row(z)).sum::<f64>() / trees.len() as f64,
            Params::Constant { value } => *value,
        }
    }

    /// Per-tree predictions for one row; empty for non-forest models.
    pub fn tree_predictions(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.means.len()];
        self.standardize_row(row, &mut z);
        match &self.params {
            Params::Forest { trees } => trees.iter().map(|t| t.predict_row(&z)).collect(),
            _ => Vec::new(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column means and population standard deviations; constant columns get 1.
fn standardization(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let scales = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (means, scales)
}

/// Fits one model on all columns of `x`.
pub fn train(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch { features: x.rows(), labels: y.len() });
    }
    if y.len() < 2 {
        return Err(ModelError::DegenerateInput(y.len()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::InvalidSpec(format!("label {i} is not finite")));
    }
    let (means, scales) = standardization(x);
    let mut z = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for (j, (v, (m, s))) in x.row(i).iter().zip(means.iter().zip(&scales)).enumerate() {
            let t = (v - m) / s;
            if !t.is_finite() {
                return Err(ModelError::NonFiniteFeature(j));
            }
            z.set(i, j, t);
        }
    }
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let params = match spec.kind {
        ModelKind::Mean => Params::Constant { value: mean_y },
        ModelKind::SgdSquared | ModelKind::SvrLinear => fit_linear(spec, &z, y, mean_y)?,
        ModelKind::RandomForest => Params::Forest { trees: fit_forest(spec, &z, y) },
    };
    Ok(TrainedModel { spec: spec.clone(), features: (0..x.cols()).collect(), means, scales, params })
}

/// Mini-batch gradient descent with L2 penalty; squared or epsilon-insensitive loss.
fn fit_linear(spec: &RegressorSpec, z: &Matrix, y: &[f64], mean_y: f64) -> Result<Params, ModelError> {
    let p = z.cols();
    let mut w = vec![0.0; p];
    let mut b = mean_y;
    let mut grad = vec![0.0; p];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut rng = seed::rng(spec.seed, &[seed::label("linear")]);
    // mini-batch curvature bound: full-batch top eigenvalue plus per-sample spread
    let curvature = top_eigenvalue(z).max(1.0) + p as f64 / spec.batch_size as f64;
    let lr0 = spec.learning_rate.min(1.0 / curvature);
    for epoch in 0..spec.epochs {
        let lr = lr0 / ((epoch + 1) as f64).sqrt();
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &i in batch {
                let row = z.row(i);
                let r = b + dot(&w, row) - y[i];
                let g = match spec.kind {
                    ModelKind::SvrLinear if r > spec.epsilon => 1.0,
                    ModelKind::SvrLinear if r < -spec.epsilon => -1.0,
                    ModelKind::SvrLinear => 0.0,
                    _ => r,
                };
                if g != 0.0 {
                    for (gj, xj) in grad.iter_mut().zip(row) {
                        *gj += g * xj;
                    }
                    grad_b += g;
                }
            }
            let m = batch.len() as f64;
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= lr * (gj / m + spec.l2 * *wj);
            }
            b -= lr * grad_b / m;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Diverged);
        }
    }
    Ok(Params::Linear { weights: w, bias: b })
}

/// Largest eigenvalue of `zᵀz / n` by power iteration.
fn top_eigenvalue(z: &Matrix) -> f64 {
    let (n, p) = (z.rows(), z.cols());
    if p == 0 || n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut u = vec![0.0; p];
        for row in z.iter_rows() {
            let s = dot(row, &v);
            for (uj, xj) in u.iter_mut().zip(row) {
                *uj += s * xj;
            }
        }
        let norm = (u.iter().map(|x| x * x).sum::<f64>()).sqrt() / n as f64;
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        let scale = 1.0 / (norm * n as f64);
        v = u.into_iter().map(|x| x * scale).collect();
        if done {
            break;
        }
    }
    lambda
}

fn fit_forest(spec: &RegressorSpec, z: &Matrix, y: &[f64]) -> Vec<Tree> {
    let n = y.len();
    exec::map_range(spec.tree_count, |t| {
        let mut rng = seed::rng(spec.seed, &[seed::label("tree"), t as u64]);
        // a single tree is fit on the data as given
        let sample: Vec<usize> =
            if spec.tree_count == 1 { (0..n).collect() } else { (0..n).map(|_| rng.random_range(0..n)).collect() };
        grow_tree(spec, z, y, sample, &mut rng)
    })
}

fn grow_tree(spec: &RegressorSpec, z: &Matrix, y: &[f64], sample: Vec<usize>, rng: &mut seed::Rng) -> Tree {
    let p = z.cols();
    let tries = ((p as f64 * spec.feature_subsample).round() as usize).clamp(1, p.max(1));
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, sample, 0usize)];
    while let Some((at, rows, depth)) = stack.pop() {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| y[i]).sum();
        let value = sum / n;
        let pure = rows.iter().all(|&i| y[i] == y[rows[0]]);
        let depth_ok = spec.max_depth.is_none_or(|d| depth < d);
        let split = if pure || !depth_ok || rows.len() < 2 * spec.min_leaf || p == 0 {
            None
        } else {
            let mut feats: Vec<usize> = index::sample(rng, p, tries).into_vec();
            feats.sort_unstable();
            best_split(z, y, &rows, &feats, spec.min_leaf, sum * sum / n)
        };
        match split {
            None => nodes[at] = Node::Leaf { value },
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| z.get(i, feature) <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[at] = Node::Split { feature, threshold, left, right: left + 1 };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

/// Split maximizing `sumL²/nL + sumR²/nR` (largest variance reduction).
fn best_split(z: &Matrix, y: &[f64], rows: &[usize], feats: &[usize], min_leaf: usize, parent: f64) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let n = rows.len();
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in feats {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (z.get(i, f), y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = 0.0;
        for cut in 1..n {
            left += pairs[cut - 1].1;
            if cut < min_leaf || n - cut < min_leaf || pairs[cut - 1].0 == pairs[cut].0 {
                continue;
            }
            let right = total - left;
            let score = left * left / cut as f64 + right * right / (n - cut) as f64;
            if best.is_none_or(|b| score > b.0) {
                best = Some((score, f, 0.5 * (pairs[cut - 1].0 + pairs[cut].0)));
            }
        }
    }
    best.filter(|b| b.0 > parent + 1e-12 * parent.abs().max(1.0)).map(|b| (b.1, b.2))
}

/// Predictions for rows whose columns match the model's features.
pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Vec<f64>, ModelError> {
    if x.is_empty() {
        return Ok(Vec::new());
    }
    if x.cols() != model.means.len() {
        return Err(ModelError::DimensionMismatch { expected: model.means.len(), found: x.cols() });
    }
    let mut z = vec![0.0; x.cols()];
    Ok(x
        .iter_rows()
        .map(|row| {
            model.standardize_row(row, &mut z);
            model.predict_standardized(&z)
        })
        .collect())
}

/// Predictions from full layout-width rows, picking the model's feature columns.
pub fn predict_layout(model: &TrainedModel, x: &Matrix) -> Result<Vec<f64>, ModelError> {
    if let Some(&j) = model.features.iter().find(|&&j| j >= x.cols()) {
        return Err(ModelError::DimensionMismatch { expected: j + 1, found: x.cols() });
    }
    predict(model, &x.select_columns(&model.features))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub spec_index: usize,
    pub model: String,
    pub k: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_spec: RegressorSpec,
    pub best_k: usize,
    pub best_rmse: f64,
    /// One row per (spec, k), spec-major in grid order.
    pub table: Vec<GridRow>,
}

impl GridResult {
    /// `model,k,rmse` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,k,rmse\n");
        for r in &self.table {
            out.push_str(&format!("{},{},{:.6}\n", r.model, r.k, r.rmse));
        }
        out
    }
}

/// Seed of one (spec, k, fold) training task.
pub fn task_seed(global: u64, spec: &RegressorSpec, k: usize, fold: usize) -> u64 {
    seed::derive(global, &[seed::label("train"), seed::label(&spec.label()), spec.seed, k as u64, fold as u64])
}

/// Seed of the oversampling of one fold's training part.
pub fn fold_seed(global: u64, fold: usize) -> u64 {
    seed::derive(global, &[seed::label("fold"), fold as u64])
}

/// Per-fold training data prepared once for every grid cell.
pub struct PreparedFold {
    pub test: Vec<usize>,
    /// Candidate features by descending F on the balanced training rows.
    pub ranking: Vec<usize>,
    /// Balanced training rows restricted to `ranking`.
    pub train_x: Matrix,
    pub train_y: Vec<f64>,
    /// Held-out rows restricted to `ranking`.
    pub test_x: Matrix,
}

/// Balances the training part of a fold and ranks `candidates` on it,
/// keeping the top `keep` columns.
pub fn prepare_fold(
    x: &Matrix,
    y: &[f64],
    train_rows: &[usize],
    test_rows: &[usize],
    candidates: &[usize],
    keep: usize,
    seed: u64,
) -> Result<PreparedFold, ModelError> {
    let local_y: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
    let rows: Vec<usize> = oversample_indices(&local_y, seed)?.into_iter().map(|i| train_rows[i]).collect();
    let ranking: Vec<usize> = if keep == 0 {
        Vec::new()
    } else {
        let mut r = rank_features_on_rows(x, y, &rows, candidates)?;
        r.truncate(keep);
        r.into_iter().map(|(j, _)| j).collect()
    };
    Ok(PreparedFold {
        test: test_rows.to_vec(),
        train_x: x.select_rows(&rows).select_columns(&ranking),
        train_y: rows.iter().map(|&i| y[i]).collect(),
        test_x: x.select_rows(test_rows).select_columns(&ranking),
        ranking,
    })
}

/// Trains on the top `k` ranked columns of a prepared fold and predicts its held-out rows.
pub fn fit_fold(spec: &RegressorSpec, fold: &PreparedFold, k: usize) -> Result<TrainedModel, ModelError> {
    let cols: Vec<usize> = (0..k).collect();
    train(spec, &fold.train_x.select_columns(&cols), &fold.train_y)?.with_features(fold.ranking[..k].to_vec())
}

fn prefix_predict(model: &TrainedModel, fold: &PreparedFold, k: usize) -> Result<Vec<f64>, ModelError> {
    let cols: Vec<usize> = (0..k).collect();
    predict(model, &fold.test_x.select_columns(&cols))
}

/// Exhaustive CV search over `grid × k_range`. Each fold is balanced and
/// F-ranked once; cells are scored by RMSE over the pooled held-out
/// predictions. Ties go to fewer features, then to the earlier spec.
/// Values of `k` above the candidate count are skipped.
pub fn grid_search(
    grid: &[RegressorSpec],
    k_range: &[usize],
    x: &Matrix,
    y: &[f64],
    plan: &FoldPlan,
    candidates: &[usize],
    seed: u64,
) -> Result<GridResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::InvalidSpec("empty grid".into()));
    }
    for s in grid {
        s.validate()?;
    }
    let mut ks: Vec<usize> = k_range.iter().copied().filter(|&k| k <= candidates.len()).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(ModelError::InvalidSpec(format!("no k in range fits {} candidate features", candidates.len())));
    }
    let keep = *ks.last().expect("non-empty");
    let folds: Vec<PreparedFold> = exec::map_range(plan.len(), |f| {
        prepare_fold(x, y, &plan.train(f), plan.test(f), candidates, keep, fold_seed(seed, f))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let tasks: Vec<(usize, usize, usize)> = (0..grid.len())
        .flat_map(|s| ks.iter().flat_map(move |&k| (0..plan.len()).map(move |f| (s, k, f))))
        .collect();
    let preds = exec::map(&tasks, |&(s, k, f)| {
        let mut spec = grid[s].clone();
        spec.seed = task_seed(seed, &grid[s], k, f);
        fit_fold(&spec, &folds[f], k)
            .and_then(|m| prefix_predict(&m, &folds[f], k))
            .map_err(|e| ModelError::Cell { model: grid[s].label(), k, fold: f, source: Box::new(e) })
    });

    let mut table = Vec::with_capacity(grid.len() * ks.len());
    let mut pooled = vec![0.0; y.len()];
    let mut it = preds.into_iter();
    for (s, spec) in grid.iter().enumerate() {
        for &k in &ks {
            for fold in &folds {
                let p = it.next().expect("one result per task")?;
                for (&i, v) in fold.test.iter().zip(p) {
                    pooled[i] = v;
                }
            }
            // folds partition the rows, so every entry of `pooled` is fresh
            let se: f64 = y.iter().zip(&pooled).map(|(a, b)| (a - b) * (a - b)).sum();
            table.push(GridRow { spec_index: s, model: spec.label(), k, rmse: (se / y.len() as f64).sqrt() });
        }
    }
    let best = table
        .iter()
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse).then(a.k.cmp(&b.k)).then(a.spec_index.cmp(&b.spec_index)))
        .expect("non-empty table");
    Ok(GridResult { best_spec: grid[best.spec_index].clone(), best_k: best.k, best_rmse: best.rmse, table })
}
