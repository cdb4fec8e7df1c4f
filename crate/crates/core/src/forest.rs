//! Canonical correlation forests: training, voting prediction and the model
//! file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaConfig, DEFAULT_EPSILON};
use crate::data::{Dataset, FeatureGroup, Schema, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::split::Criterion;
use crate::tree::{grow_tree, GrowConfig, SplitMode, Tree};

/// Version tag written at the top of every model file.
pub const MODEL_FORMAT: &str = "ccf-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Projection bootstrap on the full training set.
    Ccf,
    /// Per-tree bagging, no projection bootstrap.
    CcfBag,
    /// Per-tree bagging with axis-aligned splits (a random forest).
    Rf,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ccf" => Ok(Mode::Ccf),
            "ccf-bag" | "ccf_bag" => Ok(Mode::CcfBag),
            "rf" => Ok(Mode::Rf),
            other => Err(format!("unknown mode '{other}' (expected ccf, ccf-bag or rf)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Ccf => "ccf",
            Mode::CcfBag => "ccf-bag",
            Mode::Rf => "rf",
        })
    }
}

/// `ceil(log2(D) + 1)`, except 2 when `D = 3`, clamped to `[1, D]`.
pub fn default_lambda(n_features: usize) -> usize {
    if n_features <= 1 {
        return 1;
    }
    if n_features == 3 {
        return 2;
    }
    let l = ((n_features as f64).log2() + 1.0).ceil() as usize;
    l.clamp(1, n_features)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig<T> {
    pub n_trees: usize,
    /// Features sampled per node; `None` picks [`default_lambda`].
    pub lambda: Option<usize>,
    pub mode: Mode,
    pub criterion: Criterion,
    /// CCA rank tolerance.
    pub epsilon: T,
    pub seed: u64,
    /// Make a leaf instead of falling back to the node data when a
    /// projection bootstrap sample is degenerate.
    pub leaf_on_degenerate: bool,
}

impl<T: Scalar> Default for ForestConfig<T> {
    fn default() -> Self {
        Self {
            n_trees: 500,
            lambda: None,
            mode: Mode::Ccf,
            criterion: Criterion::InfoGain,
            epsilon: T::lit(DEFAULT_EPSILON),
            seed: 0,
            leaf_on_degenerate: false,
        }
    }
}

impl<T: Scalar> ForestConfig<T> {
    pub fn with_trees(mut self, n: usize) -> Self {
        self.n_trees = n;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn resolve_lambda(&self, n_features: usize) -> Result<usize> {
        let lambda = self.lambda.unwrap_or_else(|| default_lambda(n_features));
        if lambda == 0 || lambda > n_features {
            return Err(Error::Config(format!(
                "lambda must lie in [1, {n_features}], got {lambda}"
            )));
        }
        Ok(lambda)
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("need at least one tree".into()));
        }
        CcaConfig::with_epsilon(self.epsilon)?;
        Ok(())
    }
}

/// A trained ensemble together with everything needed to preprocess raw
/// inputs the same way the training data was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    pub format: String,
    pub schema: Schema,
    pub groups: Vec<FeatureGroup>,
    pub standardizer: Standardizer<T>,
    /// Raw (unstandardised) range of each encoded column on the training data.
    pub feature_min: Vec<T>,
    pub feature_max: Vec<T>,
    pub config: ForestConfig<T>,
    /// Resolved features-per-node.
    pub lambda: usize,
    pub trees: Vec<Tree<T>>,
}

/// Random stream for tree `index`: independent of how many trees are grown
/// or in which order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Whether trees are grown on per-tree bootstrap samples. Otherwise every
/// tree sees the full data and uses the projection bootstrap at each node;
/// with all features sampled per node that would leave nothing random, so
/// bagging takes over.
pub fn uses_bagging(mode: Mode, lambda: usize, n_features: usize) -> bool {
    match mode {
        Mode::Ccf => lambda >= n_features,
        Mode::CcfBag | Mode::Rf => true,
    }
}

/// Training rows of tree `index` and its rng, positioned for growth.
fn tree_sample(seed: u64, index: usize, n: usize, bagging: bool) -> (Vec<usize>, ChaCha8Rng) {
    let mut rng = tree_rng(seed, index);
    let rows = if bagging {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    (rows, rng)
}

/// Trains a forest per the configured mode.
pub fn train<T: Scalar>(ds: &Dataset<T>, cfg: &ForestConfig<T>) -> Result<Forest<T>> {
    cfg.validate()?;
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let counts = ds.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        let k = counts.iter().position(|&c| c > 0).unwrap_or(0);
        let name = ds.class_names().get(k).cloned().unwrap_or_default();
        return Err(Error::SingleClass(name));
    }
    let d = ds.n_features();
    let lambda = cfg.resolve_lambda(d)?;
    let standardizer = Standardizer::fit(&ds.x)?;
    let x = standardizer.transform(&ds.x)?;
    let (feature_min, feature_max) = column_ranges(&ds.x);

    let bagging = uses_bagging(cfg.mode, lambda, d);
    let split_mode = match cfg.mode {
        Mode::Rf => SplitMode::AxisAligned,
        Mode::Ccf | Mode::CcfBag => SplitMode::Cca,
    };
    let grow = GrowConfig {
        lambda,
        projection_bootstrap: !bagging,
        criterion: cfg.criterion,
        cca: CcaConfig::with_epsilon(cfg.epsilon)?,
        split_mode,
        leaf_on_degenerate: cfg.leaf_on_degenerate,
    };
    let k = ds.n_classes();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let (rows, mut rng) = tree_sample(cfg.seed, i, n, bagging);
            grow_tree(&x, &ds.labels, k, &ds.groups, rows, &grow, &mut rng)
        })
        .collect();

    Ok(Forest {
        format: MODEL_FORMAT.to_string(),
        schema: ds.schema.clone(),
        groups: ds.groups.clone(),
        standardizer,
        feature_min,
        feature_max,
        config: *cfg,
        lambda,
        trees,
    })
}

fn column_ranges<T: Scalar>(x: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let mut lo = vec![T::infinity(); x.cols()];
    let mut hi = vec![T::neg_infinity(); x.cols()];
    for row in x.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_nan() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
    }
    for j in 0..x.cols() {
        if lo[j] > hi[j] {
            lo[j] = T::zero();
            hi[j] = T::zero();
        }
    }
    (lo, hi)
}

/// Index of the largest entry, first on ties.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> Forest<T> {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Rows (with repeats, if bagged) of the `n_rows` training set that
    /// tree `index` was grown on.
    pub fn training_rows(&self, n_rows: usize, index: usize) -> Vec<usize> {
        let bagging = uses_bagging(self.config.mode, self.lambda, self.groups.len());
        tree_sample(self.config.seed, index, n_rows, bagging).0
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn n_encoded(&self) -> usize {
        self.standardizer.n_columns()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_encoded() {
            return Err(Error::Shape(format!(
                "model expects {} encoded feature columns, input has {width}",
                self.n_encoded()
            )));
        }
        Ok(())
    }

    /// Standardises one encoded raw row.
    pub fn preprocess(&self, raw: &[T]) -> Result<Vec<T>> {
        self.check_width(raw.len())?;
        let mut z = raw.to_vec();
        self.standardizer.apply_row(&mut z);
        Ok(z)
    }

    /// Vote counts per class for one encoded raw row.
    pub fn votes(&self, raw: &[T]) -> Result<Vec<usize>> {
        let z = self.preprocess(raw)?;
        let mut v = vec![0; self.n_classes()];
        for t in &self.trees {
            v[t.route(&z)] += 1;
        }
        Ok(v)
    }

    /// Fraction of trees voting for each class.
    pub fn predict_proba(&self, raw: &[T]) -> Result<Vec<T>> {
        let l = T::from_usize_lossy(self.n_trees());
        Ok(self
            .votes(raw)?
            .into_iter()
            .map(|c| T::from_usize_lossy(c) / l)
            .collect())
    }

    /// Majority class, lowest index on ties.
    pub fn predict(&self, raw: &[T]) -> Result<usize> {
        Ok(argmax(&self.votes(raw)?))
    }

    /// Predicts one row given as CSV fields in schema feature order.
    pub fn predict_fields<S: AsRef<str>>(&self, fields: &[S]) -> Result<usize> {
        let raw: Vec<T> = self.schema.encode_features(fields)?;
        self.predict(&raw)
    }

    pub fn predict_matrix(&self, x: &Matrix<T>) -> Result<Vec<usize>> {
        self.check_width(x.cols())?;
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn predict_proba_matrix(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_width(x.cols())?;
        let rows: Vec<Vec<T>> = x
            .iter_rows()
            .map(|r| self.predict_proba(r))
            .collect::<Result<_>>()?;
        Matrix::from_rows(&rows)
    }

    /// Predicts every row of a dataset loaded with a compatible schema.
    pub fn predict_dataset(&self, ds: &Dataset<T>) -> Result<Vec<usize>> {
        self.check_compatible(ds)?;
        self.predict_matrix(&ds.x)
    }

    /// `out[t][i]` is tree `t`'s class for row `i` of `x`.
    pub fn tree_predictions(&self, x: &Matrix<T>) -> Result<Vec<Vec<usize>>> {
        self.check_width(x.cols())?;
        let z = self.standardizer.transform(x)?;
        Ok(self
            .trees
            .par_iter()
            .map(|t| z.iter_rows().map(|r| t.route(r)).collect())
            .collect())
    }

    fn check_compatible(&self, ds: &Dataset<T>) -> Result<()> {
        if ds.groups != self.groups {
            return Err(Error::Schema(
                "dataset feature layout differs from the one the model was trained on".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Model(e.to_string()))
    }

    /// Parses a model file, checking the version tag before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Model("empty model file".into()));
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            Some(other) => return Err(Error::Version(other.to_string())),
            None => return Err(Error::Model("missing format tag".into())),
        }
        let forest: Self = serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))?;
        forest.check()?;
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Internal consistency of a deserialised model.
    fn check(&self) -> Result<()> {
        let d = self.n_encoded();
        let k = self.n_classes();
        if self.trees.is_empty() {
            return Err(Error::Model("no trees".into()));
        }
        if self.standardizer.sigma.len() != d || self.feature_min.len() != d || self.feature_max.len() != d {
            return Err(Error::Model("preprocessing statistics have inconsistent widths".into()));
        }
        if self.groups.last().map(|g| g.columns.end) != Some(d) {
            return Err(Error::Model("feature groups do not cover the encoded columns".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.check_structure()
                .map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
            for node in &t.nodes {
                match node {
                    crate::tree::Node::Leaf { label, .. } if *label >= k => {
                        return Err(Error::Model(format!("tree {i}: leaf label {label} out of range")));
                    }
                    crate::tree::Node::Split { phi, .. } if phi.indices.iter().any(|&c| c >= d) => {
                        return Err(Error::Model(format!("tree {i}: projection index out of range")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
