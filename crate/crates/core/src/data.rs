//! Dataset ingestion: schema files, CSV parsing, 1-of-K expansion of
//! categorical features, z-score standardisation and fold construction.
//!
//! Encoded matrices store missing cells as `NaN`; [`Standardizer::apply_row`]
//! maps them to 0, i.e. to the training mean.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ordinal,
    Categorical,
    Label,
    Ignore,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ordinal" | "numeric" => Ok(Role::Ordinal),
            "categorical" => Ok(Role::Categorical),
            "label" => Ok(Role::Label),
            "ignore" => Ok(Role::Ignore),
            other => Err(format!("unknown column role '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    /// Ordinal columns: declared level order (value = level index).
    /// Categorical columns: level dictionary (declared or learned).
    /// Label column: class names.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

/// Column roles plus the level dictionaries needed to encode raw rows.
///
/// The text form is one `name: role [level,level,...]` line per column;
/// `#` starts a comment. Example:
///
/// ```text
/// sepal_length: ordinal
/// colour: categorical
/// size: ordinal small,medium,large
/// species: label
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<ColumnSpec> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, rest) = line.split_once(':').ok_or_else(|| {
                Error::Schema(format!("line {}: expected 'name: role'", lineno + 1))
            })?;
            let name = name.trim().to_string();
            let mut parts = rest.trim().splitn(2, char::is_whitespace);
            let role: Role = parts
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Schema(format!("line {}: {e}", lineno + 1)))?;
            let levels: Vec<String> = parts
                .next()
                .map(|l| {
                    l.split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            if name.is_empty() {
                return Err(Error::Schema(format!("line {}: empty column name", lineno + 1)));
            }
            if columns.iter().any(|c| c.name == name) {
                return Err(Error::Schema(format!("duplicate column '{name}'")));
            }
            columns.push(ColumnSpec { name, role, levels });
        }
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// All-ordinal schema with a trailing label column.
    pub fn numeric(feature_names: &[String], label: &str, classes: &[String]) -> Self {
        let mut columns: Vec<ColumnSpec> = feature_names
            .iter()
            .map(|n| ColumnSpec {
                name: n.clone(),
                role: Role::Ordinal,
                levels: Vec::new(),
            })
            .collect();
        columns.push(ColumnSpec {
            name: label.to_string(),
            role: Role::Label,
            levels: classes.to_vec(),
        });
        Self { columns }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let role = match c.role {
                Role::Ordinal => "ordinal",
                Role::Categorical => "categorical",
                Role::Label => "label",
                Role::Ignore => "ignore",
            };
            let _ = write!(out, "{}: {role}", c.name);
            if !c.levels.is_empty() {
                let _ = write!(out, " {}", c.levels.join(","));
            }
            out.push('\n');
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.role == Role::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        if !self.columns.iter().any(|c| matches!(c.role, Role::Ordinal | Role::Categorical)) {
            return Err(Error::Schema("no feature columns".into()));
        }
        Ok(())
    }

    pub fn label_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == Role::Label)
            .expect("validated schema has a label column")
    }

    pub fn class_names(&self) -> &[String] {
        &self.label_column().levels
    }

    pub fn n_classes(&self) -> usize {
        self.class_names().len()
    }

    /// Feature columns (ordinal or categorical) in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns
            .iter()
            .filter(|c| matches!(c.role, Role::Ordinal | Role::Categorical))
    }

    /// Logical feature groups and their encoded column ranges.
    pub fn feature_groups(&self) -> Vec<FeatureGroup> {
        let mut start = 0;
        self.feature_columns()
            .map(|c| {
                let width = match c.role {
                    Role::Categorical => c.levels.len(),
                    _ => 1,
                };
                let g = FeatureGroup {
                    name: c.name.clone(),
                    categorical: c.role == Role::Categorical,
                    columns: start..start + width,
                };
                start += width;
                g
            })
            .collect()
    }

    pub fn n_encoded(&self) -> usize {
        self.feature_groups().last().map_or(0, |g| g.columns.end)
    }

    /// Encodes the raw feature fields (schema feature order) into one encoded
    /// row. Missing cells become `NaN`; unseen categorical levels encode as
    /// all zeros over their group.
    pub fn encode_features<T: Scalar, S: AsRef<str>>(&self, fields: &[S]) -> Result<Vec<T>> {
        let specs: Vec<&ColumnSpec> = self.feature_columns().collect();
        if fields.len() != specs.len() {
            return Err(Error::Schema(format!(
                "expected {} feature values, got {}",
                specs.len(),
                fields.len()
            )));
        }
        let mut out = Vec::with_capacity(self.n_encoded());
        for (spec, field) in specs.iter().zip(fields) {
            encode_cell(spec, field.as_ref(), &mut out).map_err(|msg| Error::Schema(msg))?;
        }
        Ok(out)
    }

    /// Raw string form of one encoded row, inverse of [`Self::encode_features`]
    /// on training levels.
    pub fn decode_features<T: Scalar>(&self, row: &[T]) -> Vec<String> {
        let mut out = Vec::new();
        for (spec, g) in self.feature_columns().zip(self.feature_groups()) {
            let cells = &row[g.columns.clone()];
            if cells.iter().any(|v| v.is_nan()) {
                out.push("?".to_string());
            } else if spec.role == Role::Categorical {
                let hit = cells.iter().position(|&v| v == T::one());
                out.push(hit.map_or_else(String::new, |i| spec.levels[i].clone()));
            } else if !spec.levels.is_empty() {
                let i = cells[0].to_usize().unwrap_or(0);
                out.push(spec.levels[i].clone());
            } else {
                out.push(format!("{}", cells[0].to_f64_lossless()));
            }
        }
        out
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "?"
}

fn encode_cell<T: Scalar>(spec: &ColumnSpec, field: &str, out: &mut Vec<T>) -> std::result::Result<(), String> {
    let field = field.trim();
    match spec.role {
        Role::Ordinal => {
            if is_missing(field) {
                out.push(T::nan());
            } else if !spec.levels.is_empty() {
                let idx = spec
                    .levels
                    .iter()
                    .position(|l| l == field)
                    .ok_or_else(|| format!("'{field}' is not a declared level of '{}'", spec.name))?;
                out.push(T::from_usize_lossy(idx));
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| format!("cannot parse '{field}' as a number"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite value '{field}'"));
                }
                out.push(T::lit(v));
            }
        }
        Role::Categorical => {
            let hit = spec.levels.iter().position(|l| l == field);
            for i in 0..spec.levels.len() {
                out.push(if is_missing(field) {
                    T::nan()
                } else if Some(i) == hit {
                    T::one()
                } else {
                    T::zero()
                });
            }
        }
        Role::Label | Role::Ignore => {}
    }
    Ok(())
}

/// One logical feature and the encoded columns it occupies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub categorical: bool,
    pub columns: Range<usize>,
}

/// Encoded features plus class labels.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    /// `N x (D_r + D_b)` encoded features; `NaN` marks missing cells.
    pub x: Matrix<T>,
    /// Class index per row.
    pub labels: Vec<usize>,
    pub schema: Schema,
    pub groups: Vec<FeatureGroup>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds an all-ordinal dataset from a numeric matrix.
    pub fn from_matrix(
        x: Matrix<T>,
        labels: Vec<usize>,
        feature_names: Option<Vec<String>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                x.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::Schema(format!("label {bad} out of range")));
        }
        let names = feature_names.unwrap_or_else(|| (1..=x.cols()).map(|i| format!("x{i}")).collect());
        if names.len() != x.cols() {
            return Err(Error::Shape("feature name count".into()));
        }
        let schema = Schema::numeric(&names, "class", &class_names);
        let groups = schema.feature_groups();
        Ok(Self {
            x,
            labels,
            schema,
            groups,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    /// Number of logical features (`D_r + D_c`).
    pub fn n_features(&self) -> usize {
        self.groups.len()
    }

    pub fn n_encoded(&self) -> usize {
        self.x.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn class_names(&self) -> &[String] {
        self.schema.class_names()
    }

    /// `N x K` 1-of-K label matrix.
    pub fn indicator(&self) -> Matrix<T> {
        indicator(&self.labels, self.n_classes())
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        self.x.as_slice().iter().map(|v| v.is_nan()).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            schema: self.schema.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Replaces the feature matrix, keeping labels; all columns become
    /// ordinal features named `x1..`.
    pub fn with_numeric_features(&self, x: Matrix<T>) -> Result<Self> {
        Self::from_matrix(x, self.labels.clone(), None, self.class_names().to_vec())
    }

    /// Writes the dataset as CSV with a header row (raw, unstandardised).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self
            .schema
            .feature_columns()
            .map(|c| c.name.as_str())
            .chain(std::iter::once(self.schema.label_column().name.as_str()))
            .collect();
        out.push_str(&names.join(","));
        out.push('\n');
        let classes = self.class_names();
        for (row, &y) in self.x.iter_rows().zip(&self.labels) {
            let mut fields = self.schema.decode_features(row);
            fields.push(classes[y].clone());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn indicator<T: Scalar>(labels: &[usize], n_classes: usize) -> Matrix<T> {
    let mut y = Matrix::zeros(labels.len(), n_classes);
    for (i, &c) in labels.iter().enumerate() {
        y[(i, c)] = T::one();
    }
    y
}

/// Loads a CSV file (header row required) against `schema`.
///
/// Categorical level dictionaries and class names not declared in the schema
/// are learned in first-appearance order. Missing cells are empty or `?`.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, &path.display().to_string())
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: &Schema, origin: &str) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |row: usize, column: &str, msg: String| Error::Parse {
        path: origin.to_string(),
        row,
        column: column.to_string(),
        msg,
    };
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(0, "<header>", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let mut col_idx = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let i = *position.get(c.name.as_str()).ok_or_else(|| {
            Error::Schema(format!("{origin}: column '{}' not found in header", c.name))
        })?;
        col_idx.push(i);
    }
    if header.len() != schema.columns.len() {
        return Err(Error::Schema(format!(
            "{origin}: header has {} columns, schema declares {}",
            header.len(),
            schema.columns.len()
        )));
    }

    let records: Vec<csv::StringRecord> = rdr
        .records()
        .enumerate()
        .map(|(r, rec)| rec.map_err(|e| parse_err(r + 1, "<row>", e.to_string())))
        .collect::<Result<_>>()?;

    // learn level dictionaries that the schema leaves open
    let mut schema = schema.clone();
    for (spec, &ci) in schema.columns.iter_mut().zip(&col_idx) {
        let learn = match spec.role {
            Role::Categorical | Role::Label => spec.levels.is_empty(),
            _ => false,
        };
        if !learn {
            continue;
        }
        for rec in &records {
            if let Some(f) = rec.get(ci) {
                if !is_missing(f) && !spec.levels.iter().any(|l| l == f) {
                    spec.levels.push(f.to_string());
                }
            }
        }
    }
    if schema.n_classes() < 1 {
        return Err(Error::Schema(format!("{origin}: no class labels")));
    }

    let groups = schema.feature_groups();
    let width = schema.n_encoded();
    let mut data = Vec::with_capacity(records.len() * width);
    let mut labels = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(parse_err(
                row,
                "<row>",
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        for (spec, &ci) in schema.columns.iter().zip(&col_idx) {
            let field = rec.get(ci).unwrap_or("");
            match spec.role {
                Role::Label => {
                    if is_missing(field) {
                        return Err(parse_err(row, &spec.name, "missing class label".into()));
                    }
                    let y = spec.levels.iter().position(|l| l == field).ok_or_else(|| {
                        parse_err(row, &spec.name, format!("unknown class label '{field}'"))
                    })?;
                    labels.push(y);
                }
                Role::Ignore => {}
                _ => encode_cell(spec, field, &mut data).map_err(|m| parse_err(row, &spec.name, m))?,
            }
        }
    }
    let x = Matrix::from_vec(records.len(), width, data)?;
    Ok(Dataset {
        x,
        labels,
        schema,
        groups,
    })
}

/// Rows to predict on: encoded features, plus labels when the file has the
/// label column.
#[derive(Debug, Clone)]
pub struct FeatureTable<T> {
    pub x: Matrix<T>,
    pub labels: Option<Vec<usize>>,
}

/// Reads a CSV (header required) against a fixed, already learned schema.
///
/// Feature columns are located by name; extra columns are ignored and the
/// label column is optional. Level dictionaries are not extended, so unseen
/// categorical levels encode as zeros.
pub fn read_features<T: Scalar, R: Read>(reader: R, schema: &Schema, origin: &str) -> Result<FeatureTable<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |row: usize, column: &str, msg: String| Error::Parse {
        path: origin.to_string(),
        row,
        column: column.to_string(),
        msg,
    };
    let header = rdr
        .headers()
        .map_err(|e| parse_err(0, "<header>", e.to_string()))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let features: Vec<&ColumnSpec> = schema.feature_columns().collect();
    let idx: Vec<usize> = features
        .iter()
        .map(|c| {
            find(&c.name).ok_or_else(|| Error::Schema(format!("{origin}: column '{}' not found in header", c.name)))
        })
        .collect::<Result<_>>()?;
    let label = schema.label_column();
    let label_idx = find(&label.name);

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| parse_err(row, "<row>", e.to_string()))?;
        for (spec, &ci) in features.iter().zip(&idx) {
            encode_cell(spec, rec.get(ci).unwrap_or(""), &mut data).map_err(|m| parse_err(row, &spec.name, m))?;
        }
        if let Some(li) = label_idx {
            let field = rec.get(li).unwrap_or("");
            let y = label.levels.iter().position(|l| l == field).ok_or_else(|| {
                parse_err(row, &label.name, format!("unknown class label '{field}'"))
            })?;
            labels.push(y);
        }
        n += 1;
    }
    Ok(FeatureTable {
        x: Matrix::from_vec(n, schema.n_encoded(), data)?,
        labels: label_idx.map(|_| labels),
    })
}

pub fn load_features<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<FeatureTable<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(file, schema, &path.display().to_string())
}

/// Per-column z-score statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mu: Vec<T>,
    /// Sample standard deviation (divisor `N - 1`); 0 marks a constant column.
    pub sigma: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Fits on the observed (non-missing) cells of each column.
    pub fn fit(x: &Matrix<T>) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: x.rows(),
            });
        }
        let d = x.cols();
        let mut mu = vec![T::zero(); d];
        let mut sigma = vec![T::zero(); d];
        for j in 0..d {
            let vals: Vec<T> = (0..x.rows()).map(|i| x[(i, j)]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                continue;
            }
            let n = T::from_usize_lossy(vals.len());
            let m = vals.iter().copied().sum::<T>() / n;
            mu[j] = m;
            if vals.len() > 1 && vals.iter().any(|&v| v != vals[0]) {
                let ss: T = vals.iter().map(|&v| (v - m) * (v - m)).sum();
                sigma[j] = (ss / T::from_usize_lossy(vals.len() - 1)).sqrt();
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn n_columns(&self) -> usize {
        self.mu.len()
    }

    /// Standardises one row in place; constant columns and missing cells
    /// become 0.
    pub fn apply_row(&self, row: &mut [T]) {
        for ((v, &m), &s) in row.iter_mut().zip(&self.mu).zip(&self.sigma) {
            *v = if v.is_nan() || s == T::zero() {
                T::zero()
            } else {
                (*v - m) / s
            };
        }
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.n_columns() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} columns, input has {}",
                self.n_columns(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        Ok(out)
    }
}

pub fn fit_standardizer<T: Scalar>(ds: &Dataset<T>) -> Result<Standardizer<T>> {
    Standardizer::fit(&ds.x)
}

pub fn apply_standardizer<T: Scalar>(ds: &Dataset<T>, std: &Standardizer<T>) -> Result<Dataset<T>> {
    Ok(Dataset {
        x: std.transform(&ds.x)?,
        labels: ds.labels.clone(),
        schema: ds.schema.clone(),
        groups: ds.groups.clone(),
    })
}

/// A train/test index split. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions the rows into `folds` disjoint, near-equal test blocks.
///
/// Stratified mode deals each class round-robin over the folds so class
/// counts are balanced; classes with fewer members than folds are pooled and
/// dealt without stratification.
pub fn make_folds<T: Scalar>(ds: &Dataset<T>, folds: usize, seed: u64, stratified: bool) -> Result<Vec<Fold>> {
    fold_split(&ds.labels, ds.n_classes(), folds, seed, stratified)
}

pub fn fold_split(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<Fold>> {
    let n = labels.len();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!(
            "fold count must lie in [2, {n}], got {folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; n];
    let mut next = 0usize;
    let mut deal = |idx: &[usize], assign: &mut Vec<usize>| {
        for &i in idx {
            assign[i] = next % folds;
            next += 1;
        }
    };
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let mut pool = Vec::new();
        for (c, members) in by_class.iter_mut().enumerate() {
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            if members.len() < folds {
                log::warn!(
                    "class {c} has {} rows for {folds} folds; assigning it without stratification",
                    members.len()
                );
                pool.extend_from_slice(members);
            } else {
                deal(members, &mut assign);
            }
        }
        pool.shuffle(&mut rng);
        deal(&pool, &mut assign);
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        deal(&all, &mut assign);
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn schema(text: &str) -> Schema {
        Schema::parse(text).unwrap()
    }

    fn load(csv: &str, s: &Schema) -> Result<Dataset<f64>> {
        read_csv(csv.as_bytes(), s, "test.csv")
    }

    #[test]
    fn loads_binary_ordinal_file() {
        let s = schema("x: ordinal\ny: label\n");
        let ds = load("x,y\n1.0,a\n2.0,b\n3.5,a\n", &s).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        let y = ds.indicator();
        for i in 0..3 {
            assert_eq!(y.row(i).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn categorical_expands_to_group() {
        let s = schema("c: categorical\nx: ordinal\ny: label\n");
        let ds = load("c,x,y\na,1,p\nb,2,q\nc,3,p\na,4,q\n", &s).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_encoded(), 4);
        assert_eq!(ds.groups[0].columns, 0..3);
        assert_eq!(ds.groups[1].columns, 3..4);
        assert_eq!(ds.x.row(1), &[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(ds.schema.columns[0].levels, vec!["a", "b", "c"]);
    }

    #[test]
    fn question_mark_is_missing() {
        let s = schema("x: ordinal\nc: categorical\ny: label\n");
        let ds = load("x,c,y\n?,u,a\n2,,b\n", &s).unwrap();
        let mask = ds.missing_mask();
        assert!(mask[0]);
        assert!(!mask[1]);
        assert!(mask[3]);
    }

    #[test]
    fn bad_rows_name_row_and_column() {
        let s = schema("x: ordinal\ny: label\n");
        let err = load("x,y\n1,a\nfoo,b\n", &s).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("'x'"), "{err}");
        let err = load("x,y\n1,a\n2\n", &s).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn unknown_declared_class_is_rejected() {
        let s = schema("x: ordinal\ny: label a,b\n");
        assert!(load("x,y\n1,a\n2,c\n", &s).is_err());
        assert!(load("x,y\n1,a\n2,?\n", &s).is_err());
    }

    #[test]
    fn ordered_levels_use_their_index() {
        let s = schema("size: ordinal small,medium,large\ny: label\n");
        let ds = load("size,y\nlarge,a\nsmall,b\n", &s).unwrap();
        assert_eq!(ds.x.column(0), vec![2.0, 0.0]);
    }

    #[test]
    fn unseen_level_encodes_as_zeros() {
        let s = schema("c: categorical\ny: label\n");
        let ds = load("c,y\na,p\nb,q\n", &s).unwrap();
        let row: Vec<f64> = ds.schema.encode_features(&["zzz"]).unwrap();
        assert_eq!(row, vec![0.0, 0.0]);
    }

    #[test]
    fn schema_requires_single_label() {
        assert!(Schema::parse("x: ordinal\n").is_err());
        assert!(Schema::parse("x: ordinal\ny: label\nz: label\n").is_err());
        assert!(Schema::parse("x: bogus\ny: label\n").is_err());
        let s = schema("# comment\nx: ordinal  # trailing\ny: label a,b\n");
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn standardizer_examples() {
        let x = Matrix::from_rows(&[[1.0, 5.0, 1.0], [2.0, 5.0, f64::NAN], [3.0, 5.0, 3.0]]).unwrap();
        let st = Standardizer::fit(&x).unwrap();
        assert_abs_diff_eq!(st.mu[0], 2.0);
        assert_abs_diff_eq!(st.sigma[0], 1.0);
        assert_eq!(st.sigma[1], 0.0);
        assert_abs_diff_eq!(st.mu[2], 2.0);
        let z = st.transform(&x).unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(z.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(z[(1, 2)], 0.0);
        assert!(Standardizer::fit(&Matrix::<f64>::zeros(1, 2)).is_err());
        assert!(st.transform(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn folds_examples() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let f = fold_split(&labels, 2, 10, 1, false).unwrap();
        assert!(f.iter().all(|fold| fold.test.len() == 1 && fold.train.len() == 9));

        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let f = fold_split(&labels, 2, 10, 3, true).unwrap();
        for fold in &f {
            let ones = fold.test.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!((fold.test.len(), ones), (10, 5));
        }
        assert_eq!(f, fold_split(&labels, 2, 10, 3, true).unwrap());
        assert_ne!(f, fold_split(&labels, 2, 10, 4, true).unwrap());
        assert!(fold_split(&labels, 2, 1, 0, true).is_err());
        assert!(fold_split(&labels, 2, 101, 0, true).is_err());
    }

    #[test]
    fn tiny_classes_fall_back_to_pooling() {
        let mut labels = vec![0usize; 20];
        labels[3] = 1;
        let f = fold_split(&labels, 2, 5, 0, true).unwrap();
        let mut seen: Vec<usize> = f.iter().flat_map(|x| x.test.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
    }
}
