//! Cross-validation, agreement metrics, the Wilcoxon signed-rank test and the
//! ensemble-size study.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{fold_split, Dataset};
use crate::error::{Error, Result};
use crate::forest::{argmax, train, ForestConfig, Mode};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    /// Train on one fold and test on the rest.
    pub inverted: bool,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            repeats: 1,
            inverted: false,
            stratified: true,
            seed: 0,
        }
    }
}

/// Seed for the fold assignment of one repeat.
fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add((repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Seed for the model trained on one fold.
pub fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    repeat_seed(seed, repeat) ^ ((fold as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub mode: String,
    pub n_trees: usize,
    pub error_pct: f64,
    pub kappa: f64,
    pub train_seconds: f64,
    /// Test row indices and the predictions made for them.
    pub test: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cv: CvConfig,
    pub results: Vec<FoldResult>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

impl EvalReport {
    pub fn errors(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.error_pct).collect()
    }

    /// Mean and sample standard deviation of the per-fold error (%).
    pub fn error_summary(&self) -> (f64, f64) {
        mean_std(&self.errors())
    }

    pub fn mean_error(&self) -> f64 {
        self.error_summary().0
    }

    pub fn mean_kappa(&self) -> f64 {
        mean_std(&self.results.iter().map(|r| r.kappa).collect::<Vec<_>>()).0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,fold,mode,n_trees,error_pct,kappa,train_seconds\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.3}",
                r.repeat, r.fold, r.mode, r.n_trees, r.error_pct, r.kappa, r.train_seconds
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let (m, s) = self.error_summary();
        let mode = self.results.first().map(|r| r.mode.as_str()).unwrap_or("-");
        format!(
            "{mode}: error {m:.2} ± {s:.2} % over {} folds, kappa {:.4}",
            self.results.len(),
            self.mean_kappa()
        )
    }
}

pub fn error_pct(pred: &[usize], truth: &[usize]) -> f64 {
    let wrong = pred.iter().zip(truth).filter(|(p, t)| p != t).count();
    100.0 * wrong as f64 / truth.len().max(1) as f64
}

/// Chance-corrected agreement; 1 when both observed and chance agreement are
/// perfect.
pub fn cohen_kappa(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "kappa inputs differ in length");
    let n = truth.len();
    if n == 0 {
        return f64::NAN;
    }
    let k = pred.iter().chain(truth).copied().max().unwrap_or(0) + 1;
    let (mut mp, mut mt) = (vec![0usize; k], vec![0usize; k]);
    let mut agree = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        mp[p] += 1;
        mt[t] += 1;
        agree += usize::from(p == t);
    }
    let nf = n as f64;
    let po = agree as f64 / nf;
    let pe = mp.iter().zip(&mt).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() / (nf * nf);
    if pe >= 1.0 {
        return if po >= 1.0 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

/// Runs `fit_predict(train, test)` over every fold of every repeat.
///
/// The closure sees only the training rows of its fold, so any statistics it
/// fits cannot leak test information.
pub fn cross_validate_with<T, F>(
    ds: &Dataset<T>,
    cv: &CvConfig,
    label: &str,
    n_trees: usize,
    mut fit_predict: F,
) -> Result<EvalReport>
where
    T: Scalar,
    F: FnMut(usize, usize, &Dataset<T>, &Dataset<T>) -> Result<Vec<usize>>,
{
    if cv.repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let mut results = Vec::with_capacity(cv.folds * cv.repeats);
    for r in 0..cv.repeats {
        let folds = fold_split(&ds.labels, ds.n_classes(), cv.folds, repeat_seed(cv.seed, r), cv.stratified)?;
        for (f, fold) in folds.into_iter().enumerate() {
            let (tr, te) = if cv.inverted {
                (fold.test, fold.train)
            } else {
                (fold.train, fold.test)
            };
            let (train_ds, test_ds) = (ds.subset(&tr), ds.subset(&te));
            let start = Instant::now();
            let pred = fit_predict(r, f, &train_ds, &test_ds).map_err(|e| Error::Fold {
                repeat: r,
                fold: f,
                source: Box::new(e),
            })?;
            let secs = start.elapsed().as_secs_f64();
            results.push(FoldResult {
                repeat: r,
                fold: f,
                mode: label.to_string(),
                n_trees,
                error_pct: error_pct(&pred, &test_ds.labels),
                kappa: cohen_kappa(&pred, &test_ds.labels),
                train_seconds: secs,
                test: te,
                predictions: pred,
            });
        }
    }
    Ok(EvalReport { cv: *cv, results })
}

/// Cross-validates a forest configuration; each fold's model is trained with
/// seed [`fold_seed`] and refits its own standardiser.
pub fn cross_validate<T: Scalar>(ds: &Dataset<T>, cfg: &ForestConfig<T>, cv: &CvConfig) -> Result<EvalReport> {
    let label = cfg.mode.to_string();
    cross_validate_with(ds, cv, &label, cfg.n_trees, |r, f, train_ds, test_ds| {
        let fold_cfg = cfg.with_seed(fold_seed(cfg.seed, r, f));
        train(train_ds, &fold_cfg)?.predict_dataset(test_ds)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences.
    pub n: usize,
    /// Sum of ranks of positive differences `a - b`.
    pub w_plus: f64,
    pub p_two_sided: f64,
    /// `P(W+ >= observed)`: evidence that `a` tends to exceed `b`.
    pub p_greater: f64,
    /// `P(W+ <= observed)`.
    pub p_less: f64,
    pub exact: bool,
}

/// Largest `n` for which the exact null distribution is enumerated.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Paired Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped, tied magnitudes get average ranks. Uses the
/// exact permutation distribution up to [`WILCOXON_EXACT_MAX`] pairs and a
/// tie-corrected normal approximation with continuity correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wilcoxon input"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let exact = diffs.len() <= WILCOXON_EXACT_MAX;
    wilcoxon_from_diffs(&diffs, exact)
}

/// Same as [`wilcoxon_signed_rank`] on precomputed non-zero differences, with
/// the method forced.
pub fn wilcoxon_from_diffs(diffs: &[f64], exact: bool) -> Result<WilcoxonResult> {
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            p_two_sided: 1.0,
            p_greater: 1.0,
            p_less: 1.0,
            exact: true,
        });
    }
    // doubled average ranks are integers
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 share (i+1 + j+1)/2
        let r2 = (i + j + 2) as u64;
        for &o in &order[i..=j] {
            rank2[o] = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: u64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank2[i]).sum();
    let w_plus = w2 as f64 / 2.0;

    let (p_greater, p_less) = if exact {
        let total: u64 = rank2.iter().sum();
        let mut dist = vec![0f64; total as usize + 1];
        dist[0] = 1.0;
        for &r in &rank2 {
            for s in (r as usize..dist.len()).rev() {
                dist[s] += dist[s - r as usize];
            }
        }
        let all = 2f64.powi(n as i32);
        let ge: f64 = dist[w2 as usize..].iter().sum();
        let le: f64 = dist[..=w2 as usize].iter().sum();
        (ge / all, le / all)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            (1.0, 1.0)
        } else {
            let sd = var.sqrt();
            let z = Normal::new(0.0, 1.0).expect("standard normal");
            (
                z.sf((w_plus - mean - 0.5) / sd),
                z.cdf((w_plus - mean + 0.5) / sd),
            )
        }
    };
    let p_greater = p_greater.min(1.0);
    let p_less = p_less.min(1.0);
    Ok(WilcoxonResult {
        n,
        w_plus,
        p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
        p_greater,
        p_less,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_trees: usize,
    /// Mean per-fold error (%) of the first `n_trees` CCF trees.
    pub ccf_error: f64,
    /// Same for the first `n_trees` RF trees; NaN beyond the RF size.
    pub rf_error: f64,
    /// Error of the full-size RF.
    pub rf_full_error: f64,
}

impl SweepRow {
    /// CCF over RF misclassification ratio at equal ensemble size.
    pub fn ratio_same_size(&self) -> f64 {
        self.ccf_error / self.rf_error
    }

    /// CCF over full-size RF misclassification ratio.
    pub fn ratio_vs_full(&self) -> f64 {
        self.ccf_error / self.rf_full_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub rf_trees: usize,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_trees,ccf_error_pct,rf_error_pct,rf_full_error_pct,ratio_same_size,ratio_vs_full\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n_trees,
                r.ccf_error,
                r.rf_error,
                r.rf_full_error,
                r.ratio_same_size(),
                r.ratio_vs_full()
            );
        }
        out
    }
}

/// Error of the first `size` trees' majority vote, for each size.
pub fn prefix_errors(tree_preds: &[Vec<usize>], truth: &[usize], n_classes: usize, sizes: &[usize]) -> Vec<f64> {
    let mut sorted: Vec<(usize, usize)> = sizes.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
    sorted.sort_unstable();
    let mut out = vec![f64::NAN; sizes.len()];
    let mut votes = vec![vec![0usize; n_classes]; truth.len()];
    let mut used = 0;
    for (size, slot) in sorted {
        if size == 0 || size > tree_preds.len() {
            continue;
        }
        for preds in &tree_preds[used..size] {
            for (v, &p) in votes.iter_mut().zip(preds) {
                v[p] += 1;
            }
        }
        used = size;
        let pred: Vec<usize> = votes.iter().map(|v| argmax(v)).collect();
        out[slot] = error_pct(&pred, truth);
    }
    out
}

/// Ensemble-size study: per fold, one CCF of `max(sizes)` trees and one RF of
/// `rf_trees` trees are trained, and smaller ensembles are read off as
/// prefixes of their tree lists.
pub fn ensemble_size_sweep<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &ForestConfig<T>,
    sizes: &[usize],
    rf_trees: usize,
    cv: &CvConfig,
) -> Result<SweepReport> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    if max == 0 || sizes.contains(&0) {
        return Err(Error::Config("ensemble sizes must be positive".into()));
    }
    if rf_trees == 0 {
        return Err(Error::Config("rf size must be positive".into()));
    }
    let k = ds.n_classes();
    let mut ccf = Vec::new();
    let mut rf = Vec::new();
    let mut rf_full = Vec::new();
    let ccf_cfg = cfg.with_trees(max);
    let rf_cfg = cfg.with_trees(rf_trees).with_mode(Mode::Rf);
    cross_validate_with(ds, cv, "sweep", max, |r, f, train_ds, test_ds| {
        let seed = fold_seed(cfg.seed, r, f);
        let x = &test_ds.x;
        let forest = train(train_ds, &ccf_cfg.with_seed(seed))?;
        let preds = forest.tree_predictions(x)?;
        ccf.push(prefix_errors(&preds, &test_ds.labels, k, sizes));
        let forest = train(train_ds, &rf_cfg.with_seed(seed))?;
        let preds = forest.tree_predictions(x)?;
        rf.push(prefix_errors(&preds, &test_ds.labels, k, sizes));
        rf_full.push(prefix_errors(&preds, &test_ds.labels, k, &[rf_trees])[0]);
        Ok(vec![0; test_ds.n_rows()])
    })?;
    let column_mean = |runs: &[Vec<f64>], i: usize| mean_std(&runs.iter().map(|r| r[i]).collect::<Vec<_>>()).0;
    let rf_full_error = mean_std(&rf_full).0;
    let rows = sizes
        .iter()
        .enumerate()
        .map(|(i, &n_trees)| SweepRow {
            n_trees,
            ccf_error: column_mean(&ccf, i),
            rf_error: column_mean(&rf, i),
            rf_full_error,
        })
        .collect();
    Ok(SweepReport { rows, rf_trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kappa_examples() {
        assert_eq!(cohen_kappa(&[0, 1, 2, 1], &[0, 1, 2, 1]), 1.0);
        assert_abs_diff_eq!(cohen_kappa(&[1, 1, 0, 0], &[0, 0, 1, 1]), -1.0);
        assert_abs_diff_eq!(cohen_kappa(&[0, 0, 1, 1], &[0, 1, 0, 1]), 0.0);
        assert_eq!(cohen_kappa(&[2, 2, 2], &[2, 2, 2]), 1.0);
    }

    #[test]
    fn wilcoxon_examples() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).unwrap();
        assert!(r.exact);
        assert_abs_diff_eq!(r.p_greater, 1.0 / 64.0);
        assert_abs_diff_eq!(r.p_two_sided, 2.0 / 64.0);
        let r = wilcoxon_signed_rank(&[1.0, -1.0, 2.0, -2.0], &[0.0; 4]).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        let r = wilcoxon_signed_rank(&[3.0; 7], &[3.0; 7]).unwrap();
        assert_eq!((r.n, r.p_two_sided), (0, 1.0));
        assert!(wilcoxon_signed_rank(&[1.0], &[]).is_err());
    }

    #[test]
    fn prefix_votes() {
        // three trees, two rows; truth [0, 1]
        let preds = vec![vec![1, 1], vec![0, 1], vec![0, 0]];
        let e = prefix_errors(&preds, &[0, 1], 2, &[3, 1, 2]);
        // 1 tree: row0 wrong; 2 trees: row0 tie -> class 0; 3 trees: row0 0, row1 1
        assert_eq!(e, vec![0.0, 50.0, 0.0]);
    }
}
