//! Exhaustive threshold search over projected feature columns.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// C4.5 information gain, in bits.
    #[default]
    InfoGain,
    Gini,
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "info_gain" | "info-gain" | "entropy" => Ok(Criterion::InfoGain),
            "gini" => Ok(Criterion::Gini),
            other => Err(format!("unknown split criterion '{other}'")),
        }
    }
}

/// Shannon entropy in bits, `0 log 0 = 0`.
pub fn entropy<T: Scalar>(counts: &[usize]) -> T {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return T::zero();
    }
    let n = T::from_usize_lossy(total);
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_usize_lossy(c) / n;
            -p * p.log2()
        })
        .sum()
}

pub fn gini<T: Scalar>(counts: &[usize]) -> T {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return T::zero();
    }
    let n = T::from_usize_lossy(total);
    T::one()
        - counts
            .iter()
            .map(|&c| {
                let p = T::from_usize_lossy(c) / n;
                p * p
            })
            .sum::<T>()
}

pub fn impurity<T: Scalar>(criterion: Criterion, counts: &[usize]) -> T {
    match criterion {
        Criterion::InfoGain => entropy(counts),
        Criterion::Gini => gini(counts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    /// Column of the projected matrix the split thresholds.
    pub proj_index: usize,
    pub threshold: T,
    /// Impurity decrease relative to leaving the node as a leaf.
    pub gain: T,
}

/// Midpoint of two adjacent distinct values, kept strictly below `hi` so the
/// `<=` rule always separates them.
pub fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid < hi && mid >= lo {
        mid
    } else {
        lo
    }
}

/// Incremental impurity bookkeeping for one side of a sweep.
///
/// For entropy this tracks `sum c log2 c`, so that
/// `n * H = n log2 n - sum c log2 c`; for Gini it tracks `sum c^2`.
struct SideStats<'a, T> {
    counts: Vec<usize>,
    n: usize,
    acc: T,
    criterion: Criterion,
    clogc: &'a [T],
}

impl<'a, T: Scalar> SideStats<'a, T> {
    fn new(counts: Vec<usize>, criterion: Criterion, clogc: &'a [T]) -> Self {
        let n = counts.iter().sum();
        let acc = counts
            .iter()
            .map(|&c| Self::term(criterion, clogc, c))
            .sum();
        Self {
            counts,
            n,
            acc,
            criterion,
            clogc,
        }
    }

    #[inline]
    fn term(criterion: Criterion, clogc: &[T], c: usize) -> T {
        match criterion {
            Criterion::InfoGain => clogc[c],
            Criterion::Gini => {
                let c = T::from_usize_lossy(c);
                c * c
            }
        }
    }

    #[inline]
    fn shift(&mut self, class: usize, delta: isize) {
        let old = self.counts[class];
        let new = (old as isize + delta) as usize;
        self.acc = self.acc - Self::term(self.criterion, self.clogc, old)
            + Self::term(self.criterion, self.clogc, new);
        self.counts[class] = new;
        self.n = (self.n as isize + delta) as usize;
    }

    /// `n * impurity` for this side.
    #[inline]
    fn weighted_impurity(&self) -> T {
        if self.n == 0 {
            return T::zero();
        }
        let n = T::from_usize_lossy(self.n);
        match self.criterion {
            Criterion::InfoGain => self.clogc[self.n] - self.acc,
            Criterion::Gini => n - self.acc / n,
        }
    }
}

/// Best `(column, threshold)` split of the rows of `projected`.
///
/// Every boundary between consecutive distinct values of every column is
/// evaluated; the threshold is the midpoint of the two values. Ties in gain
/// keep the lowest column and then the lowest threshold. Returns `None` when
/// every column is constant.
pub fn find_best_split<T: Scalar>(
    projected: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    criterion: Criterion,
) -> Option<SplitCandidate<T>> {
    let n = projected.rows();
    debug_assert_eq!(labels.len(), n);
    if n < 2 {
        return None;
    }
    let columns: Vec<Vec<T>> = (0..projected.cols()).map(|j| projected.column(j)).collect();
    best_split_columns(&columns, labels, n_classes, criterion)
}

/// Same as [`find_best_split`] with the candidate columns given directly.
pub fn best_split_columns<T: Scalar>(
    columns: &[Vec<T>],
    labels: &[usize],
    n_classes: usize,
    criterion: Criterion,
) -> Option<SplitCandidate<T>> {
    let n = labels.len();
    if n < 2 {
        return None;
    }
    let mut parent = vec![0usize; n_classes];
    for &y in labels {
        parent[y] += 1;
    }
    // c * log2(c) for every count that can occur at this node
    let clogc: Vec<T> = match criterion {
        Criterion::InfoGain => (0..=n)
            .map(|c| {
                if c == 0 {
                    T::zero()
                } else {
                    let c = T::from_usize_lossy(c);
                    c * c.log2()
                }
            })
            .collect(),
        Criterion::Gini => Vec::new(),
    };
    let parent_stats = SideStats::new(parent.clone(), criterion, &clogc);
    let parent_weighted = parent_stats.weighted_impurity();
    let n_t = T::from_usize_lossy(n);
    let noise = T::epsilon() * T::lit(64.0) * T::from_usize_lossy(n_classes.max(2)).log2();

    let mut best: Option<SplitCandidate<T>> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for (j, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), n);
        order.sort_unstable_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap_or(Ordering::Equal));
        if col[order[0]] == col[order[n - 1]] {
            continue;
        }
        let mut left = SideStats::new(vec![0; n_classes], criterion, &clogc);
        let mut right = SideStats::new(parent.clone(), criterion, &clogc);
        for w in 0..n - 1 {
            let i = order[w];
            left.shift(labels[i], 1);
            right.shift(labels[i], -1);
            let (lo, hi) = (col[i], col[order[w + 1]]);
            if lo == hi {
                continue;
            }
            let gain =
                (parent_weighted - left.weighted_impurity() - right.weighted_impurity()) / n_t;
            // rounding residue of an exactly uninformative split counts as zero
            let gain = if gain <= noise { T::zero() } else { gain };
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    proj_index: j,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}
