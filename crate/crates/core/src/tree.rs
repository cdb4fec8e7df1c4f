//! Canonical correlation trees: greedy top-down growth with CCA-projected
//! splits, and routing of points through the finished tree.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cca::{cca_stable, CcaConfig};
use crate::data::{indicator, FeatureGroup};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::split::{best_split_columns, midpoint, Criterion};

/// Sparse split direction `phi`: weights on a subset of encoded columns,
/// zero elsewhere. Indices are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    pub indices: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Scalar> Projection<T> {
    /// `x^T phi`. Summation runs over the stored indices in increasing order,
    /// which is bit-identical to a dense dot product with explicit zeros.
    #[inline]
    pub fn dot(&self, x: &[T]) -> T {
        self.indices
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&i, &w)| acc + x[i] * w)
    }

    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|w| **w != T::zero()).count()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut v = vec![T::zero(); dim];
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            v[i] = w;
        }
        v
    }
}

/// Why growth stopped at a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// All rows share one class.
    Pure,
    /// Best split had no positive gain.
    NoGain,
    /// Sample had one unique point (or one class) even after fallback.
    Degenerate,
    /// Every remaining feature is constant on the node.
    NoFeatures,
    /// CCA returned no components.
    NoProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<T> {
    Split {
        left: usize,
        right: usize,
        phi: Projection<T>,
        threshold: T,
        n_samples: usize,
    },
    Leaf {
        label: usize,
        n_samples: usize,
        reason: StopReason,
    },
}

impl<T> Node<T> {
    pub fn n_samples(&self) -> usize {
        match self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn single_leaf(label: usize, n_samples: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                label,
                n_samples,
                reason: StopReason::Pure,
            }],
        }
    }

    /// Index of the leaf `x` lands in: left when `x^T phi <= s`.
    pub fn leaf_index(&self, x: &[T]) -> usize {
        let mut j = 0;
        loop {
            match &self.nodes[j] {
                Node::Leaf { .. } => return j,
                Node::Split {
                    left,
                    right,
                    phi,
                    threshold,
                    ..
                } => {
                    j = if phi.dot(x) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class label of the leaf `x` lands in.
    pub fn route(&self, x: &[T]) -> usize {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { label, .. } => *label,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((j, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = &self.nodes[j] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        best
    }

    /// Checks the arena forms a binary tree rooted at 0 whose split counts
    /// add up (every non-root node has exactly one parent, no cycles, both
    /// children non-empty).
    pub fn check_structure(&self) -> Result<(), String> {
        let n = self.nodes.len();
        let mut parents = vec![0usize; n];
        for (j, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                left,
                right,
                phi,
                n_samples,
                ..
            } = node
            {
                for &c in [left, right] {
                    if c >= n || c == 0 {
                        return Err(format!("node {j} has invalid child {c}"));
                    }
                    parents[c] += 1;
                }
                let (l, r) = (self.nodes[*left].n_samples(), self.nodes[*right].n_samples());
                if l == 0 || r == 0 || l + r != *n_samples {
                    return Err(format!("node {j}: children hold {l}+{r} of {n_samples} rows"));
                }
                if phi.nnz() == 0 {
                    return Err(format!("node {j} has an all-zero projection"));
                }
                if phi.indices.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("node {j} projection indices not increasing"));
                }
            }
        }
        if parents[0] != 0 {
            return Err("root has a parent".into());
        }
        if let Some(j) = (1..n).find(|&j| parents[j] != 1) {
            return Err(format!("node {j} has {} parents", parents[j]));
        }
        // reachability from the root rules out detached cycles
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        while let Some(j) = stack.pop() {
            if std::mem::replace(&mut seen[j], true) {
                return Err(format!("node {j} reached twice"));
            }
            if let Node::Split { left, right, .. } = &self.nodes[j] {
                stack.push(*left);
                stack.push(*right);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("unreachable nodes".into());
        }
        Ok(())
    }
}

/// How split directions are chosen at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// CCA between sampled features and the class indicator.
    Cca,
    /// Thresholds on the sampled raw columns directly.
    AxisAligned,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowConfig<T> {
    /// Logical features sampled per node.
    pub lambda: usize,
    pub projection_bootstrap: bool,
    pub criterion: Criterion,
    pub cca: CcaConfig<T>,
    pub split_mode: SplitMode,
    /// Turn a node into a leaf when its bootstrap sample is degenerate instead
    /// of falling back to the full node data.
    pub leaf_on_degenerate: bool,
}

impl<T: Scalar> Default for GrowConfig<T> {
    fn default() -> Self {
        Self {
            lambda: 1,
            projection_bootstrap: false,
            criterion: Criterion::InfoGain,
            cca: CcaConfig::default(),
            split_mode: SplitMode::Cca,
            leaf_on_degenerate: false,
        }
    }
}

/// Most populous class among `counts`; ties are narrowed by the counts at
/// successive ancestors (nearest first) and finally go to the lowest index.
pub fn leaf_label<'a>(counts: &[usize], ancestors: impl IntoIterator<Item = &'a [usize]>) -> usize {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut tied: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] == max).collect();
    for anc in ancestors {
        if tied.len() <= 1 {
            break;
        }
        let m = tied.iter().map(|&k| anc[k]).max().unwrap_or(0);
        tied.retain(|&k| anc[k] == m);
    }
    tied.first().copied().unwrap_or(0)
}

struct Pending {
    id: usize,
    rows: Vec<usize>,
    available: Vec<usize>,
}

struct Grower<'a, T, R> {
    x: &'a Matrix<T>,
    labels: &'a [usize],
    n_classes: usize,
    groups: &'a [FeatureGroup],
    cfg: &'a GrowConfig<T>,
    rng: &'a mut R,
    nodes: Vec<Node<T>>,
    parent: Vec<Option<usize>>,
    counts: Vec<Vec<usize>>,
}

enum Outcome<T> {
    Leaf(StopReason),
    Split(Projection<T>, T, Vec<u8>),
}

/// Grows one tree on `rows` of the standardised matrix `x` (rows may repeat,
/// as in a bagged sample).
///
/// Nodes are processed depth-first, left child first, and each node draws
/// from `rng` in a fixed order (feature sample, then bootstrap), so equal
/// inputs and rng state give identical trees.
pub fn grow_tree<T: Scalar, R: Rng>(
    x: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    groups: &[FeatureGroup],
    rows: Vec<usize>,
    cfg: &GrowConfig<T>,
    rng: &mut R,
) -> Tree<T> {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let mut g = Grower {
        x,
        labels,
        n_classes,
        groups,
        cfg,
        rng,
        nodes: Vec::new(),
        parent: Vec::new(),
        counts: Vec::new(),
    };
    g.alloc(None);
    let mut stack = vec![Pending {
        id: 0,
        rows,
        available: (0..groups.len()).collect(),
    }];
    while let Some(item) = stack.pop() {
        let counts = g.class_counts(&item.rows);
        g.counts[item.id] = counts;
        let mut available = item.available;
        let n_samples = item.rows.len();
        match g.decide(&item.rows, &mut available) {
            Outcome::Leaf(reason) => {
                let label = g.label(item.id);
                g.nodes[item.id] = Node::Leaf {
                    label,
                    n_samples,
                    reason,
                };
            }
            Outcome::Split(phi, threshold, left_mask) => {
                let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
                for (&r, &is_left) in item.rows.iter().zip(&left_mask) {
                    if is_left != 0 {
                        lrows.push(r);
                    } else {
                        rrows.push(r);
                    }
                }
                let left = g.alloc(Some(item.id));
                let right = g.alloc(Some(item.id));
                g.nodes[item.id] = Node::Split {
                    left,
                    right,
                    phi,
                    threshold,
                    n_samples,
                };
                stack.push(Pending {
                    id: right,
                    rows: rrows,
                    available: available.clone(),
                });
                stack.push(Pending {
                    id: left,
                    rows: lrows,
                    available,
                });
            }
        }
    }
    Tree { nodes: g.nodes }
}

impl<T: Scalar, R: Rng> Grower<'_, T, R> {
    fn alloc(&mut self, parent: Option<usize>) -> usize {
        self.nodes.push(Node::Leaf {
            label: 0,
            n_samples: 0,
            reason: StopReason::Pure,
        });
        self.parent.push(parent);
        self.counts.push(Vec::new());
        self.nodes.len() - 1
    }

    fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.labels[r]] += 1;
        }
        c
    }

    fn label(&self, id: usize) -> usize {
        let mut chain = Vec::new();
        let mut p = self.parent[id];
        while let Some(j) = p {
            chain.push(self.counts[j].as_slice());
            p = self.parent[j];
        }
        leaf_label(&self.counts[id], chain)
    }

    fn varies(&self, feature: usize, rows: &[usize]) -> bool {
        let first = self.x.row(rows[0]);
        self.groups[feature].columns.clone().any(|c| {
            let v = first[c];
            rows.iter().any(|&r| self.x[(r, c)] != v)
        })
    }

    /// Samples `min(lambda, |available|)` features, discarding (from both the
    /// sample and `available`) any that are constant on the node, until the
    /// sample is clean. Returns the sorted feature ids.
    fn sample_features(&mut self, rows: &[usize], available: &mut Vec<usize>) -> Vec<usize> {
        let mut checked: Vec<Option<bool>> = vec![None; self.groups.len()];
        loop {
            let k = self.cfg.lambda.min(available.len());
            if k == 0 {
                return Vec::new();
            }
            let mut delta: Vec<usize> = sample_indices(self.rng, available.len(), k)
                .into_iter()
                .map(|i| available[i])
                .collect();
            let mut dead = Vec::new();
            for &f in &delta {
                let ok = *checked[f].get_or_insert_with(|| self.varies(f, rows));
                if !ok {
                    dead.push(f);
                }
            }
            if dead.is_empty() {
                delta.sort_unstable();
                return delta;
            }
            available.retain(|f| !dead.contains(f));
        }
    }

    fn decide(&mut self, rows: &[usize], available: &mut Vec<usize>) -> Outcome<T> {
        if self.counts_of(rows).iter().filter(|&&c| c > 0).count() <= 1 {
            return Outcome::Leaf(StopReason::Pure);
        }
        let delta = self.sample_features(rows, available);
        if delta.is_empty() {
            return Outcome::Leaf(StopReason::NoFeatures);
        }
        let gamma: Vec<usize> = delta
            .iter()
            .flat_map(|&f| self.groups[f].columns.clone())
            .collect();
        match self.cfg.split_mode {
            SplitMode::AxisAligned => self.axis_split(rows, &gamma),
            SplitMode::Cca => self.cca_split(rows, &gamma),
        }
    }

    fn counts_of(&self, rows: &[usize]) -> Vec<usize> {
        self.class_counts(rows)
    }

    fn axis_split(&mut self, rows: &[usize], gamma: &[usize]) -> Outcome<T> {
        let projections: Vec<Projection<T>> = gamma
            .iter()
            .map(|&c| Projection {
                indices: vec![c],
                weights: vec![T::one()],
            })
            .collect();
        self.search(rows, projections)
    }

    fn cca_split(&mut self, rows: &[usize], gamma: &[usize]) -> Outcome<T> {
        let sample: Vec<usize> = if self.cfg.projection_bootstrap {
            let n = rows.len();
            (0..n).map(|_| rows[self.rng.random_range(0..n)]).collect()
        } else {
            rows.to_vec()
        };
        let sample = if self.degenerate(&sample, gamma) {
            if self.cfg.leaf_on_degenerate || !self.cfg.projection_bootstrap || self.degenerate(rows, gamma) {
                return Outcome::Leaf(StopReason::Degenerate);
            }
            rows.to_vec()
        } else {
            sample
        };

        if let Some((r1, r2)) = self.two_unique_rows(&sample, gamma) {
            // direction between the two points, threshold halfway
            let (a, b) = (self.x.row(r1), self.x.row(r2));
            let phi = Projection {
                indices: gamma.to_vec(),
                weights: gamma.iter().map(|&c| b[c] - a[c]).collect(),
            };
            let (pa, pb) = (phi.dot(a), phi.dot(b));
            if !(pa < pb) {
                return Outcome::Leaf(StopReason::Degenerate);
            }
            let threshold = midpoint(pa, pb);
            return self.partition(rows, phi, threshold);
        }

        let w = self.x.select(&sample, gamma);
        let ys: Vec<usize> = sample.iter().map(|&r| self.labels[r]).collect();
        let v: Matrix<T> = indicator(&ys, self.n_classes);
        let cca = match cca_stable(&w, &v, &self.cfg.cca) {
            Ok(res) if res.n_components() > 0 => res,
            _ => return Outcome::Leaf(StopReason::NoProjection),
        };
        let projections = (0..cca.n_components())
            .map(|c| Projection {
                indices: gamma.to_vec(),
                weights: (0..gamma.len()).map(|i| cca.a[(i, c)]).collect(),
            })
            .collect();
        self.search(rows, projections)
    }

    /// Split search over the full node data projected onto each candidate.
    fn search(&mut self, rows: &[usize], projections: Vec<Projection<T>>) -> Outcome<T> {
        let columns: Vec<Vec<T>> = projections
            .iter()
            .map(|p| rows.iter().map(|&r| p.dot(self.x.row(r))).collect())
            .collect();
        let labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        match best_split_columns(&columns, &labels, self.n_classes, self.cfg.criterion) {
            Some(best) if best.gain > T::zero() => {
                let phi = projections.into_iter().nth(best.proj_index).expect("index in range");
                let mask = columns[best.proj_index]
                    .iter()
                    .map(|&u| u8::from(u <= best.threshold))
                    .collect();
                Outcome::Split(phi, best.threshold, mask)
            }
            _ => Outcome::Leaf(StopReason::NoGain),
        }
    }

    fn partition(&self, rows: &[usize], phi: Projection<T>, threshold: T) -> Outcome<T> {
        let mask: Vec<u8> = rows
            .iter()
            .map(|&r| u8::from(phi.dot(self.x.row(r)) <= threshold))
            .collect();
        let left = mask.iter().filter(|&&m| m != 0).count();
        if left == 0 || left == rows.len() {
            return Outcome::Leaf(StopReason::Degenerate);
        }
        Outcome::Split(phi, threshold, mask)
    }

    fn same_on(&self, a: usize, b: usize, gamma: &[usize]) -> bool {
        let (ra, rb) = (self.x.row(a), self.x.row(b));
        gamma.iter().all(|&c| ra[c] == rb[c])
    }

    /// One class, or one unique point on `gamma`.
    fn degenerate(&self, rows: &[usize], gamma: &[usize]) -> bool {
        let y0 = self.labels[rows[0]];
        if rows.iter().all(|&r| self.labels[r] == y0) {
            return true;
        }
        rows.iter().all(|&r| self.same_on(rows[0], r, gamma))
    }

    /// The two distinct rows (lexicographic order on `gamma`) when the sample
    /// holds exactly two unique points.
    fn two_unique_rows(&self, rows: &[usize], gamma: &[usize]) -> Option<(usize, usize)> {
        let a = rows[0];
        let b = *rows.iter().find(|&&r| !self.same_on(a, r, gamma))?;
        if rows
            .iter()
            .any(|&r| !self.same_on(a, r, gamma) && !self.same_on(b, r, gamma))
        {
            return None;
        }
        let (ra, rb) = (self.x.row(a), self.x.row(b));
        let a_first = gamma
            .iter()
            .map(|&c| ra[c].partial_cmp(&rb[c]).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_lt());
        Some(if a_first { (a, b) } else { (b, a) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn groups(d: usize) -> Vec<FeatureGroup> {
        (0..d)
            .map(|i| FeatureGroup {
                name: format!("x{i}"),
                categorical: false,
                columns: i..i + 1,
            })
            .collect()
    }

    fn grow(x: &Matrix<f64>, y: &[usize], k: usize, cfg: &GrowConfig<f64>, seed: u64) -> Tree<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        grow_tree(x, y, k, &groups(x.cols()), (0..x.rows()).collect(), cfg, &mut rng)
    }

    #[test]
    fn leaf_label_rules() {
        assert_eq!(leaf_label(&[3, 1], []), 0);
        let parent = [5usize, 3];
        assert_eq!(leaf_label(&[2, 2], [&parent[..]]), 0);
        let parent = [3usize, 5];
        assert_eq!(leaf_label(&[2, 2], [&parent[..]]), 1);
        let p = [4usize, 4, 0];
        let gp = [6usize, 6, 1];
        assert_eq!(leaf_label(&[1, 1, 0], [&p[..], &gp[..]]), 0);
        // tie narrowed at the parent to {1, 2}, grandparent picks 2
        assert_eq!(leaf_label(&[1, 1, 1], [&[0usize, 3, 3][..], &[9usize, 2, 5][..]]), 2);
    }

    #[test]
    fn single_class_node_is_leaf() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let t = grow(&x, &[1, 1, 1], 2, &GrowConfig::default(), 0);
        assert_eq!(t.nodes.len(), 1);
        assert!(matches!(t.nodes[0], Node::Leaf { label: 1, reason: StopReason::Pure, .. }));
    }

    #[test]
    fn two_unique_rows_split_between_points() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0], [2.0, 3.0], [2.0, 3.0]]).unwrap();
        let cfg = GrowConfig {
            lambda: 2,
            ..GrowConfig::default()
        };
        let t = grow(&x, &[0, 0, 1, 1], 2, &cfg, 0);
        match &t.nodes[0] {
            Node::Split { phi, threshold, .. } => {
                assert_eq!(phi.to_dense(2), vec![2.0, 2.0]);
                // 0.5 * (r1 + r2)^T phi = 0.5 * ((0,1) + (2,3)) . (2,2) = 6
                assert_eq!(*threshold, 6.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.route(&[0.0, 1.0]), 0);
        assert_eq!(t.route(&[2.0, 3.0]), 1);
    }

    #[test]
    fn routing_ties_go_left() {
        let t = Tree {
            nodes: vec![
                Node::Split {
                    left: 1,
                    right: 2,
                    phi: Projection {
                        indices: vec![0],
                        weights: vec![1.0],
                    },
                    threshold: 0.0,
                    n_samples: 2,
                },
                Node::Leaf {
                    label: 3,
                    n_samples: 1,
                    reason: StopReason::Pure,
                },
                Node::Leaf {
                    label: 4,
                    n_samples: 1,
                    reason: StopReason::Pure,
                },
            ],
        };
        assert_eq!(t.route(&[-1.0, 9.0]), 3);
        assert_eq!(t.route(&[1.0, 9.0]), 4);
        assert_eq!(t.route(&[0.0, 9.0]), 3);
        assert!(t.check_structure().is_ok());
        assert_eq!(Tree::<f64>::single_leaf(2, 5).route(&[7.0]), 2);
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let cfg = GrowConfig {
            lambda: 1,
            ..GrowConfig::default()
        };
        let t = grow(&x, &[0, 1, 1], 2, &cfg, 0);
        assert!(matches!(t.nodes[0], Node::Leaf { label: 1, reason: StopReason::NoFeatures, .. }));
    }

    #[test]
    fn axis_mode_uses_unit_projections() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [1.0, 3.0], [2.0, 1.0], [3.0, 0.0]]).unwrap();
        let cfg = GrowConfig {
            lambda: 2,
            split_mode: SplitMode::AxisAligned,
            ..GrowConfig::default()
        };
        let t = grow(&x, &[0, 0, 1, 1], 2, &cfg, 1);
        for n in &t.nodes {
            if let Node::Split { phi, .. } = n {
                assert_eq!(phi.nnz(), 1);
            }
        }
        assert!(t.check_structure().is_ok());
    }

    #[test]
    fn check_structure_detects_bad_counts() {
        let mut t = Tree {
            nodes: vec![
                Node::Split {
                    left: 1,
                    right: 2,
                    phi: Projection {
                        indices: vec![0],
                        weights: vec![1.0],
                    },
                    threshold: 0.0,
                    n_samples: 3,
                },
                Node::Leaf {
                    label: 0,
                    n_samples: 1,
                    reason: StopReason::Pure,
                },
                Node::Leaf {
                    label: 1,
                    n_samples: 1,
                    reason: StopReason::Pure,
                },
            ],
        };
        assert!(t.check_structure().is_err());
        if let Node::Split { right, .. } = &mut t.nodes[0] {
            *right = 1;
        }
        assert!(t.check_structure().is_err());
    }
}
