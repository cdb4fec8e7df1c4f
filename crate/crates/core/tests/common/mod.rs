#![allow(dead_code)]

use ccf::data::Dataset;
use ccf::forest::Forest;
use ccf::linalg::Matrix;
use ccf::tree::{Node, StopReason};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Structural checks on every tree of a trained forest, given the dataset it
/// was trained on:
/// - the node arena is a binary tree whose split counts add up,
/// - each projection touches at most `lambda` feature groups,
/// - every training row routes to a leaf, leaf counts match the rows the
///   tree was grown on, and leaves marked pure really are pure,
/// - rf forests only hold axis-aligned projections.
pub fn check_forest(forest: &Forest<f64>, train: &Dataset<f64>) -> Result<(), String> {
    let z = forest.standardizer.transform(&train.x).map_err(|e| e.to_string())?;
    let k = train.n_classes();
    for (t, tree) in forest.trees.iter().enumerate() {
        tree.check_structure().map_err(|e| format!("tree {t}: {e}"))?;
        let mut counts = vec![vec![0usize; k]; tree.nodes.len()];
        for r in forest.training_rows(train.n_rows(), t) {
            counts[tree.leaf_index(z.row(r))][train.labels[r]] += 1;
        }
        for (j, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Leaf { n_samples, reason, .. } => {
                    let got: usize = counts[j].iter().sum();
                    if got != *n_samples || got == 0 {
                        return Err(format!("tree {t} leaf {j}: routed {got} rows, recorded {n_samples}"));
                    }
                    if *reason == StopReason::Pure && counts[j].iter().filter(|&&c| c > 0).count() != 1 {
                        return Err(format!("tree {t} leaf {j}: marked pure but holds {:?}", counts[j]));
                    }
                }
                Node::Split { phi, .. } => {
                    let touched = forest
                        .groups
                        .iter()
                        .filter(|g| phi.indices.iter().any(|i| g.columns.contains(i)))
                        .count();
                    if touched > forest.lambda {
                        return Err(format!("tree {t} node {j}: projection spans {touched} features"));
                    }
                    if forest.config.mode == ccf::Mode::Rf && phi.nnz() != 1 {
                        return Err(format!("tree {t} node {j}: rf projection has {} non-zeros", phi.nnz()));
                    }
                }
            }
        }
    }
    Ok(())
}
