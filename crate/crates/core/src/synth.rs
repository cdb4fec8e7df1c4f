//! Synthetic datasets: interleaved spirals, the correlation-injection
//! transforms, and a hill/valley series generator.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Angle covered by each spiral arm.
pub const SPIRAL_ARC: f64 = 3.0 * PI;
/// Angle at which each arm starts; keeps the arms apart near the origin.
pub const SPIRAL_START: f64 = 0.5 * PI;
/// Noise level used by the benchmark spirals.
pub const DEFAULT_SPIRAL_NOISE: f64 = 0.35;

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::Config(format!("noise std {std}: {e}")))
}

fn class_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

/// `n_points` points on `n_classes` interleaved Archimedean spirals
/// (`r = theta`, arm `k` rotated by `2 pi k / K`), with isotropic Gaussian noise.
///
/// Class sizes differ by at most one; rows are shuffled.
pub fn gen_spirals<T: Scalar>(
    n_points: usize,
    n_classes: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_classes < 2 || n_points < n_classes {
        return Err(Error::Config(format!(
            "spirals need at least 2 classes and one point per class, got {n_points} points, {n_classes} classes"
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise std must be finite and >= 0, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(noise_std)?;
    let mut labels: Vec<usize> = (0..n_points).map(|i| i % n_classes).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(2 * n_points);
    for &k in &labels {
        let theta = SPIRAL_START + rng.random::<f64>() * SPIRAL_ARC;
        let phase = 2.0 * PI * k as f64 / n_classes as f64;
        let (s, c) = (theta + phase).sin_cos();
        let (dx, dy) = if noise_std > 0.0 {
            (noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            (0.0, 0.0)
        };
        data.push(T::lit(theta * c + dx));
        data.push(T::lit(theta * s + dy));
    }
    let x = Matrix::from_vec(n_points, 2, data)?;
    Dataset::from_matrix(
        x,
        labels,
        Some(vec!["x".into(), "y".into()]),
        class_names(n_classes),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrParams {
    /// Standard deviation of the injected feature.
    pub kappa: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundParams {
    pub kappa: f64,
    /// Offset added to every feature of the replica block.
    pub beta: f64,
}

fn augment_with<T: Scalar, R: Rng>(x: &Matrix<T>, kappa: f64, rng: &mut R) -> Result<Matrix<T>> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Config(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    let noise = normal(kappa)?;
    let (n, d) = (x.rows(), x.cols());
    // one sign per original column, then one draw per row
    let signs: Vec<T> = (0..d)
        .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
        .collect();
    let extra: Vec<T> = (0..n)
        .map(|_| if kappa > 0.0 { T::lit(noise.sample(rng)) } else { T::zero() })
        .collect();
    let mut out = Matrix::zeros(n, d + 1);
    for i in 0..n {
        let row = out.row_mut(i);
        for j in 0..d {
            row[j] = x[(i, j)] + signs[j] * extra[i];
        }
        row[d] = extra[i];
    }
    Ok(out)
}

/// Appends a `N(0, kappa^2)` column and adds it, with a random sign per
/// column, to every original column.
pub fn corr_augment<T: Scalar>(x: &Matrix<T>, p: &CorrParams) -> Result<Matrix<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    augment_with(x, p.kappa, &mut rng)
}

fn standardized<T: Scalar>(ds: &Dataset<T>) -> Result<Matrix<T>> {
    Standardizer::fit(&ds.x)?.transform(&ds.x)
}

/// Standardises `ds` and applies [`corr_augment`]; the result is an
/// all-ordinal dataset with one extra column.
pub fn corr_augment_dataset<T: Scalar>(ds: &Dataset<T>, p: &CorrParams) -> Result<Dataset<T>> {
    let x = corr_augment(&standardized(ds)?, p)?;
    ds.with_numeric_features(x)
}

/// Stacks two independently augmented copies of the standardised data, the
/// second shifted by `beta` and labelled with classes `K..2K`.
pub fn make_compound<T: Scalar>(ds: &Dataset<T>, p: &CompoundParams, seed: u64) -> Result<Dataset<T>> {
    if !p.beta.is_finite() {
        return Err(Error::Config(format!("beta must be finite, got {}", p.beta)));
    }
    let z = standardized(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = augment_with(&z, p.kappa, &mut rng)?;
    let second = augment_with(&z, p.kappa, &mut rng)?.map(|v| v + T::lit(p.beta));
    let x = first.vstack(&second)?;
    let k = ds.n_classes();
    let labels: Vec<usize> = ds
        .labels
        .iter()
        .copied()
        .chain(ds.labels.iter().map(|&y| y + k))
        .collect();
    let names: Vec<String> = ds
        .class_names()
        .iter()
        .cloned()
        .chain(ds.class_names().iter().map(|c| format!("{c}_replica")))
        .collect();
    Dataset::from_matrix(x, labels, None, names)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillValleyParams {
    pub n_rows: usize,
    /// Points per series.
    pub length: usize,
    /// Gaussian noise, relative to each series' baseline.
    pub noise: f64,
    pub seed: u64,
}

impl Default for HillValleyParams {
    fn default() -> Self {
        Self {
            n_rows: 1212,
            length: 100,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Series of `length` points on a flat baseline carrying one smooth bump
/// (class `hill`) or dip (class `valley`).
///
/// Baselines are log-uniform over six orders of magnitude and the bump
/// height is proportional to the baseline, so no single column separates the
/// classes while the shape does. Classes are balanced.
pub fn gen_hill_valley<T: Scalar>(p: &HillValleyParams) -> Result<Dataset<T>> {
    if p.n_rows < 2 || p.length < 3 {
        return Err(Error::Config("hill-valley needs >= 2 rows of >= 3 points".into()));
    }
    if !(p.noise >= 0.0 && p.noise.is_finite()) {
        return Err(Error::Config(format!("noise must be finite and >= 0, got {}", p.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = normal(p.noise)?;
    let len = p.length as f64;
    let mut labels: Vec<usize> = (0..p.n_rows).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(p.n_rows * p.length);
    for &y in &labels {
        let base = 10f64.powf(rng.random_range(0.0..6.0));
        let height = base * rng.random_range(0.01..0.1);
        let center = len * rng.random_range(0.3..0.7);
        let width = len * rng.random_range(0.08..0.2);
        let sign = if y == 0 { 1.0 } else { -1.0 };
        for t in 0..p.length {
            let u = (t as f64 - center) / width;
            let mut v = base + sign * height * (-0.5 * u * u).exp();
            if p.noise > 0.0 {
                v += base * noise.sample(&mut rng);
            }
            data.push(T::lit(v));
        }
    }
    let x = Matrix::from_vec(p.n_rows, p.length, data)?;
    let names = (1..=p.length).map(|i| format!("v{i}")).collect();
    Dataset::from_matrix(x, labels, Some(names), vec!["hill".into(), "valley".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spirals_shape_and_balance() {
        let ds: Dataset<f64> = gen_spirals(10_000, 3, 0.2, 7).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features(), ds.n_classes()), (10_000, 2, 3));
        let c = ds.class_counts();
        assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
    }

    #[test]
    fn noiseless_spirals_lie_on_their_arm() {
        let ds: Dataset<f64> = gen_spirals(300, 3, 0.0, 1).unwrap();
        for (row, &k) in ds.x.iter_rows().zip(&ds.labels) {
            let r = row[0].hypot(row[1]);
            assert!(r >= SPIRAL_START - 1e-12 && r <= SPIRAL_START + SPIRAL_ARC + 1e-12);
            let phase = 2.0 * PI * k as f64 / 3.0;
            assert!((r * (r + phase).cos() - row[0]).abs() < 1e-9);
            assert!((r * (r + phase).sin() - row[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn generators_are_seeded() {
        let a: Dataset<f64> = gen_spirals(50, 2, 0.3, 5).unwrap();
        let b: Dataset<f64> = gen_spirals(50, 2, 0.3, 5).unwrap();
        let c: Dataset<f64> = gen_spirals(50, 2, 0.3, 6).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.x, c.x);
        assert!(gen_spirals::<f64>(1, 2, 0.1, 0).is_err());
    }

    #[test]
    fn zero_kappa_leaves_columns_alone() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]]).unwrap();
        let out = corr_augment(&x, &CorrParams { kappa: 0.0, seed: 3 }).unwrap();
        assert_eq!(out.cols(), 3);
        assert_eq!(out.select_cols(&[0, 1]), x);
        assert!(out.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hill_valley_is_balanced() {
        let ds: Dataset<f64> = gen_hill_valley(&HillValleyParams::default()).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (1212, 100));
        assert_eq!(ds.class_counts(), vec![606, 606]);
    }
}
