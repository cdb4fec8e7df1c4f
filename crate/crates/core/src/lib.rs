//! Canonical correlation forests.
//!
//! Decision-tree ensembles whose node splits are thresholds on projections
//! found by canonical correlation analysis between a random feature subset
//! and the class indicators. Also provides an axis-aligned random forest
//! baseline, the CSV/schema data pipeline, synthetic benchmark generators and
//! a cross-validation harness.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.
//!
//! ```
//! use ccf::{synth, forest, ForestConfig};
//!
//! let ds = synth::gen_spirals::<f64>(300, 3, 0.2, 1).unwrap();
//! let cfg = ForestConfig::default().with_trees(20).with_seed(4);
//! let model = forest::train(&ds, &cfg).unwrap();
//! let label = model.predict(ds.x.row(0)).unwrap();
//! assert!(label < 3);
//! ```

pub mod cca;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod linalg;
pub mod scalar;
pub mod split;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use forest::{default_lambda, Mode, MODEL_FORMAT};
pub use scalar::Scalar;
pub use split::Criterion;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type Standardizer = data::Standardizer<f64>;
pub type CcaConfig = cca::CcaConfig<f64>;
pub type CcaResult = cca::CcaResult<f64>;
pub type Tree = tree::Tree<f64>;
pub type Forest = forest::Forest<f64>;
pub type ForestConfig = forest::ForestConfig<f64>;
