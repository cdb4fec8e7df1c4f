use ccf::data::{load_csv, Dataset, Schema};
use ccf::linalg::Matrix;
use ccf::synth::{corr_augment, corr_augment_dataset, gen_hill_valley, make_compound, CompoundParams, CorrParams, HillValleyParams};
use proptest::prelude::*;

fn iris() -> Dataset<f64> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    let schema = Schema::from_file(format!("{dir}/iris.schema")).unwrap();
    load_csv(format!("{dir}/iris.csv"), &schema).unwrap()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn large_kappa_dominates_every_column() {
    let ds = iris();
    let aug = corr_augment_dataset(&ds, &CorrParams { kappa: 1e4, seed: 2 }).unwrap();
    let extra = aug.x.column(4);
    for d in 0..4 {
        let r = pearson(&aug.x.column(d), &extra);
        assert!(r.abs() > 0.9999, "column {d}: corr {r}");
    }
}

#[test]
fn compound_iris_shape_and_blocks() {
    let ds = iris();
    let c = make_compound(&ds, &CompoundParams { kappa: 100.0, beta: 2000.0 }, 5).unwrap();
    assert_eq!((c.n_rows(), c.n_classes(), c.n_encoded()), (300, 6, 5));
    assert!(c.labels[..150].iter().all(|&y| y < 3));
    assert!(c.labels[150..].iter().all(|&y| y >= 3));
    assert_eq!(&c.labels[150..].iter().map(|y| y - 3).collect::<Vec<_>>()[..], &ds.labels[..]);
    // replica rows sit above beta - 6 kappa in every column
    let floor = 2000.0 - 6.0 * 100.0;
    for i in 150..300 {
        assert!(c.x.row(i).iter().all(|&v| v >= floor), "row {i}: {:?}", c.x.row(i));
    }
}

#[test]
fn zero_offsets_make_identical_blocks() {
    let ds = iris();
    let c = make_compound(&ds, &CompoundParams { kappa: 0.0, beta: 0.0 }, 5).unwrap();
    assert_eq!(c.x.select_rows(&(0..150).collect::<Vec<_>>()), c.x.select_rows(&(150..300).collect::<Vec<_>>()));
    assert_ne!(c.labels[..150], c.labels[150..]);
}

#[test]
fn independent_draws_per_block() {
    let ds = iris();
    let c = make_compound(&ds, &CompoundParams { kappa: 1.0, beta: 0.0 }, 5).unwrap();
    assert_ne!(c.x.column(4)[..150], c.x.column(4)[150..]);
}

#[test]
fn hill_valley_shape_carries_the_class() {
    let ds: Dataset<f64> = gen_hill_valley(&HillValleyParams { n_rows: 200, ..HillValleyParams::default() }).unwrap();
    for (row, &y) in ds.x.iter_rows().zip(&ds.labels) {
        let edge = row[0];
        let mid_max = row.iter().copied().fold(f64::MIN, f64::max);
        let mid_min = row.iter().copied().fold(f64::MAX, f64::min);
        if y == 0 {
            assert!(mid_max > edge);
        } else {
            assert!(mid_min < edge);
        }
    }
}

proptest! {
    #[test]
    fn augment_appends_one_column(n in 1usize..30, d in 1usize..6, kappa in 0.0f64..50.0, seed in any::<u64>()) {
        let x = Matrix::from_vec(n, d, (0..n * d).map(|i| i as f64).collect()).unwrap();
        let p = CorrParams { kappa, seed };
        let out = corr_augment(&x, &p).unwrap();
        prop_assert_eq!((out.rows(), out.cols()), (n, d + 1));
        prop_assert_eq!(&out, &corr_augment(&x, &p).unwrap());
        // each original column moved by exactly +/- the new one
        for j in 0..d {
            let plus = (0..n).all(|i| out[(i, j)] == x[(i, j)] + out[(i, d)]);
            let minus = (0..n).all(|i| out[(i, j)] == x[(i, j)] - out[(i, d)]);
            prop_assert!(plus || minus);
        }
    }
}
