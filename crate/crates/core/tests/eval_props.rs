use ccf::data::{Dataset, Standardizer};
use ccf::eval::{
    cohen_kappa, cross_validate, cross_validate_with, ensemble_size_sweep, wilcoxon_from_diffs,
    wilcoxon_signed_rank, CvConfig,
};
use ccf::forest::{train, ForestConfig};
use ccf::linalg::Matrix;
use ccf::synth::gen_spirals;
use ccf::Mode;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_wilcoxon_matches_enumeration() {
    // all 2^6 sign patterns of ranks 1..6; only the all-positive one reaches W+ = 21
    let ranks = [1u32, 2, 3, 4, 5, 6];
    let mut at_least = 0;
    for mask in 0u32..64 {
        let w: u32 = ranks.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, r)| r).sum();
        at_least += u32::from(w >= 21);
    }
    let want = at_least as f64 / 64.0;
    let a = [0.3, 1.1, 2.0, 0.7, 5.0, 0.9];
    let r = wilcoxon_signed_rank(&a, &[0.0; 6]).unwrap();
    assert_eq!(r.p_greater, want);
    assert_eq!(want, 1.0 / 64.0);
}

#[test]
fn exact_and_normal_approximation_agree_at_n15() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let shift = rng.random_range(-0.5..0.5);
        let d: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let exact = wilcoxon_from_diffs(&d, true).unwrap();
        let approx = wilcoxon_from_diffs(&d, false).unwrap();
        assert!((exact.p_two_sided - approx.p_two_sided).abs() <= 0.02, "{exact:?} vs {approx:?}");
    }
}

#[test]
fn large_samples_use_the_normal_approximation() {
    let d: Vec<f64> = (1..=40).map(|i| i as f64).collect();
    let r = wilcoxon_signed_rank(&d, &vec![0.0; 40]).unwrap();
    assert!(!r.exact);
    assert!(r.p_greater < 1e-6);
    let r = wilcoxon_signed_rank(&d, &d).unwrap();
    assert_eq!(r.p_two_sided, 1.0);
}

proptest! {
    #[test]
    fn kappa_is_invariant_under_relabelling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80),
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&p, &t);
        let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        let tt: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
        let k2 = cohen_kappa(&pp, &tt);
        prop_assert!((k - k2).abs() <= 1e-12 || (k.is_nan() && k2.is_nan()));
        prop_assert_eq!(cohen_kappa(&t, &t), 1.0);
    }
}

#[test]
fn kappa_of_independent_guesses_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    let p: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    assert!(cohen_kappa(&p, &t).abs() < 0.01);
}

fn spirals() -> Dataset<f64> {
    gen_spirals(240, 2, 0.3, 21).unwrap()
}

#[test]
fn two_fold_inversion_swaps_nothing() {
    let ds = spirals();
    let roles = |inverted| {
        let cv = CvConfig { folds: 2, inverted, seed: 3, ..CvConfig::default() };
        let mut seen = Vec::new();
        cross_validate_with(&ds, &cv, "probe", 0, |_, _, tr, te| {
            seen.push((tr.n_rows(), te.n_rows()));
            Ok(vec![0; te.n_rows()])
        })
        .unwrap();
        let mut s = seen;
        s.sort_unstable();
        s
    };
    assert_eq!(roles(false), roles(true));
}

#[test]
fn inverted_cv_trains_on_one_fold() {
    let ds = spirals();
    let cv = CvConfig { folds: 10, inverted: true, ..CvConfig::default() };
    let r = cross_validate_with(&ds, &cv, "probe", 0, |_, _, tr, te| {
        assert_eq!((tr.n_rows(), te.n_rows()), (24, 216));
        Ok(vec![0; te.n_rows()])
    })
    .unwrap();
    assert_eq!(r.results.len(), 10);
}

#[test]
fn constant_classifier_is_wrong_half_the_time() {
    let ds = spirals();
    let r = cross_validate_with(&ds, &CvConfig::default(), "const", 0, |_, _, _, te| Ok(vec![1; te.n_rows()])).unwrap();
    assert!((r.mean_error() - 50.0).abs() < 1e-9, "{}", r.mean_error());
    assert!(r.results.iter().all(|f| f.kappa == 0.0));
}

#[test]
fn standardiser_is_fitted_on_training_rows_only() {
    // feature 0 is the row id, so the fitted mean reveals which rows were used
    let n = 100;
    let mut x = Matrix::zeros(n, 2);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in 0..n {
        x[(i, 0)] = i as f64;
        x[(i, 1)] = (i % 2) as f64 + 0.01 * i as f64;
    }
    let ds = Dataset::from_matrix(x, labels, None, vec!["a".into(), "b".into()]).unwrap();
    let cfg = ForestConfig::default().with_trees(3);
    cross_validate_with(&ds, &CvConfig::default(), "leak", 3, |_, _, tr, te| {
        let forest = train(tr, &cfg)?;
        let want = Standardizer::fit(&tr.x)?;
        assert_eq!(forest.standardizer, want);
        let train_ids: Vec<f64> = tr.x.column(0);
        assert!(te.x.column(0).iter().all(|id| !train_ids.contains(id)));
        forest.predict_dataset(te)
    })
    .unwrap();
}

#[test]
fn reports_are_deterministic() {
    let ds = spirals();
    let cfg = ForestConfig::default().with_trees(5).with_seed(8);
    let cv = CvConfig { folds: 4, repeats: 2, seed: 8, ..CvConfig::default() };
    let a = cross_validate(&ds, &cfg, &cv).unwrap();
    let b = cross_validate(&ds, &cfg, &cv).unwrap();
    assert_eq!(a.errors(), b.errors());
    assert_eq!(a.results.len(), 8);
    let preds = |r: &ccf::eval::EvalReport| r.results.iter().map(|f| f.predictions.clone()).collect::<Vec<_>>();
    assert_eq!(preds(&a), preds(&b));
    let csv = a.to_csv();
    assert!(csv.starts_with("repeat,fold,mode,n_trees,error_pct,kappa,train_seconds\n"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn single_size_sweep_matches_cross_validation() {
    let ds = spirals();
    let cfg = ForestConfig::default().with_trees(12).with_seed(4);
    let cv = CvConfig { folds: 3, seed: 4, ..CvConfig::default() };
    let sweep = ensemble_size_sweep(&ds, &cfg, &[12], 12, &cv).unwrap();
    let ccf = cross_validate(&ds, &cfg, &cv).unwrap();
    let rf = cross_validate(&ds, &cfg.with_mode(Mode::Rf), &cv).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    assert!((sweep.rows[0].ccf_error - ccf.mean_error()).abs() < 1e-9);
    assert!((sweep.rows[0].rf_error - rf.mean_error()).abs() < 1e-9);
    assert!((sweep.rows[0].rf_full_error - rf.mean_error()).abs() < 1e-9);
}

#[test]
fn sweep_prefixes_reuse_one_ensemble() {
    let ds = spirals();
    let cfg = ForestConfig::default().with_seed(2);
    let cv = CvConfig { folds: 2, seed: 2, ..CvConfig::default() };
    let sweep = ensemble_size_sweep(&ds, &cfg, &[1, 3, 9], 9, &cv).unwrap();
    // the 3-tree prefix equals a separately trained 3-tree forest with the same seed
    let three = cross_validate(&ds, &cfg.with_trees(3), &cv).unwrap();
    assert!((sweep.rows[1].ccf_error - three.mean_error()).abs() < 1e-9);
    assert!(sweep.to_csv().lines().count() == 4);
    assert!(ensemble_size_sweep(&ds, &cfg, &[0, 2], 9, &cv).is_err());
}
