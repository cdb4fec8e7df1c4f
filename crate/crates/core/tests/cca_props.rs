mod common;

use ccf::cca::oracle::{cca_oracle, eigen_residual};
use ccf::cca::{cca_stable, CcaConfig, CcaResult};
use ccf::linalg::Matrix;
use common::{gaussian, rng};
use proptest::prelude::*;

fn check_invariants(w: &Matrix<f64>, v: &Matrix<f64>, res: &CcaResult<f64>) -> Result<(), TestCaseError> {
    let nu = res.n_components();
    prop_assert_eq!(nu, res.rank_w.min(res.rank_v));
    prop_assert!(res.rank_w <= w.cols().min(w.rows() - 1));
    prop_assert!(res.rank_v <= v.cols().min(v.rows() - 1));
    prop_assert_eq!((res.a.rows(), res.a.cols()), (w.cols(), nu));
    prop_assert_eq!((res.b.rows(), res.b.cols()), (v.cols(), nu));
    for i in 0..nu {
        prop_assert!(res.rho[i] <= 1.0 + 1e-10 && res.rho[i] >= -1e-10);
        if i > 0 {
            prop_assert!(res.rho[i] <= res.rho[i - 1] + 1e-10, "rho not sorted: {:?}", res.rho);
        }
    }
    // projected first input has orthonormal columns
    let u = w.centered().matmul(&res.a).unwrap();
    let g = u.transpose().matmul(&u).unwrap();
    for i in 0..nu {
        for j in 0..nu {
            let want = if i == j { 1.0 } else { 0.0 };
            prop_assert!((g[(i, j)] - want).abs() <= 1e-8, "gram[{i},{j}] = {}", g[(i, j)]);
        }
    }
    let nonzero_rows = (0..res.a.rows()).filter(|&r| res.a.row(r).iter().any(|&x| x != 0.0)).count();
    prop_assert!(nonzero_rows <= res.rank_w);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_with_eigen_oracle(seed in any::<u64>(), d in 1usize..5, k in 1usize..4, extra in 5usize..30) {
        let mut r = rng(seed);
        let n = d + k + extra;
        let w = gaussian(n, d, &mut r);
        let v = gaussian(n, k, &mut r);
        let oracle = match cca_oracle(&w, &v) {
            Ok(o) => o,
            Err(_) => return Err(TestCaseError::reject("ill-conditioned draw")),
        };
        let res = cca_stable(&w, &v, &CcaConfig::default()).unwrap();
        prop_assert_eq!(res.n_components(), oracle.len());
        for (a, b) in res.rho.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8, "stable {:?} vs oracle {:?}", res.rho, oracle);
        }
        check_invariants(&w, &v, &res)?;
        for c in 0..res.n_components() {
            let a = res.a.column(c);
            let resid = eigen_residual(&w, &v, &a, res.rho[c]).unwrap();
            prop_assert!(resid <= 1e-8, "eigen residual {resid}");
        }
    }

    #[test]
    fn correlations_are_affine_invariant(seed in any::<u64>(), d in 1usize..4, k in 1usize..4) {
        let mut r = rng(seed);
        let n = 40;
        let w = gaussian(n, d, &mut r);
        let v = gaussian(n, k, &mut r);
        // invertible mixing, diagonally dominant, plus offsets and a wide scale range
        let mix = |m: usize, r: &mut rand_chacha::ChaCha8Rng| {
            let mut t = gaussian(m, m, r).map(|x| 0.3 * x);
            for i in 0..m {
                t[(i, i)] += 2.0 * 10f64.powi(i as i32 * 2 - 2);
            }
            t
        };
        let (mw, mv) = (mix(d, &mut r), mix(k, &mut r));
        let w2 = w.matmul(&mw).unwrap().map(|x| x + 1e3);
        let v2 = v.matmul(&mv).unwrap().map(|x| x - 7.0);
        let cfg = CcaConfig::with_epsilon(1e-12).unwrap();
        let a = cca_stable(&w, &v, &cfg).unwrap();
        let b = cca_stable(&w2, &v2, &cfg).unwrap();
        prop_assert_eq!(a.n_components(), b.n_components());
        for (x, y) in a.rho.iter().zip(&b.rho) {
            prop_assert!((x - y).abs() <= 1e-6, "{:?} vs {:?}", a.rho, b.rho);
        }
    }

    #[test]
    fn rank_deficient_inputs_are_handled(
        seed in any::<u64>(),
        n in 2usize..12,
        d in 1usize..8,
        k in 1usize..4,
        dup in any::<bool>(),
        constant in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let mut w = gaussian(n, d, &mut r);
        let v = gaussian(n, k, &mut r);
        let mut cols: Vec<Vec<f64>> = (0..d).map(|j| w.column(j)).collect();
        if dup {
            cols.push(cols[0].clone());
        }
        if constant {
            cols.push(vec![3.5; n]);
        }
        w = Matrix::from_columns(&cols).unwrap();
        let res = cca_stable(&w, &v, &CcaConfig::default()).unwrap();
        check_invariants(&w, &v, &res)?;
        if constant {
            let row = res.a.row(w.cols() - 1);
            prop_assert!(row.iter().all(|&x| x == 0.0));
        }
        if dup {
            // at most one of the two identical columns carries weight
            let both = res.a.row(0).iter().any(|&x| x != 0.0) && res.a.row(d).iter().any(|&x| x != 0.0);
            prop_assert!(!both);
        }
    }
}

#[test]
fn seeded_8x3_by_8x2_matches_oracle() {
    let mut r = rng(20150101);
    let w = gaussian(8, 3, &mut r).centered();
    let v = gaussian(8, 2, &mut r).centered();
    let oracle = cca_oracle(&w, &v).unwrap();
    let res = cca_stable(&w, &v, &CcaConfig::default()).unwrap();
    assert_eq!(res.n_components(), 2);
    for (a, b) in res.rho.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", res.rho, oracle);
    }
}

#[test]
fn f32_instantiation_tracks_f64() {
    let mut r = rng(3);
    let w = gaussian(30, 3, &mut r);
    let v = gaussian(30, 2, &mut r);
    let lo = |m: &Matrix<f64>| Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|&x| x as f32).collect()).unwrap();
    let a = cca_stable(&w, &v, &CcaConfig::default()).unwrap();
    let b = cca_stable(&lo(&w), &lo(&v), &CcaConfig::default()).unwrap();
    for (x, y) in a.rho.iter().zip(&b.rho) {
        assert!((x - *y as f64).abs() < 1e-4);
    }
}
