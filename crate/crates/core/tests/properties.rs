use cosetica_core::eval::amari_index;
use cosetica_core::expm::matrix_exp;
use cosetica_core::moments::sample_kurtosis;
use cosetica_core::tensor::{build_p, build_p_tilde, build_t, cs, cs_inv, kron};
use cosetica_core::{estimate_moments, Mat, SignalMatrix};
use proptest::prelude::*;

fn square(max_n: usize) -> impl Strategy<Value = Mat> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, n * n)
            .prop_map(move |v| Mat::from_vec(n, n, v).unwrap())
    })
}

proptest! {
    #[test]
    fn cs_round_trips(a in square(8)) {
        prop_assert_eq!(cs_inv(&cs(&a).unwrap()), a);
    }

    #[test]
    fn intertwiner_transposes_and_is_an_involution(a in square(8)) {
        let t = build_t(a.rows()).unwrap().matrix;
        let v = cs(&a).unwrap();
        prop_assert_eq!(t.mul_vec(v.as_slice()), cs(&a.transpose()).unwrap().into_vec());
        prop_assert_eq!(&t * &t, Mat::identity(t.rows()));
    }

    #[test]
    fn intertwiner_swaps_kronecker_factors(x in square(6)) {
        let n = x.rows();
        let t = build_t(n).unwrap().matrix;
        let lhs = &(&t * &kron(&Mat::identity(n), &x)) * &t;
        prop_assert_eq!(lhs, kron(&x, &Mat::identity(n)));
    }

    #[test]
    fn selector_complements_the_diagonal_projection(n in 1usize..7) {
        let p = build_p(n).unwrap().matrix;
        let sel = build_p_tilde(n).unwrap().matrix;
        prop_assert_eq!(&sel.transpose() * &sel, &Mat::identity(n * n) - &p);
        prop_assert_eq!(&sel * &sel.transpose(), Mat::identity(n * n - n));
        prop_assert_eq!(&p * &p, p);
    }

    #[test]
    fn exponential_inverts_with_negation(d in square(6)) {
        let norm = d.frobenius_norm();
        let d = if norm > 1.0 { d.scale(1.0 / norm) } else { d };
        let prod = &matrix_exp(&d).unwrap() * &matrix_exp(&d.scale(-1.0)).unwrap();
        prop_assert!(prod.max_abs_diff(&Mat::identity(d.rows())) < 1e-12);
    }

    #[test]
    fn amari_ignores_row_scaling_and_order(
        g in prop::collection::vec(0.1f64..5.0, 16),
        scales in prop::collection::vec(0.01f64..100.0, 4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let c = Mat::from_vec(4, 4, g).unwrap();
        let a = Mat::identity(4);
        let dp = Mat::from_fn(4, 4, |i, j| if perm[i] == j { scales[i] } else { 0.0 });
        let base = amari_index(&c, &a).unwrap();
        let moved = amari_index(&(&dp * &c), &a).unwrap();
        prop_assert!((base - moved).abs() < 1e-12, "{} {}", base, moved);
    }

    #[test]
    fn moments_are_scale_covariant(
        data in prop::collection::vec(-3.0f64..3.0, 3 * 64),
        scale in 0.001f64..1000.0,
    ) {
        let x = SignalMatrix::new(Mat::from_vec(3, 64, data).unwrap()).unwrap();
        let scaled = x.transform(&Mat::diag(&[scale, 1.0, 1.0])).unwrap();
        let (k, ks) = (sample_kurtosis(&x).unwrap(), sample_kurtosis(&scaled).unwrap());
        prop_assert!((k[0] - ks[0]).abs() <= 1e-12 * k[0]);
        let m = estimate_moments(&x).unwrap();
        for i in 0..3 {
            prop_assert!((m.r3[(i, i)] - m.kappa[i]).abs() <= 1e-12 * m.kappa[i]);
            prop_assert_eq!(&m.u0[i], &m.u0[i].transpose());
            prop_assert_eq!(&m.u2[i], &m.u2[i].transpose());
        }
    }
}
