//! Randomized structural checks for the numeric kernels and wire formats.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use ncreal::freepoly::{DeltaMatrix, FreePoly};
use ncreal::json::FreePolyJson;
use ncreal::linalg::{eye, svd, CMat};
use ncreal::mattuple::{membership, op_norm, MatrixTuple};

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn cmat(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(cplx(), rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn tuple(d: usize, n: usize) -> impl Strategy<Value = MatrixTuple> {
    prop::collection::vec(cmat(n, n), d).prop_map(|mats| MatrixTuple::new(mats).unwrap())
}

fn unitary_defect(q: &CMat) -> f64 {
    let p = q.adjoint() * q;
    (&p - eye(p.nrows())).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_factors_random_matrices(
        (rows, cols, m) in (1usize..=6, 1usize..=6)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), cmat(r, c)))
    ) {
        let dec = svd(&m);
        prop_assert!(unitary_defect(&dec.u) < 1e-12 * (rows + 1) as f64);
        prop_assert!(unitary_defect(&dec.v) < 1e-12 * (cols + 1) as f64);
        for w in dec.sv.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(dec.sv.iter().all(|s| *s >= 0.0 && s.is_finite()));
        let mut sigma = CMat::zeros(rows, cols);
        for (i, s) in dec.sv.iter().enumerate() {
            sigma[(i, i)] = Complex64::from(*s);
        }
        let err = (&dec.u * sigma * dec.v.adjoint() - &m).norm();
        prop_assert!(err < 1e-12 * (1.0 + m.norm()) * (rows.max(cols) + 1) as f64);
    }

    #[test]
    fn op_norm_is_submultiplicative_and_unitarily_invariant(
        (n, a, b) in (1usize..=5)
            .prop_flat_map(|n| (Just(n), cmat(n, n), cmat(n, n)))
    ) {
        let _ = n;
        let na = op_norm(&a).unwrap();
        let nb = op_norm(&b).unwrap();
        let nab = op_norm(&(&a * &b)).unwrap();
        prop_assert!(nab <= na * nb + 1e-10 * (1.0 + na * nb));
        let u = svd(&a).u;
        let rotated = op_norm(&(&u * &b)).unwrap();
        prop_assert!((rotated - nb).abs() < 1e-10 * (1.0 + nb));
    }

    #[test]
    fn free_poly_survives_the_wire_format(
        (d, raw) in (1usize..=3).prop_flat_map(|d| {
            let term = (prop::collection::vec(1u8..=d as u8, 0..=3), cplx());
            (Just(d), prop::collection::vec(term, 0..=5))
        })
    ) {
        let p = FreePoly::from_terms(
            d,
            raw.iter()
                .map(|(w, c)| (ncreal::freepoly::Word::from_letters(w.clone()).unwrap(), *c))
                .collect::<Vec<_>>(),
        ).unwrap();
        let text = serde_json::to_string(&FreePolyJson::from(&p)).unwrap();
        let parsed: FreePolyJson = serde_json::from_str(&text).unwrap();
        let q = FreePoly::try_from(&parsed).unwrap();
        prop_assert_eq!(q.num_terms(), p.num_terms());
        for (w, c) in p.terms() {
            prop_assert_eq!(q.coeff(w), *c);
        }
    }

    #[test]
    fn membership_report_is_internally_consistent(
        (d, n, x, scale) in (1usize..=2, 1usize..=3)
            .prop_flat_map(|(d, n)| (Just(d), Just(n), tuple(d, n), 0.2f64..2.0))
    ) {
        let _ = n;
        let delta = DeltaMatrix::polydisk(d).unwrap();
        let x = x.scale(scale);
        let report = membership(&delta, &x).unwrap();
        prop_assert_eq!(report.member, report.norm < 1.0 - 1e-10);
        prop_assert!((report.margin - (1.0 - report.norm)).abs() < 1e-15);
        if report.member {
            prop_assert!(report.margin > 0.0);
        }
    }

    #[test]
    fn poly_eval_respects_direct_sums(
        (p, x, y) in (1usize..=2).prop_flat_map(|d| {
            let term = (prop::collection::vec(1u8..=d as u8, 0..=3), cplx());
            let poly = prop::collection::vec(term, 0..=4).prop_map(move |raw| {
                FreePoly::from_terms(
                    d,
                    raw.into_iter()
                        .map(|(w, c)| (ncreal::freepoly::Word::from_letters(w).unwrap(), c))
                        .collect::<Vec<_>>(),
                ).unwrap()
            });
            (poly, tuple(d, 2), tuple(d, 3))
        })
    ) {
        let joined = x.direct_sum(&y).unwrap();
        let whole = p.eval(&joined).unwrap();
        let px = p.eval(&x).unwrap();
        let py = p.eval(&y).unwrap();
        let mut blocks = CMat::zeros(5, 5);
        blocks.view_mut((0, 0), (2, 2)).copy_from(&px);
        blocks.view_mut((2, 2), (3, 3)).copy_from(&py);
        prop_assert!((whole - blocks).norm() < 1e-12);
    }
}
