use koopact_core::adaptation::{adapt, AdaptationWindow, LiftedModelEstimate};
use koopact_core::lifting::ObservableDictionary;
use koopact_core::linalg::lambda_max;
use koopact_core::qp::{qp_solve, QpInstance, QpStatus};
use koopact_core::tightening::conformal_quantile;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qp_solution_satisfies_kkt(
        d in 2usize..6,
        seed in matrix(6, 6),
        rows in matrix(4, 6),
        g in prop::collection::vec(-2.0..2.0f64, 6),
        b in prop::collection::vec(0.0..1.0f64, 4),
    ) {
        let l = seed.view((0, 0), (d, d)).into_owned();
        let h = &l * l.transpose() + DMatrix::identity(d, d) * 0.1;
        let g = DVector::from_column_slice(&g[..d]);
        let a = rows.view((0, 0), (4, d)).into_owned();
        let b = DVector::from_column_slice(&b);
        let inst = QpInstance::new(h.clone(), g.clone())
            .with_box(DVector::from_element(d, -2.0), DVector::from_element(d, 2.0))
            .with_hard(a.clone(), b.clone());
        let r = qp_solve(&inst, 1e-9, 20_000).unwrap();
        prop_assert_eq!(r.status, QpStatus::Solved);
        let x = &r.x;
        prop_assert!((&a * x - &b).max() <= 1e-6);
        prop_assert!(x.amax() <= 2.0 + 1e-6);
        prop_assert!(r.hard_duals.min() >= -1e-8);
        let stationarity = &h * x + &g + a.transpose() * &r.hard_duals + &r.box_duals;
        prop_assert!(stationarity.amax() <= 1e-5, "stationarity {}", stationarity.amax());
        let slack = &b - &a * x;
        for i in 0..4 {
            prop_assert!((r.hard_duals[i] * slack[i]).abs() <= 1e-5);
        }
    }

    #[test]
    fn adaptation_never_increases_error_on_consistent_data(
        truth in matrix(3, 5),
        offset in matrix(3, 5),
        regs in matrix(5, 8),
    ) {
        let (p, m) = (3, 2);
        let mut window = AdaptationWindow::new(8, 1.0, p, m).unwrap();
        for j in 0..8 {
            let v = regs.column(j).into_owned();
            window.push(v.clone(), &truth * v).unwrap();
        }
        let g = window.gramian().unwrap();
        let c = DMatrix::identity(p, p);
        let est = LiftedModelEstimate::new(&truth + &offset, c, 1.0 / lambda_max(&g)).unwrap();
        let next = adapt(&est, &window).unwrap();
        let before = (est.w_hat() - &truth).norm();
        let after = (next.w_hat() - &truth).norm();
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-12);
        prop_assert_eq!(next.version(), est.version() + 1);
    }

    #[test]
    fn conformal_quantile_is_an_order_statistic(
        scores in prop::collection::vec(0.0..10.0f64, 1..80),
        chi in 0.001..0.5f64,
    ) {
        let q = conformal_quantile(&scores, chi).unwrap();
        prop_assert!(scores.contains(&q));
        let covered = scores.iter().filter(|s| **s <= q).count() as f64 / scores.len() as f64;
        prop_assert!(covered >= 1.0 - chi - 1e-12);
        let looser = conformal_quantile(&scores, (chi * 2.0).min(0.99)).unwrap();
        prop_assert!(looser <= q);
    }

    #[test]
    fn lifting_keeps_the_state_in_the_leading_block(
        x in prop::collection::vec(-3.0..3.0f64, 3),
        degree in 1usize..4,
        constant in any::<bool>(),
    ) {
        let dict = ObservableDictionary::polynomial(3, degree).unwrap().with_constant(constant);
        let x = DVector::from_column_slice(&x);
        let z = dict.encode(&x).unwrap();
        prop_assert_eq!(z.len(), dict.lifted_dim());
        prop_assert!((dict.selector() * z - x).amax() <= 1e-12);
    }
}
