use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use varinverse_core::symexpr::{parse_with, Expr};
use varinverse_core::variational1::{quadratic_action, LinearSystem, SymplecticSeed};
use varinverse_core::verifier::{helmholtz_asymmetry, DiscreteTrajectory, FnEquation};

fn expr_string() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (1i32..6).prop_map(|k| k.to_string()),
        (1i32..5, 2i32..5).prop_map(|(a, b)| format!("({a}/{b})")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.prop_map(|a| format!("exp(({a})/8)")),
        ]
    })
}

fn parse(s: &str) -> Expr {
    parse_with(s, &|_| true).unwrap()
}

fn at(e: &Expr, x: f64, y: f64) -> f64 {
    e.eval(&|n| match n {
        "x" => Some(x),
        "y" => Some(y),
        _ => None,
    })
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplify_is_idempotent(s in expr_string()) {
        let once = parse(&s).simplify();
        prop_assert_eq!(once.simplify(), once);
    }

    #[test]
    fn display_round_trips(s in expr_string()) {
        let e = parse(&s).simplify();
        prop_assert_eq!(parse(&e.to_string()).simplify(), e);
    }

    #[test]
    fn simplify_and_expand_preserve_values(s in expr_string(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let e = parse(&s);
        let v = at(&e, x, y);
        prop_assert!(close(at(&e.simplify(), x, y), v, 1e-9));
        prop_assert!(close(at(&e.simplify().expand(), x, y), v, 1e-9));
    }

    #[test]
    fn derivative_matches_central_difference(s in expr_string(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = parse(&s).simplify();
        let d = e.diff("x").simplify();
        let h = 1e-5;
        let fd = (at(&e, x + h, y) - at(&e, x - h, y)) / (2.0 * h);
        let scale = at(&e, x, y).abs().max(1.0);
        prop_assert!((at(&d, x, y) - fd).abs() <= 1e-4 * scale.max(fd.abs()), "{} vs {}", at(&d, x, y), fd);
    }

    #[test]
    fn quadratic_b_is_symmetric(a in prop::collection::vec(-1.0f64..1.0, 16), j in prop::collection::vec(-1.0f64..1.0, 4)) {
        let a_rows: Vec<Vec<String>> = a.chunks(4).map(|r| r.iter().map(|v| format!("{v}")).collect()).collect();
        let a_refs: Vec<Vec<&str>> = a_rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let j_str: Vec<String> = j.iter().map(|v| format!("{v}")).collect();
        let j_refs: Vec<&str> = j_str.iter().map(String::as_str).collect();
        let lin = LinearSystem::parse(&["a", "b", "c", "d"], &[], &a_refs, &j_refs).unwrap();
        let grid: Vec<f64> = (0..=5).map(|k| k as f64 / 5.0).collect();
        let qa = quadratic_action(&lin, &SymplecticSeed::canonical(4).unwrap(), &grid, 1e-3).unwrap();
        for k in 0..grid.len() {
            let b = qa.sample(k).unwrap().b;
            prop_assert!((&b - b.transpose()).amax() <= 1e-10);
        }
    }

    #[test]
    fn helmholtz_separates_raw_and_multiplied(q0 in -2.0f64..2.0, p0 in -2.0f64..2.0, phase in 0.0f64..6.3) {
        let tr = DiscreteTrajectory::from_fn(0.0, 1e-2, 30, |t| {
            let (s, c) = (t + phase).sin_cos();
            DVector::from_vec(vec![q0 * c + p0 * s, p0 * c - q0 * s])
        })
        .unwrap();
        let raw = FnEquation::new(2, |_, x: &[f64], v: &[f64], _: &[f64]| {
            Ok(DVector::from_vec(vec![v[0] - x[1], v[1] + x[0]]))
        });
        let om = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let multiplied = FnEquation::new(2, move |_, x: &[f64], v: &[f64], _: &[f64]| {
            Ok(&om * DVector::from_vec(vec![v[0] - x[1], v[1] + x[0]]))
        });
        prop_assert!(helmholtz_asymmetry(&raw, &tr, 1e-6).unwrap() > 0.1);
        prop_assert!(helmholtz_asymmetry(&multiplied, &tr, 1e-6).unwrap() <= 1e-6);
    }
}
