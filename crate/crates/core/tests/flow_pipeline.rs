use varinverse_core::symexpr::{parse_with, Expr};
use varinverse_core::variational1::{
    check_first_order_conditions, quadratic_action, reduce_to_first_order, FirstOrderCheckOptions,
    FirstOrderSystem, FlowAction, FlowMap, LinearSystem, SymplecticSeed,
};
use varinverse_core::variational2::SecondOrderSystem;
use varinverse_core::verifier::{certify, CertifyOptions, FirstOrderTarget, RayDensity};

fn douglas_action() -> FlowAction {
    let sys = SecondOrderSystem::parse(&["x", "y"], &[], &["-dy", "-y"]).unwrap();
    let fo = reduce_to_first_order(&sys).unwrap();
    FlowAction::new(
        FlowMap::new(fo, 1e-3).unwrap(),
        SymplecticSeed::canonical(4).unwrap(),
    )
    .unwrap()
}

fn expr(s: &str) -> Expr {
    parse_with(s, &|_| true).unwrap().simplify()
}

#[test]
fn douglas_reduced_action_is_certified() {
    let fa = douglas_action();
    let r = check_first_order_conditions(&fa, &FirstOrderCheckOptions::default()).unwrap();
    assert!(r.all_pass(), "{r:?}");
    let rep = certify(
        &RayDensity::new(&fa),
        &FirstOrderTarget::new(&fa),
        &CertifyOptions::default(),
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.solution_residual <= 1e-4);
    assert!((rep.order_estimate.unwrap() - 2.0).abs() < 0.3);
}

#[test]
fn flow_and_closed_form_agree_for_linear_systems() {
    let lin = LinearSystem::parse(
        &["q", "p"],
        &[("w", 1.3)],
        &[vec!["0", "1"], vec!["-w^2", "-t/5"]],
        &["1", "0"],
    )
    .unwrap();
    let seed = SymplecticSeed::canonical(2).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let qa = quadratic_action(&lin, &seed, &grid, 1e-3).unwrap();
    let fa = FlowAction::new(
        FlowMap::new(lin.to_first_order().unwrap(), 1e-3).unwrap(),
        seed,
    )
    .unwrap();
    use varinverse_core::variational1::ActionFields;
    for &t in &[0.0, 0.35, 1.0] {
        let x = [0.4, -1.2];
        assert!((qa.omega(t, &x).unwrap() - fa.omega(t, &x).unwrap()).amax() < 1e-9);
    }
}

#[test]
fn gauge_changes_nothing_observable() {
    let plain = douglas_action();
    let gauged = plain.clone().with_gauge(&expr("t*x*p_x + y^2")).unwrap();
    let opts = CertifyOptions {
        trajectories: 1,
        helmholtz_eps: None,
        ..Default::default()
    };
    let a = certify(
        &RayDensity::new(&plain),
        &FirstOrderTarget::new(&plain),
        &opts,
    )
    .unwrap();
    let b = certify(
        &RayDensity::new(&gauged),
        &FirstOrderTarget::new(&gauged),
        &opts,
    )
    .unwrap();
    // dφ/dt telescopes only to second order for φ nonlinear in x
    let coarse = (a.solution_residual - b.solution_residual).abs();
    let fine = (a.refined_residual - b.refined_residual).abs();
    assert!(coarse < 1e-6 && fine < coarse / 3.0, "{a:?} {b:?}");
    assert!((a.perturbed_mismatch - b.perturbed_mismatch).abs() < 1e-6);
}

#[test]
fn nonlinear_action_exists_and_converges() {
    let sys = FirstOrderSystem::parse(&["q", "p"], &[("a", 0.25)], &["p", "-q - q^3/3 - a*p*q^2"])
        .unwrap();
    let fa = FlowAction::new(
        FlowMap::new(sys, 1e-3).unwrap(),
        SymplecticSeed::canonical(2).unwrap(),
    )
    .unwrap();
    let r = check_first_order_conditions(&fa, &FirstOrderCheckOptions::default()).unwrap();
    assert!(r.all_pass(), "{r:?}");
    let opts = CertifyOptions {
        trajectories: 1,
        dt: 0.02,
        tol: 1e-2,
        helmholtz_eps: None,
        ..Default::default()
    };
    let rep = certify(&RayDensity::new(&fa), &FirstOrderTarget::new(&fa), &opts).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!((rep.order_estimate.unwrap() - 2.0).abs() < 0.3, "{rep:?}");
}
