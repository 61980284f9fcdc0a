use varinverse_core::symexpr::{equiv_random, parse, Expr, SampleOptions};
use varinverse_core::variational2::{
    build_lagrangian, check_1d_field, check_multiplier, euler_lagrange, search_multiplier,
    solve_1d_multiplier, Ansatz, CheckOptions, Multiplier, SearchOutcome, SecondOrderSystem,
};
use varinverse_core::verifier::{certify, CertifyOptions, SecondOrderDensity, SecondOrderTarget};

fn dissipative() -> SecondOrderSystem {
    SecondOrderSystem::parse(
        &["x", "y"],
        &[("alpha", 0.3)],
        &["x + alpha*dx", "y + alpha*dy"],
    )
    .unwrap()
}

fn magnetic() -> SecondOrderSystem {
    SecondOrderSystem::parse(
        &["x", "y"],
        &[("alpha", 0.3), ("beta", 0.7)],
        &["alpha*dx - beta*dy", "beta*dx + alpha*dy"],
    )
    .unwrap()
}

/// `euler_lagrange(L) + h(q̈ − f)` for every component.
fn el_defect(sys: &SecondOrderSystem, l: &Expr, h: &Multiplier) -> Vec<Expr> {
    let env = sys.env();
    let el = euler_lagrange(l, env);
    let acc = env.accelerations();
    (0..sys.dim())
        .map(|i| {
            let mut terms = vec![el[i].clone()];
            for (j, (a, f)) in acc.iter().zip(sys.forces()).enumerate() {
                let eq = Expr::add(vec![Expr::sym(a), Expr::neg(f.clone())]);
                terms.push(Expr::mul(vec![h.get(i, j).clone(), eq]));
            }
            Expr::add(terms).simplify()
        })
        .collect()
}

#[test]
fn dissipative_search_build_certify() {
    let sys = dissipative();
    let opts = CheckOptions::default();
    let SearchOutcome::Found(found) = search_multiplier(&sys, Ansatz::ScaledTime, &opts).unwrap()
    else {
        panic!("no multiplier");
    };
    let lag = build_lagrangian(&sys, &found.multiplier, &opts).unwrap();
    for d in el_defect(&sys, &lag.lagrangian, &found.multiplier) {
        let eq = equiv_random(
            &d,
            &Expr::zero(),
            sys.env(),
            1e-8,
            &SampleOptions::default(),
        )
        .unwrap();
        assert!(eq.equivalent, "{d}: {eq:?}");
    }
    let density = SecondOrderDensity::new(&lag.lagrangian, sys.env()).unwrap();
    let target = SecondOrderTarget::new(&sys, &found.multiplier).unwrap();
    let rep = certify(&density, &target, &CertifyOptions::default()).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn magnetic_multiplier_passes_and_builds() {
    let sys = magnetic();
    let h = Multiplier::parse(
        sys.env(),
        &[
            vec!["2*dx/(dx^2 + dy^2)", "2*dy/(dx^2 + dy^2)"],
            vec!["2*dy/(dx^2 + dy^2)", "-2*dx/(dx^2 + dy^2)"],
        ],
    )
    .unwrap();
    let opts = CheckOptions::default();
    let r = check_multiplier(&sys, &h, &opts).unwrap();
    assert!(r.all_pass(), "{r:?}");
    let lag = build_lagrangian(&sys, &h, &opts).unwrap();
    let density = SecondOrderDensity::new(&lag.lagrangian, sys.env()).unwrap();
    let target = SecondOrderTarget::new(&sys, &h).unwrap();
    let copts = CertifyOptions {
        trajectories: 1,
        ..Default::default()
    };
    let rep = certify(&density, &target, &copts).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn douglas_is_obstructed_for_every_ansatz() {
    let sys = SecondOrderSystem::parse(&["x", "y"], &[], &["-dy", "-y"]).unwrap();
    for a in Ansatz::ALL {
        match search_multiplier(&sys, a, &CheckOptions::default()).unwrap() {
            SearchOutcome::Obstructed(o) => {
                assert_eq!(o.to_string(), "Eq19→h12=0; Eq11→h11=0; det=0")
            }
            other => panic!("{a:?}: {other:?}"),
        }
    }
}

#[test]
fn one_dimensional_fields_for_several_initial_data() {
    let sys = SecondOrderSystem::parse(&["q"], &[("alpha", 0.3)], &["alpha*dq + q"]).unwrap();
    for h0 in ["1", "1 + q^2", "exp(dq)"] {
        let h0 = parse(h0, sys.env()).unwrap().simplify();
        let field = solve_1d_multiplier(&sys, &h0, 1.0, 1000).unwrap();
        let r = check_1d_field(&sys, &field, &CheckOptions::new(16, 1e-6, 42)).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }
}
