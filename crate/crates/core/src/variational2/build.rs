//! Lagrangian reconstruction `L = K + l_i q̇^i + l_0` along homotopy rays.

use std::collections::BTreeMap;

use super::conditions::CheckOptions;
use super::system::{a_matrix, ExprMatrix, Multiplier, SecondOrderSystem};
use super::V2Error;
use crate::symexpr::{
    integrate_unit, integrate_unit_or_node, max_abs, point_rng, scale_args, Expr, SymbolEnv,
    UnitIntegral, TIME,
};

const VEL_SCALE: &str = "__u";
const COORD_SCALE: &str = "__a";

/// Velocity part of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinetic {
    pub k: Expr,
    /// Start of the velocity homotopy path.
    pub base_velocity: Vec<f64>,
    pub closed_form: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSO {
    pub k: Expr,
    pub l: Vec<Expr>,
    pub l0: Expr,
    pub lagrangian: Expr,
    pub base_velocity: Vec<f64>,
    /// Some part is an unevaluated integral, computed by quadrature.
    pub numeric_callable: bool,
}

fn verify(
    what: impl Into<String>,
    residuals: &[Expr],
    env: &SymbolEnv,
    opts: &CheckOptions,
) -> Result<(f64, BTreeMap<String, f64>), V2Error> {
    let m = max_abs(residuals, env, &opts.sample)?;
    if m.max.is_finite() && m.max < opts.tol {
        Ok((m.max, m.witness))
    } else {
        Err(V2Error::Verification {
            what: what.into(),
            residual: m.max,
            witness: m.witness,
        })
    }
}

fn check_velocity_free(
    what: &str,
    exprs: &[Expr],
    base: &[f64],
    sys: &SecondOrderSystem,
    opts: &CheckOptions,
) -> Result<Vec<Expr>, V2Error> {
    let pinned: Vec<Expr> = exprs.iter().map(|e| at_velocity(sys, e, base)).collect();
    let diffs: Vec<Expr> = exprs
        .iter()
        .zip(&pinned)
        .map(|(e, p)| Expr::sub(e.clone(), p.clone()))
        .collect();
    let m = max_abs(&diffs, sys.env(), &opts.sample)?;
    if m.max.is_finite() && m.max < opts.tol {
        Ok(pinned)
    } else {
        Err(V2Error::VelocityDependence {
            what: what.into(),
            residual: m.max,
            witness: m.witness,
        })
    }
}

fn at_velocity(sys: &SecondOrderSystem, e: &Expr, v: &[f64]) -> Expr {
    let vel = sys.velocities();
    e.substitute(&|s| vel.iter().position(|n| n == s).map(|i| Expr::Num(v[i])))
}

/// `(1 − u) Δᵀ h(t, q, v₀ + uΔ) Δ` with `Δ = q̇ − v₀`.
fn kinetic_integrand(sys: &SecondOrderSystem, h: &Multiplier, base: &[f64]) -> Expr {
    let n = sys.dim();
    let vel = sys.velocities();
    let u = Expr::sym(VEL_SCALE);
    let delta: Vec<Expr> = (0..n)
        .map(|i| Expr::sub(Expr::sym(&vel[i]), Expr::Num(base[i])))
        .collect();
    let path = |e: &Expr| {
        e.substitute(&|s| {
            vel.iter().position(|n| n == s).map(|i| {
                Expr::add(vec![
                    Expr::Num(base[i]),
                    Expr::mul(vec![u.clone(), delta[i].clone()]),
                ])
            })
        })
    };
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            terms.push(Expr::mul(vec![
                delta[i].clone(),
                delta[j].clone(),
                path(h.get(i, j)),
            ]));
        }
    }
    Expr::mul(vec![Expr::sub(Expr::one(), u), Expr::add(terms)])
}

/// Whether some entry of `h` fails to evaluate at `q̇ = base` for seeded
/// `(t, q)` samples.
fn singular_at(sys: &SecondOrderSystem, h: &Multiplier, base: &[f64], opts: &CheckOptions) -> bool {
    let vel = sys.velocities();
    let params = sys.env().parameters();
    let mut free = vec![TIME.to_string()];
    free.extend(sys.coordinates());
    (0..8u64).any(|p| {
        let mut rng = point_rng(opts.sample.seed, p);
        let point: BTreeMap<String, f64> = free
            .iter()
            .map(|n| (n.clone(), opts.sample.sampling.draw(n, &mut rng)))
            .collect();
        let lookup = |s: &str| {
            vel.iter()
                .position(|n| n == s)
                .map(|i| base[i])
                .or_else(|| point.get(s).copied())
                .or_else(|| params.get(s).copied())
        };
        h.entries()
            .iter()
            .flatten()
            .any(|e| !matches!(e.eval(&lookup), Ok(v) if v.is_finite()))
    })
}

/// `K = ∫₀¹ (1 − u) Δᵀ h(t, q, v₀ + uΔ) Δ du`, whose velocity Hessian is `h`.
///
/// The path starts at the origin unless `h` is singular there or the
/// integral diverges, in which case it starts at `v₀ = (1, …, 1)`.
pub fn build_k(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    opts: &CheckOptions,
) -> Result<Kinetic, V2Error> {
    h.check_dim(sys)?;
    let n = sys.dim();
    let origin = vec![0.0; n];
    let integrand = kinetic_integrand(sys, h, &origin);
    let from_origin = if singular_at(sys, h, &origin, opts) {
        None
    } else {
        match integrate_unit(&integrand, VEL_SCALE) {
            Ok(k) => Some((k, true)),
            Err(UnitIntegral::NotPolynomial) => {
                Some((Expr::integral(VEL_SCALE, integrand.simplify()), false))
            }
            Err(UnitIntegral::Divergent) => None,
        }
    };
    let (k, closed_form, base_velocity) = match from_origin {
        Some((k, closed)) => (k, closed, origin),
        None => {
            let base = vec![1.0; n];
            let (k, closed) = integrate_unit_or_node(&kinetic_integrand(sys, h, &base), VEL_SCALE);
            (k, closed, base)
        }
    };

    let vel = sys.velocities();
    let mut residuals = Vec::new();
    for i in 0..n {
        let ki = k.diff(&vel[i]);
        for j in i..n {
            residuals.push(Expr::sub(ki.diff(&vel[j]), h.get(i, j).clone()));
        }
    }
    verify("velocity Hessian of K", &residuals, sys.env(), opts)?;
    Ok(Kinetic {
        k,
        base_velocity,
        closed_form,
    })
}

/// `L_ik = ∂²K/∂q̇^i∂q^k − ∂²K/∂q̇^k∂q^i + A_ik`, checked to be velocity-free
/// and returned with the velocities pinned to the base point.
pub fn build_l_ik(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    kin: &Kinetic,
    opts: &CheckOptions,
) -> Result<ExprMatrix, V2Error> {
    let n = sys.dim();
    let q = sys.coordinates();
    let v = sys.velocities();
    let a = a_matrix(h, &sys.velocity_jacobian());
    let kv: Vec<Expr> = v.iter().map(|s| kin.k.diff(s)).collect();
    let mut flat = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            flat.push(if i == k {
                Expr::zero()
            } else {
                Expr::add(vec![
                    kv[i].diff(&q[k]),
                    Expr::neg(kv[k].diff(&q[i])),
                    a[i][k].clone(),
                ])
            });
        }
    }
    let pinned = check_velocity_free("L_ik", &flat, &kin.base_velocity, sys, opts)?;
    Ok(pinned.chunks(n).map(<[Expr]>::to_vec).collect())
}

/// `l_i = ∫₀¹ a q^k L_ki(t, a q) da`, verified against `∂_i l_k − ∂_k l_i = L_ik`.
pub fn build_l(
    sys: &SecondOrderSystem,
    l_ik: &ExprMatrix,
    opts: &CheckOptions,
) -> Result<Vec<Expr>, V2Error> {
    let n = sys.dim();
    let q = sys.coordinates();
    let a = Expr::sym(COORD_SCALE);
    let l: Vec<Expr> = (0..n)
        .map(|i| {
            let terms: Vec<Expr> = (0..n)
                .map(|k| {
                    Expr::mul(vec![
                        a.clone(),
                        Expr::sym(&q[k]),
                        scale_args(&l_ik[k][i], &q, &a),
                    ])
                })
                .collect();
            integrate_unit_or_node(&Expr::add(terms), COORD_SCALE).0
        })
        .collect();
    let mut residuals = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            residuals.push(Expr::add(vec![
                l[k].diff(&q[i]),
                Expr::neg(l[i].diff(&q[k])),
                Expr::neg(l_ik[i][k].clone()),
            ]));
        }
    }
    verify("curl of l", &residuals, sys.env(), opts)?;
    Ok(l)
}

/// `l_0 = ∫₀¹ q^k m_k(t, a q) da` with
/// `m_i = h_ij f^j − ∂_iK + ∂_t∂_{q̇^i}K + q̇^j ∂_j∂_{q̇^i}K − q̇^j L_ij + ∂_t l_i`.
pub fn build_l0(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    kin: &Kinetic,
    l_ik: &ExprMatrix,
    l: &[Expr],
    opts: &CheckOptions,
) -> Result<Expr, V2Error> {
    let n = sys.dim();
    let q = sys.coordinates();
    let v = sys.velocities();
    let f = sys.forces();
    let m: Vec<Expr> = (0..n)
        .map(|i| {
            let kvi = kin.k.diff(&v[i]);
            let mut terms = vec![
                Expr::neg(kin.k.diff(&q[i])),
                kvi.diff(TIME),
                l[i].diff(TIME),
            ];
            for j in 0..n {
                terms.push(Expr::mul(vec![h.get(i, j).clone(), f[j].clone()]));
                terms.push(Expr::mul(vec![Expr::sym(&v[j]), kvi.diff(&q[j])]));
                terms.push(Expr::neg(Expr::mul(vec![
                    Expr::sym(&v[j]),
                    l_ik[i][j].clone(),
                ])));
            }
            Expr::add(terms)
        })
        .collect();
    let m = check_velocity_free("m_i", &m, &kin.base_velocity, sys, opts)?;
    let a = Expr::sym(COORD_SCALE);
    let body = Expr::add(
        (0..n)
            .map(|k| Expr::mul(vec![Expr::sym(&q[k]), scale_args(&m[k], &q, &a)]))
            .collect(),
    );
    let l0 = integrate_unit_or_node(&body, COORD_SCALE).0;
    let residuals: Vec<Expr> = (0..n)
        .map(|i| Expr::sub(l0.diff(&q[i]), m[i].clone()))
        .collect();
    verify("gradient of l_0", &residuals, sys.env(), opts)?;
    Ok(l0)
}

/// Assembles `L = K + l_i q̇^i + l_0` and checks `EL(L) + h(q̈ − f) ≡ 0`.
pub fn build_lagrangian(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    opts: &CheckOptions,
) -> Result<LagrangianSO, V2Error> {
    let kin = build_k(sys, h, opts)?;
    let l_ik = build_l_ik(sys, h, &kin, opts)?;
    let l = build_l(sys, &l_ik, opts)?;
    let l0 = build_l0(sys, h, &kin, &l_ik, &l, opts)?;
    let v = sys.velocities();
    let mut terms = vec![kin.k.clone(), l0.clone()];
    for (li, vi) in l.iter().zip(&v) {
        terms.push(Expr::mul(vec![li.clone(), Expr::sym(vi)]));
    }
    let lagrangian = Expr::add(terms);

    let el = euler_lagrange(&lagrangian, sys.env());
    let acc = sys.env().accelerations();
    let residuals: Vec<Expr> = (0..sys.dim())
        .map(|i| {
            let mut terms = vec![el[i].clone()];
            for (j, a) in acc.iter().enumerate() {
                terms.push(Expr::mul(vec![
                    h.get(i, j).clone(),
                    Expr::sub(Expr::sym(a), sys.forces()[j].clone()),
                ]));
            }
            Expr::add(terms)
        })
        .collect();
    verify("Euler-Lagrange postcondition", &residuals, sys.env(), opts)?;

    let numeric_callable =
        kin.k.has_integral() || l0.has_integral() || l.iter().any(Expr::has_integral);
    Ok(LagrangianSO {
        k: kin.k,
        l,
        l0,
        lagrangian,
        base_velocity: kin.base_velocity,
        numeric_callable,
    })
}

/// `∂L/∂q^i − ∂²L/∂t∂q̇^i − q̇^j ∂²L/∂q^j∂q̇^i − q̈^j ∂²L/∂q̇^j∂q̇^i`.
pub fn euler_lagrange(l: &Expr, env: &SymbolEnv) -> Vec<Expr> {
    let q = env.coordinates();
    let v = env.velocities();
    let acc = env.accelerations();
    (0..env.dim())
        .map(|i| {
            let lv = l.diff(&v[i]);
            let mut terms = vec![l.diff(&q[i]), Expr::neg(lv.diff(TIME))];
            for j in 0..env.dim() {
                terms.push(Expr::neg(Expr::mul(vec![Expr::sym(&v[j]), lv.diff(&q[j])])));
                terms.push(Expr::neg(Expr::mul(vec![
                    Expr::sym(&acc[j]),
                    lv.diff(&v[j]),
                ])));
            }
            Expr::add(terms)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{equiv_random, parse};

    fn opts() -> CheckOptions {
        CheckOptions::default()
    }

    fn same(a: &Expr, b: &str, env: &SymbolEnv) -> bool {
        let b = parse(b, env).unwrap().simplify();
        equiv_random(a, &b, env, 1e-9, &opts().sample)
            .unwrap()
            .equivalent
    }

    #[test]
    fn oscillator_lagrangian() {
        let sys = SecondOrderSystem::parse(&["q"], &[], &["-q"]).unwrap();
        let lag = build_lagrangian(&sys, &Multiplier::identity(1), &opts()).unwrap();
        assert_eq!(lag.k.to_string(), "0.5*dq^2");
        assert!(same(&lag.l0, "-q^2/2", sys.env()));
        assert!(same(&lag.lagrangian, "dq^2/2 - q^2/2", sys.env()));
        assert!(!lag.numeric_callable);
    }

    #[test]
    fn off_diagonal_constant_kinetic() {
        let sys = SecondOrderSystem::parse(&["x", "y"], &[], &["0", "0"]).unwrap();
        let h = Multiplier::from_f64(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let kin = build_k(&sys, &h, &opts()).unwrap();
        assert!(same(&kin.k, "dx*dy", sys.env()));
    }

    #[test]
    fn dissipative_pipeline() {
        let sys = SecondOrderSystem::parse(
            &["x", "y"],
            &[("alpha", 0.3)],
            &["x + alpha*dx", "y + alpha*dy"],
        )
        .unwrap();
        let h = Multiplier::parse(
            sys.env(),
            &[vec!["exp(-alpha*t)", "0"], vec!["0", "exp(-alpha*t)"]],
        )
        .unwrap();
        let lag = build_lagrangian(&sys, &h, &opts()).unwrap();
        assert!(lag.l.iter().all(Expr::is_zero));
        assert!(same(&lag.l0, "exp(-alpha*t)*(x^2 + y^2)/2", sys.env()));
    }

    #[test]
    fn constant_curl_potential() {
        let sys = SecondOrderSystem::parse(&["x", "y"], &[("b", 0.7)], &["b*dy", "-b*dx"]).unwrap();
        let lag = build_lagrangian(&sys, &Multiplier::identity(2), &opts()).unwrap();
        assert!(same(&lag.l[0], "-b*y/2", sys.env()), "{}", lag.l[0]);
        assert!(same(&lag.l[1], "b*x/2", sys.env()), "{}", lag.l[1]);
    }

    #[test]
    fn singular_multiplier_shifts_the_base_point() {
        let sys = SecondOrderSystem::parse(
            &["x", "y"],
            &[("alpha", 0.3), ("beta", 0.7)],
            &["alpha*dx - beta*dy", "beta*dx + alpha*dy"],
        )
        .unwrap();
        let h = Multiplier::parse(
            sys.env(),
            &[
                vec!["2*dx/(dx^2 + dy^2)", "2*dy/(dx^2 + dy^2)"],
                vec!["2*dy/(dx^2 + dy^2)", "-2*dx/(dx^2 + dy^2)"],
            ],
        )
        .unwrap();
        let lag = build_lagrangian(&sys, &h, &opts()).unwrap();
        assert_eq!(lag.base_velocity, vec![1.0, 1.0]);
        assert!(lag.numeric_callable);
        assert!(
            same(&lag.l0, "2*alpha*x - 2*beta*y", sys.env()),
            "{}",
            lag.l0
        );
    }

    #[test]
    fn euler_lagrange_of_gauge_term_vanishes() {
        let env = SymbolEnv::new(&["q"], &[]).unwrap();
        let el = euler_lagrange(&parse("dq*sin(q)", &env).unwrap().simplify(), &env);
        assert!(el[0].is_zero(), "{}", el[0]);
        let el = euler_lagrange(&parse("dq^2/2 - q^2/2", &env).unwrap().simplify(), &env);
        assert!(same(&el[0], "-(ddq + q)", &env));
    }
}
