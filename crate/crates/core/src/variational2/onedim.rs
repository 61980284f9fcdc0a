//! One-dimensional multipliers by characteristics.
//!
//! For `n = 1` the only nontrivial condition is `D̂h + h ∂f/∂q̇ = 0`. Along
//! a solution curve this reads `dh/dt = −(∂f/∂q̇) h`, so integrating the
//! equation backwards to `t = 0` and transporting the initial data solves it
//! everywhere the backward flow exists.

use std::collections::BTreeMap;

use super::conditions::{CheckOptions, CONDITION_IDS};
use super::system::SecondOrderSystem;
use super::V2Error;
use crate::ode::{step_count, Rk4};
use crate::report::ConditionReport;
use crate::symexpr::{sample_max, CompiledExpr, EvalError, Expr, SampleError, TIME};

const BLOWUP: f64 = 1e12;

/// Numeric multiplier field `h(t, q, q̇)` for a one-dimensional system.
#[derive(Debug, Clone)]
pub struct OneDimMultiplier {
    force: CompiledExpr,
    rate: CompiledExpr,
    h0: CompiledExpr,
    t_max: f64,
    dt: f64,
}

/// Prepares the characteristic solver. `h0` is a function of `(q, q̇)`;
/// evaluations use RK4 with at most `t_max / steps` per step.
pub fn solve_1d_multiplier(
    sys: &SecondOrderSystem,
    h0: &Expr,
    t_max: f64,
    steps: usize,
) -> Result<OneDimMultiplier, V2Error> {
    if sys.dim() != 1 {
        return Err(V2Error::Invalid(format!(
            "characteristics need a one-dimensional system, got {}",
            sys.dim()
        )));
    }
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return Err(V2Error::Invalid(
            "t_max must be positive and steps nonzero".into(),
        ));
    }
    let vars = sys.phase_variables();
    let params = sys.env().parameters();
    if h0.contains_symbol(TIME) {
        return Err(V2Error::Invalid("h0 must not depend on t".into()));
    }
    let f = &sys.forces()[0];
    Ok(OneDimMultiplier {
        force: CompiledExpr::new(f, &vars, params)?,
        rate: CompiledExpr::new(&f.diff(&sys.velocities()[0]), &vars, params)?,
        h0: CompiledExpr::new(h0, &vars, params)?,
        t_max,
        dt: t_max / steps as f64,
    })
}

impl OneDimMultiplier {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `h(t, q, q̇) = h0(q₀, q̇₀) · exp(−∫₀ᵗ ∂f/∂q̇ dτ)` along the solution
    /// through `(t, q, q̇)`.
    pub fn eval(&self, t: f64, q: f64, dq: f64) -> Result<f64, V2Error> {
        if t.abs() > self.t_max * (1.0 + 1e-12) {
            return Err(V2Error::Integration(format!(
                "t = {t} lies outside the solved range |t| <= {}",
                self.t_max
            )));
        }
        // y = (q, q̇, ∫ ∂f/∂q̇ dτ from t)
        let mut y = [q, dq, 0.0];
        let mut stack = Vec::with_capacity(32);
        let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
            let x = [s, y[0], y[1]];
            dy[0] = y[1];
            dy[1] = self.force.eval_with(&x, &mut stack)?;
            dy[2] = self.rate.eval_with(&x, &mut stack)?;
            Ok(())
        };
        let mut rk = Rk4::new(3);
        let n = step_count(t, 0.0, self.dt);
        if n > 0 {
            let h = -t / n as f64;
            for k in 0..n {
                rk.step(&mut rhs, t + k as f64 * h, &mut y, h)?;
                if !y.iter().all(|v| v.is_finite() && v.abs() < BLOWUP) {
                    return Err(V2Error::Integration(format!(
                        "characteristic through (t={t}, q={q}, dq={dq}) blew up at t={}",
                        t + (k + 1) as f64 * h
                    )));
                }
            }
        }
        let h0 = self.h0.eval(&[0.0, y[0], y[1]])?;
        Ok(h0 * y[2].exp())
    }
}

/// Condition report for a one-dimensional numeric field. The transport
/// residual `D̂h + h ∂f/∂q̇` is formed with central differences of step
/// `1e-4`; the conditions that are vacuous at `n = 1` report zero.
pub fn check_1d_field(
    sys: &SecondOrderSystem,
    field: &OneDimMultiplier,
    opts: &CheckOptions,
) -> Result<ConditionReport, V2Error> {
    const EPS: f64 = 1e-4;
    let vars = sys.phase_variables();
    let mut sample = opts.sample.clone();
    sample.sampling = sample
        .sampling
        .with_interval(TIME, EPS, field.t_max() - EPS);
    let residual = sample_max(&vars, &sample, |x| {
        let (t, q, dq) = (x[0], x[1], x[2]);
        let h = |t, q, dq| field.eval(t, q, dq).map_err(eval_error);
        let ht = (h(t + EPS, q, dq)? - h(t - EPS, q, dq)?) / (2.0 * EPS);
        let hq = (h(t, q + EPS, dq)? - h(t, q - EPS, dq)?) / (2.0 * EPS);
        let hv = (h(t, q, dq + EPS)? - h(t, q, dq - EPS)?) / (2.0 * EPS);
        let mut stack = Vec::new();
        let f = field.force.eval_with(x, &mut stack)?;
        let rate = field.rate.eval_with(x, &mut stack)?;
        Ok((ht + dq * hq + f * hv + rate * h(t, q, dq)?).abs())
    })
    .map_err(V2Error::from)?;
    let det = sample_max(&vars, &sample, |x| {
        field
            .eval(x[0], x[1], x[2])
            .map(|h| -h.abs())
            .map_err(eval_error)
    })
    .map_err(|e: SampleError| V2Error::from(e))?;

    let mut report = ConditionReport::default();
    for id in CONDITION_IDS {
        match id {
            "sym11" => report.push(id, residual.max, opts.tol, residual.witness.clone()),
            "det" => {
                let min_det = -det.max;
                report.conditions.push(crate::report::ConditionResult {
                    id: id.into(),
                    pass: min_det.is_finite() && min_det > opts.tol,
                    max_residual: min_det,
                    witness: det.witness.clone(),
                });
            }
            _ => report.push(id, 0.0, opts.tol, BTreeMap::new()),
        }
    }
    Ok(report)
}

fn eval_error(e: V2Error) -> EvalError {
    match e {
        V2Error::Eval(e) => e,
        other => EvalError::Domain {
            kind: crate::symexpr::DomainKind::NonFinite,
            expr: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    #[test]
    fn free_particle_transports_initial_data() {
        let sys = SecondOrderSystem::parse(&["q"], &[], &["0"]).unwrap();
        let h0 = parse("1 + q^2 + dq", sys.env()).unwrap().simplify();
        let field = solve_1d_multiplier(&sys, &h0, 1.0, 1000).unwrap();
        let (t, q, dq) = (0.7, 0.4, -1.3);
        let q0 = q - dq * t;
        let expect = 1.0 + q0 * q0 + dq;
        assert!((field.eval(t, q, dq).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn linear_friction_decays() {
        let sys = SecondOrderSystem::parse(&["q"], &[("alpha", 0.3)], &["alpha*dq"]).unwrap();
        let field = solve_1d_multiplier(&sys, &Expr::one(), 1.0, 1000).unwrap();
        let v = field.eval(0.8, 0.2, 0.5).unwrap();
        assert!((v - (-0.3f64 * 0.8).exp()).abs() < 1e-12);
        assert_eq!(field.eval(0.0, 0.2, 0.5).unwrap(), 1.0);
        assert!(field.eval(1.5, 0.2, 0.5).is_err());
    }

    #[test]
    fn field_passes_the_one_dimensional_conditions() {
        let sys = SecondOrderSystem::parse(&["q"], &[("alpha", 0.3)], &["alpha*dq + q"]).unwrap();
        let h0 = parse("exp(q*dq)", sys.env()).unwrap().simplify();
        let field = solve_1d_multiplier(&sys, &h0, 1.0, 1000).unwrap();
        let opts = CheckOptions::new(16, 1e-6, 7);
        let r = check_1d_field(&sys, &field, &opts).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }
}
