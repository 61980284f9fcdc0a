use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::action::ActionFields;
use super::V1Error;
use crate::report::ConditionReport;
use crate::symexpr::{sample_values, DomainKind, EvalError, SampleOptions, TIME};

pub const FIRST_ORDER_CONDITION_IDS: [&str; 5] =
    ["antisymmetry", "jacobi", "transport", "curl", "gradient"];

#[derive(Debug, Clone)]
pub struct FirstOrderCheckOptions {
    pub sample: SampleOptions,
    pub tol: f64,
    /// Sampled time interval.
    pub t_range: (f64, f64),
    /// Central-difference step in `t` and `x`.
    pub fd_step: f64,
}

impl Default for FirstOrderCheckOptions {
    fn default() -> Self {
        FirstOrderCheckOptions {
            sample: SampleOptions::default().with_samples(8),
            tol: 1e-5,
            t_range: (0.0, 1.0),
            fd_step: 1e-4,
        }
    }
}

fn as_eval(e: V1Error) -> EvalError {
    match e {
        V1Error::Eval(e) => e,
        other => EvalError::Domain {
            kind: DomainKind::NonFinite,
            expr: other.to_string(),
        },
    }
}

fn shifted(x: &[f64], k: usize, d: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += d;
    y
}

/// Residuals at one point, in `FIRST_ORDER_CONDITION_IDS` order.
fn residuals_at(action: &dyn ActionFields, t: f64, x: &[f64], h: f64) -> Result<[f64; 5], V1Error> {
    let n = action.dim();
    let om = action.omega(t, x)?;
    let antisym = (&om + om.transpose()).amax();

    let mut d_om = Vec::with_capacity(n);
    let mut d_j = Vec::with_capacity(n);
    let mut d_h = DVector::zeros(n);
    for k in 0..n {
        let (xp, xm) = (shifted(x, k, h), shifted(x, k, -h));
        d_om.push((action.omega(t, &xp)? - action.omega(t, &xm)?) / (2.0 * h));
        let (jp, hp) = action.j_and_h(t, &xp)?;
        let (jm, hm) = action.j_and_h(t, &xm)?;
        d_j.push((jp - jm) / (2.0 * h));
        d_h[k] = (hp - hm) / (2.0 * h);
    }

    let mut jacobi: f64 = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let s = d_om[a][(b, c)] + d_om[b][(c, a)] + d_om[c][(a, b)];
                jacobi = jacobi.max(s.abs());
            }
        }
    }

    let f = action.field(t, x)?;
    let df = action.field_jacobian(t, x)?;
    let dt_om = (action.omega(t + h, x)? - action.omega(t - h, x)?) / (2.0 * h);
    let mut lie: DMatrix<f64> = dt_om + df.transpose() * &om + &om * &df;
    for (k, dk) in d_om.iter().enumerate() {
        lie += dk * f[k];
    }
    let transport = lie.amax();

    let mut curl: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            curl = curl.max((d_j[a][b] - d_j[b][a] - om[(a, b)]).abs());
        }
    }
    let dt_j = (action.j_and_h(t + h, x)?.0 - action.j_and_h(t - h, x)?.0) / (2.0 * h);
    let gradient = (d_h - &om * f + dt_j).amax();
    Ok([antisym, jacobi, transport, curl, gradient])
}

/// Finite-difference checks of the first-order multiplier identities at
/// seeded random points.
pub fn check_first_order_conditions(
    action: &dyn ActionFields,
    opts: &FirstOrderCheckOptions,
) -> Result<ConditionReport, V1Error> {
    let n = action.dim();
    let mut vars = vec![TIME.to_string()];
    vars.extend((0..n).map(|k| format!("x{}", k + 1)));
    let mut sample = opts.sample.clone();
    sample.sampling = sample
        .sampling
        .with_interval(TIME, opts.t_range.0, opts.t_range.1);
    let rows = sample_values(&vars, &sample, |p| {
        residuals_at(action, p[0], &p[1..], opts.fd_step).map_err(as_eval)
    })?;
    let mut report = ConditionReport::default();
    for (i, id) in FIRST_ORDER_CONDITION_IDS.iter().enumerate() {
        let mut worst = (0.0f64, BTreeMap::new());
        for (r, point, _) in &rows {
            if r[i] > worst.0 || r[i].is_nan() {
                worst = (
                    r[i],
                    vars.iter().cloned().zip(point.iter().copied()).collect(),
                );
            }
        }
        report.push(id, worst.0, opts.tol, worst.1);
    }
    Ok(report)
}
