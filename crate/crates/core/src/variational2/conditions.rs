use nalgebra::DMatrix;

use super::system::{a_matrix, b_matrix, d_hat, mat_mul, Multiplier, SecondOrderSystem};
use super::V2Error;
use crate::report::ConditionReport;
use crate::symexpr::{sample_max, CompiledExpr, Expr, SampleError, SampleOptions};

/// Condition identifiers, in report order.
pub const CONDITION_IDS: [&str; 7] = [
    "sym6", "grad6", "sym11", "vel13", "jacobi14", "alg19", "det",
];

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub sample: SampleOptions,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            sample: SampleOptions::default(),
            tol: 1e-8,
        }
    }
}

impl CheckOptions {
    pub fn new(samples: usize, tol: f64, seed: u64) -> Self {
        CheckOptions {
            sample: SampleOptions::default()
                .with_samples(samples)
                .with_seed(seed),
            tol,
        }
    }
}

/// Symbolic residuals of every algebraic/differential condition except the
/// determinant, keyed by condition id.
pub fn condition_residuals(
    sys: &SecondOrderSystem,
    h: &Multiplier,
) -> Vec<(&'static str, Vec<Expr>)> {
    let n = sys.dim();
    let q = sys.coordinates();
    let v = sys.velocities();
    let hm = h.entries();
    let f = sys.velocity_jacobian();

    let mut sym = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            sym.push(Expr::sub(hm[i][j].clone(), hm[j][i].clone()));
        }
    }

    let mut grad = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                grad.push(Expr::sub(hm[i][j].diff(&v[k]), hm[k][j].diff(&v[i])));
            }
        }
    }

    let hf = mat_mul(hm, &f);
    let mut sym11 = Vec::new();
    for i in 0..n {
        for k in i..n {
            sym11.push(Expr::add(vec![
                d_hat(sys, &hm[i][k]),
                Expr::mul(vec![
                    Expr::Num(0.5),
                    Expr::add(vec![hf[i][k].clone(), hf[k][i].clone()]),
                ]),
            ]));
        }
    }

    let a = a_matrix(h, &f);
    let mut vel13 = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            for l in 0..n {
                vel13.push(Expr::add(vec![
                    hm[k][l].diff(&q[i]),
                    Expr::neg(hm[i][l].diff(&q[k])),
                    Expr::neg(a[i][k].diff(&v[l])),
                ]));
            }
        }
    }

    let mut jacobi = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            for l in k + 1..n {
                jacobi.push(Expr::add(vec![
                    a[i][k].diff(&q[l]),
                    a[k][l].diff(&q[i]),
                    a[l][i].diff(&q[k]),
                ]));
            }
        }
    }

    let hb = mat_mul(hm, &b_matrix(sys));
    let mut alg = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            alg.push(Expr::sub(hb[i][k].clone(), hb[k][i].clone()));
        }
    }

    vec![
        ("sym6", sym),
        ("grad6", grad),
        ("sym11", sym11),
        ("vel13", vel13),
        ("jacobi14", jacobi),
        ("alg19", alg),
    ]
}

fn compile_all(sys: &SecondOrderSystem, exprs: &[Expr]) -> Result<Vec<CompiledExpr>, V2Error> {
    let vars = sys.phase_variables();
    exprs
        .iter()
        .map(|e| CompiledExpr::new(e, &vars, sys.env().parameters()).map_err(V2Error::from))
        .collect()
}

fn sample_err(e: SampleError, opts: &CheckOptions) -> V2Error {
    match e {
        SampleError::Exhausted { resamples, last } => V2Error::Domain {
            message: format!(
                "{last} (every redraw failed after {resamples} attempts on the box [-{hi}, -{lo}] ∪ [{lo}, {hi}])",
                hi = opts.sample.sampling.hi,
                lo = opts.sample.sampling.lo
            ),
        },
        SampleError::Eval(e) => V2Error::Eval(e),
    }
}

/// Largest `|residual|` over the seeded sample points.
pub(crate) fn max_residual(
    sys: &SecondOrderSystem,
    exprs: &[Expr],
    opts: &CheckOptions,
) -> Result<(f64, std::collections::BTreeMap<String, f64>), V2Error> {
    if exprs.is_empty() {
        return Ok((0.0, Default::default()));
    }
    let compiled = compile_all(sys, exprs)?;
    let vars = sys.phase_variables();
    let m = sample_max(&vars, &opts.sample, |x| {
        let mut stack = Vec::with_capacity(32);
        let mut worst: f64 = 0.0;
        for c in &compiled {
            worst = worst.max(c.eval_with(x, &mut stack)?.abs());
        }
        Ok(worst)
    })
    .map_err(|e| sample_err(e, opts))?;
    Ok((m.max, m.witness))
}

/// Evaluates all multiplier conditions at seeded random points.
pub fn check_multiplier(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    opts: &CheckOptions,
) -> Result<ConditionReport, V2Error> {
    h.check_dim(sys)?;
    let mut report = ConditionReport::default();
    for (id, exprs) in condition_residuals(sys, h) {
        let (r, w) = max_residual(sys, &exprs, opts)?;
        report.push(id, r, opts.tol, w);
    }

    let n = sys.dim();
    let entries: Vec<Expr> = h.entries().iter().flatten().cloned().collect();
    let compiled = compile_all(sys, &entries)?;
    let vars = sys.phase_variables();
    let m = sample_max(&vars, &opts.sample, |x| {
        let mut stack = Vec::with_capacity(32);
        let mut vals = Vec::with_capacity(n * n);
        for c in &compiled {
            vals.push(c.eval_with(x, &mut stack)?);
        }
        Ok(-DMatrix::from_row_slice(n, n, &vals).determinant().abs())
    })
    .map_err(|e| sample_err(e, opts))?;
    let min_det = -m.max;
    report.conditions.push(crate::report::ConditionResult {
        id: "det".into(),
        pass: min_det.is_finite() && min_det > opts.tol,
        max_residual: min_det,
        witness: m.witness,
    });
    Ok(report)
}
