use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use super::system::FirstOrderSystem;
use super::V1Error;
use crate::ode::{step_count, Rk4};
use crate::symexpr::{CompiledExpr, EvalError};

const BLOWUP: f64 = 1e12;
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone)]
enum Entry {
    Const(f64),
    Var(CompiledExpr),
}

/// `∂χ/∂x` keyed by the bit pattern of `t`.
type JacobianCache = Arc<Mutex<HashMap<u64, DMatrix<f64>>>>;

/// Fixed-step RK4 flow `φ(t, x₀)`, its inverse `χ(t, x)` and `∂χ/∂x`.
#[derive(Debug, Clone)]
pub struct FlowMap {
    sys: FirstOrderSystem,
    dt: f64,
    field: Vec<CompiledExpr>,
    /// Nonzero Jacobian entries `(row, col, value)`.
    jac: Vec<(usize, usize, Entry)>,
    /// Set when `∂f/∂x` depends on `t` only, so `∂χ/∂x` does too.
    state_free: Option<JacobianCache>,
}

impl FlowMap {
    pub fn new(sys: FirstOrderSystem, dt: f64) -> Result<Self, V1Error> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(V1Error::Invalid(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let vars = sys.variables();
        let field = sys.compile_field()?;
        let mut jac = Vec::new();
        let coords = sys.env().coordinates();
        let mut state_free = true;
        for (i, row) in sys.jacobian().iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let c = CompiledExpr::new(e, &vars, sys.env().parameters())?;
                state_free &= !e.free_symbols().iter().any(|s| coords.contains(s));
                match c.constant() {
                    Some(0.0) => {}
                    Some(v) => jac.push((i, j, Entry::Const(v))),
                    None => jac.push((i, j, Entry::Var(c))),
                }
            }
        }
        let state_free = state_free.then(|| Arc::new(Mutex::new(HashMap::new())));
        Ok(FlowMap {
            sys,
            dt,
            field,
            jac,
            state_free,
        })
    }

    pub fn system(&self) -> &FirstOrderSystem {
        &self.sys
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    /// `f(t, x)` into `out`; `scratch` must hold `N + 1` values.
    pub(crate) fn field_into(
        &self,
        t: f64,
        x: &[f64],
        out: &mut [f64],
        scratch: &mut Vec<f64>,
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        scratch.clear();
        scratch.push(t);
        scratch.extend_from_slice(x);
        for (o, f) in out.iter_mut().zip(&self.field) {
            *o = f.eval_with(scratch, stack)?;
        }
        Ok(())
    }

    /// Dense `∂f/∂x` at `(t, x)`.
    pub fn jacobian_at(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        let n = self.dim();
        let mut point = vec![t];
        point.extend_from_slice(x);
        let mut m = DMatrix::zeros(n, n);
        for (i, j, e) in &self.jac {
            m[(*i, *j)] = match e {
                Entry::Const(v) => *v,
                Entry::Var(c) => c.eval(&point)?,
            };
        }
        Ok(m)
    }

    pub fn field_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, V1Error> {
        let mut out = vec![0.0; self.dim()];
        self.field_into(t, x, &mut out, &mut Vec::new(), &mut Vec::new())?;
        Ok(out)
    }

    fn run(&self, t0: f64, t1: f64, y: &mut [f64], with_jacobian: bool) -> Result<(), V1Error> {
        let n = self.dim();
        let steps = step_count(t0, t1, self.dt);
        if steps == 0 {
            return Ok(());
        }
        let h = (t1 - t0) / steps as f64;
        let mut scratch = Vec::with_capacity(n + 1);
        let mut stack = Vec::with_capacity(32);
        let mut jv = vec![0.0; self.jac.len()];
        let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
            self.field_into(t, &y[..n], &mut dy[..n], &mut scratch, &mut stack)?;
            if with_jacobian {
                for (v, (_, _, e)) in jv.iter_mut().zip(&self.jac) {
                    *v = match e {
                        Entry::Const(c) => *c,
                        Entry::Var(c) => c.eval_with(&scratch, &mut stack)?,
                    };
                }
                // d/dt M = (∂f/∂x) M, M row-major after the state
                let (m, dm) = (&y[n..], &mut dy[n..]);
                dm.iter_mut().for_each(|v| *v = 0.0);
                for (v, (i, k, _)) in jv.iter().zip(&self.jac) {
                    for j in 0..n {
                        dm[i * n + j] += v * m[k * n + j];
                    }
                }
            }
            Ok(())
        };
        let mut rk = Rk4::new(y.len());
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            rk.step(&mut rhs, t, y, h)?;
            for v in y.iter() {
                if !v.is_finite() {
                    return Err(V1Error::NonFinite { t: t + h });
                }
                if v.abs() > BLOWUP {
                    return Err(V1Error::Blowup { t: t + h });
                }
            }
        }
        Ok(())
    }

    /// Integrates from time 0 to `t`.
    pub fn flow(&self, t: f64, x0: &[f64]) -> Result<Vec<f64>, V1Error> {
        let mut y = x0.to_vec();
        self.run(0.0, t, &mut y, false)?;
        Ok(y)
    }

    /// Integrates backwards from `(t, x)` to time 0.
    pub fn inverse_flow(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, V1Error> {
        let mut y = x.to_vec();
        self.run(t, 0.0, &mut y, false)?;
        Ok(y)
    }

    /// `χ(t, x)` together with `∂χ/∂x`, from the variational equation carried
    /// along the backward trajectory.
    pub fn inverse_with_jacobian(
        &self,
        t: f64,
        x: &[f64],
    ) -> Result<(Vec<f64>, DMatrix<f64>), V1Error> {
        let n = self.dim();
        let mut y = vec![0.0; n + n * n];
        y[..n].copy_from_slice(x);
        for i in 0..n {
            y[n + i * n + i] = 1.0;
        }
        self.run(t, 0.0, &mut y, true)?;
        let m = DMatrix::from_row_slice(n, n, &y[n..]);
        y.truncate(n);
        Ok((y, m))
    }

    /// `∂χ/∂x` at `(t, x)`. When `∂f/∂x` does not involve the state the
    /// result depends on `t` alone and is memoized.
    pub fn flow_jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        let Some(cache) = &self.state_free else {
            return Ok(self.inverse_with_jacobian(t, x)?.1);
        };
        if let Some(m) = cache.lock().expect("cache lock").get(&t.to_bits()) {
            return Ok(m.clone());
        }
        let m = self.inverse_with_jacobian(t, x)?.1;
        let mut c = cache.lock().expect("cache lock");
        if c.len() >= CACHE_LIMIT {
            c.clear();
        }
        c.insert(t.to_bits(), m.clone());
        Ok(m)
    }

    /// Whether `∂χ/∂x` is independent of the state.
    pub fn is_state_free(&self) -> bool {
        self.state_free.is_some()
    }
}
