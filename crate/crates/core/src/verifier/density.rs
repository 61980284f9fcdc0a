use nalgebra::DVector;

use super::VerifyError;
use crate::symexpr::{CompiledExpr, Expr, SymbolEnv, TIME};
use crate::variational1::{ActionFields, QuadraticAction};

/// A Lagrangian `L(t, x, v)` seen through its partial derivatives.
pub trait ActionDensity: Sync {
    fn dim(&self) -> usize;
    /// `(∂L/∂x, ∂L/∂v)`.
    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError>;
}

impl<D: ActionDensity + ?Sized> ActionDensity for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError> {
        (**self).partials(t, x, v)
    }
}

impl ActionDensity for QuadraticAction {
    fn dim(&self) -> usize {
        ActionFields::dim(self)
    }

    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError> {
        let s = self.at(t)?;
        let x = DVector::from_column_slice(x);
        let v = DVector::from_column_slice(v);
        let bs = (&s.b + s.b.transpose()) * 0.5;
        let lx = &s.omega * &v * 0.5 - bs * &x - &s.c;
        let lv = s.omega.tr_mul(&x) * 0.5;
        Ok((lx, lv))
    }
}

/// `L = J·v − H` for any [`ActionFields`], with `∂L/∂x` by central
/// differences of `J·v − H`.
pub struct RayDensity<'a> {
    fields: &'a dyn ActionFields,
    step: f64,
}

impl<'a> RayDensity<'a> {
    pub fn new(fields: &'a dyn ActionFields) -> Self {
        RayDensity { fields, step: 1e-4 }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl ActionDensity for RayDensity<'_> {
    fn dim(&self) -> usize {
        self.fields.dim()
    }

    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError> {
        let n = self.dim();
        let v = DVector::from_column_slice(v);
        let mut y = x.to_vec();
        let mut lx = DVector::zeros(n);
        for a in 0..n {
            y[a] = x[a] + self.step;
            let (jp, hp) = self.fields.j_and_h(t, &y)?;
            y[a] = x[a] - self.step;
            let (jm, hm) = self.fields.j_and_h(t, &y)?;
            y[a] = x[a];
            lx[a] = ((jp - jm).dot(&v) - (hp - hm)) / (2.0 * self.step);
        }
        let (lv, _) = self.fields.j_and_h(t, x)?;
        Ok((lx, lv))
    }
}

/// Symbolic second-order Lagrangian `L(t, q, q̇)` with compiled gradients.
#[derive(Debug, Clone)]
pub struct SecondOrderDensity {
    dq: Vec<CompiledExpr>,
    ddq: Vec<CompiledExpr>,
}

impl SecondOrderDensity {
    pub fn new(lagrangian: &Expr, env: &SymbolEnv) -> Result<Self, VerifyError> {
        let mut vars = vec![TIME.to_string()];
        vars.extend(env.coordinates().iter().cloned());
        vars.extend(env.velocities());
        let compile = |names: Vec<String>| -> Result<Vec<CompiledExpr>, VerifyError> {
            names
                .iter()
                .map(|s| {
                    Ok(CompiledExpr::new(
                        &lagrangian.diff(s).simplify(),
                        &vars,
                        env.parameters(),
                    )?)
                })
                .collect()
        };
        Ok(SecondOrderDensity {
            dq: compile(env.coordinates().to_vec())?,
            ddq: compile(env.velocities())?,
        })
    }
}

impl ActionDensity for SecondOrderDensity {
    fn dim(&self) -> usize {
        self.dq.len()
    }

    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError> {
        let mut point = Vec::with_capacity(1 + 2 * x.len());
        point.push(t);
        point.extend_from_slice(x);
        point.extend_from_slice(v);
        let mut stack = Vec::new();
        let mut eval = |cs: &[CompiledExpr]| -> Result<DVector<f64>, VerifyError> {
            let vals = cs
                .iter()
                .map(|c| c.eval_with(&point, &mut stack))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DVector::from_vec(vals))
        };
        Ok((eval(&self.dq)?, eval(&self.ddq)?))
    }
}

/// `L + dF/dt` for a symbolic `F(t, x)`.
pub struct TotalDerivative<D> {
    inner: D,
    /// `∂F/∂x`
    grad: Vec<CompiledExpr>,
    /// `∂²F/∂t∂x`
    grad_t: Vec<CompiledExpr>,
    /// `∂²F/∂x∂x`, row-major
    hess: Vec<CompiledExpr>,
}

impl<D: ActionDensity> TotalDerivative<D> {
    /// `coordinates` names the components of `x` as they appear in `f`.
    pub fn new(inner: D, f: &Expr, coordinates: &[String]) -> Result<Self, VerifyError> {
        if coordinates.len() != inner.dim() {
            return Err(VerifyError::Invalid(format!(
                "{} coordinate names for a {}-dimensional action",
                coordinates.len(),
                inner.dim()
            )));
        }
        let mut vars = vec![TIME.to_string()];
        vars.extend(coordinates.iter().cloned());
        let params = Default::default();
        let compile = |e: &Expr| CompiledExpr::new(&e.simplify(), &vars, &params);
        let mut grad = Vec::new();
        let mut grad_t = Vec::new();
        let mut hess = Vec::new();
        for a in coordinates {
            let da = f.diff(a);
            grad.push(compile(&da)?);
            grad_t.push(compile(&da.diff(TIME))?);
            for b in coordinates {
                hess.push(compile(&da.diff(b))?);
            }
        }
        Ok(TotalDerivative {
            inner,
            grad,
            grad_t,
            hess,
        })
    }
}

impl<D: ActionDensity> ActionDensity for TotalDerivative<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `dF/dt = ∂_t F + ∂_a F v^a` adds `∂_t∂_a F + ∂_a∂_b F v^b` to `∂L/∂x`
    /// and `∂_a F` to `∂L/∂v`.
    fn partials(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
    ) -> Result<(DVector<f64>, DVector<f64>), VerifyError> {
        let (mut lx, mut lv) = self.inner.partials(t, x, v)?;
        let n = self.dim();
        let mut point = vec![t];
        point.extend_from_slice(x);
        for a in 0..n {
            lv[a] += self.grad[a].eval(&point)?;
            lx[a] += self.grad_t[a].eval(&point)?;
            for b in 0..n {
                lx[a] += self.hess[a * n + b].eval(&point)? * v[b];
            }
        }
        Ok((lx, lv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_with;
    use crate::variational1::{
        quadratic_action, FirstOrderSystem, FlowAction, FlowMap, LinearSystem, SymplecticSeed,
    };

    fn expr(s: &str) -> Expr {
        parse_with(s, &|_| true).unwrap().simplify()
    }

    #[test]
    fn second_order_partials() {
        let env = SymbolEnv::new(&["q"], &[("k", 3.0)]).unwrap();
        let d = SecondOrderDensity::new(&expr("dq^2/2 - k*q^2/2 + t*q*dq"), &env).unwrap();
        let (lx, lv) = d.partials(2.0, &[0.5], &[-1.0]).unwrap();
        assert!((lx[0] - (-1.5 - 2.0)).abs() < 1e-14);
        assert!((lv[0] - (-1.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn ray_density_matches_quadratic() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "1"], vec!["-1", "0"]],
            &["0", "0"],
        )
        .unwrap();
        let seed = SymplecticSeed::canonical(2).unwrap();
        let qa = quadratic_action(&lin, &seed, &[0.0, 1.0], 1e-3).unwrap();
        let fa = FlowAction::new(
            FlowMap::new(lin.to_first_order().unwrap(), 1e-3).unwrap(),
            seed,
        )
        .unwrap();
        let (x, v) = ([0.3, -0.7], [1.1, 0.2]);
        let (ax, av) = qa.partials(0.4, &x, &v).unwrap();
        let (bx, bv) = RayDensity::new(&fa).partials(0.4, &x, &v).unwrap();
        assert!((ax - bx).amax() < 1e-8 && (av - bv).amax() < 1e-8);
    }

    #[test]
    fn total_derivative_terms() {
        let sys = FirstOrderSystem::parse(&["q", "p"], &[], &["p", "0"]).unwrap();
        let fa = FlowAction::new(
            FlowMap::new(sys, 1e-3).unwrap(),
            SymplecticSeed::canonical(2).unwrap(),
        )
        .unwrap();
        let base = RayDensity::new(&fa);
        let names = vec!["q".to_string(), "p".to_string()];
        let td = TotalDerivative::new(RayDensity::new(&fa), &expr("t*q*p"), &names).unwrap();
        let (x, v) = ([0.3, -0.7], [1.1, 0.2]);
        let (ax, av) = base.partials(0.5, &x, &v).unwrap();
        let (bx, bv) = td.partials(0.5, &x, &v).unwrap();
        // F = tqp: ∂L/∂v gains t(p, q); ∂L/∂x gains (p + t v_p, q + t v_q)
        assert!(
            (bv[0] - av[0] - 0.5 * -0.7).abs() < 1e-12 && (bv[1] - av[1] - 0.5 * 0.3).abs() < 1e-12
        );
        assert!((bx[0] - ax[0] - (-0.7 + 0.5 * 0.2)).abs() < 1e-12);
        assert!((bx[1] - ax[1] - (0.3 + 0.5 * 1.1)).abs() < 1e-12);
    }
}
