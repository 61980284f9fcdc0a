use nalgebra::{DMatrix, DVector};

use super::flow::FlowMap;
use super::system::SymplecticSeed;
use super::V1Error;
use crate::quadrature::GaussLegendre;
use crate::symexpr::{CompiledExpr, Expr, TIME};

/// Numeric ingredients of a first-order action `L = J·ẋ − H`.
pub trait ActionFields: Sync {
    fn dim(&self) -> usize;
    fn omega(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error>;
    fn j_and_h(&self, t: f64, x: &[f64]) -> Result<(DVector<f64>, f64), V1Error>;
    fn field(&self, t: f64, x: &[f64]) -> Result<DVector<f64>, V1Error>;
    fn field_jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error>;
}

/// How the `∂_t J` term of the `H` integrand is handled.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TimeDerivativeMode {
    /// Drop it: with `J` built on rays, `xᵀ ∂_t J(t, s x)` vanishes
    /// identically because `∂_t Ω` is antisymmetric.
    #[default]
    RadialIdentity,
    /// Central difference in `t` with the given step.
    CentralDifference { step: f64 },
}

#[derive(Debug, Clone)]
struct Gauge {
    phi: Expr,
    grad: Vec<CompiledExpr>,
    dt: CompiledExpr,
}

/// Flow-transported symplectic form with ray-integrated `J` and `H`.
#[derive(Debug, Clone)]
pub struct FlowAction {
    flow: FlowMap,
    seed: SymplecticSeed,
    gauge: Option<Gauge>,
    mode: TimeDerivativeMode,
}

impl FlowAction {
    pub fn new(flow: FlowMap, seed: SymplecticSeed) -> Result<Self, V1Error> {
        if seed.dim() != flow.dim() {
            return Err(V1Error::Invalid(format!(
                "seed is {0}x{0} but the system has {1} coordinates",
                seed.dim(),
                flow.dim()
            )));
        }
        Ok(FlowAction {
            flow,
            seed,
            gauge: None,
            mode: TimeDerivativeMode::default(),
        })
    }

    /// Adds the gauge `J → J + ∇φ`, `H → H − ∂_t φ`.
    pub fn with_gauge(mut self, phi: &Expr) -> Result<Self, V1Error> {
        let sys = self.flow.system();
        let vars = sys.variables();
        let params = sys.env().parameters();
        for s in phi.free_symbols() {
            if !vars.contains(&s) && !params.contains_key(&s) {
                return Err(V1Error::Invalid(format!("gauge uses unknown symbol `{s}`")));
            }
        }
        let grad = sys
            .env()
            .coordinates()
            .iter()
            .map(|c| CompiledExpr::new(&phi.diff(c), &vars, params))
            .collect::<Result<Vec<_>, _>>()?;
        let dt = CompiledExpr::new(&phi.diff(TIME), &vars, params)?;
        self.gauge = Some(Gauge {
            phi: phi.simplify(),
            grad,
            dt,
        });
        Ok(self)
    }

    pub fn with_mode(mut self, mode: TimeDerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn flow(&self) -> &FlowMap {
        &self.flow
    }

    pub fn seed(&self) -> &SymplecticSeed {
        &self.seed
    }

    pub fn gauge(&self) -> Option<&Expr> {
        self.gauge.as_ref().map(|g| &g.phi)
    }

    /// `Ω(t, x) = (∂χ)ᵀ Ω⁰ ∂χ`.
    pub fn omega_at(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        let m = self.flow.flow_jacobian(t, x)?;
        Ok(m.transpose() * self.seed.matrix() * m)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), V1Error> {
        if x.len() != self.flow.dim() {
            return Err(V1Error::Invalid(format!(
                "point has {} components, expected {}",
                x.len(),
                self.flow.dim()
            )));
        }
        Ok(())
    }

    /// `J_α = ∫₀¹ s x^β Ω_βα(t, s x) ds` without the gauge term.
    fn ray_j(&self, t: f64, x: &[f64]) -> Result<DVector<f64>, V1Error> {
        let rule = GaussLegendre::standard();
        let xv = DVector::from_column_slice(x);
        let mut j = DVector::zeros(x.len());
        for (s, w) in rule.nodes().iter().zip(rule.weights()) {
            let y: Vec<f64> = x.iter().map(|v| s * v).collect();
            let om = self.omega_at(t, &y)?;
            j += (w * s) * om.tr_mul(&xv);
        }
        Ok(j)
    }

    pub fn build_j(&self, t: f64, x: &[f64]) -> Result<DVector<f64>, V1Error> {
        Ok(self.j_and_h(t, x)?.0)
    }

    pub fn build_h(&self, t: f64, x: &[f64]) -> Result<f64, V1Error> {
        Ok(self.j_and_h(t, x)?.1)
    }

    fn gauge_terms(
        &self,
        t: f64,
        x: &[f64],
        j: &mut DVector<f64>,
        h: &mut f64,
    ) -> Result<(), V1Error> {
        if let Some(g) = &self.gauge {
            let mut point = vec![t];
            point.extend_from_slice(x);
            for (ji, c) in j.iter_mut().zip(&g.grad) {
                *ji += c.eval(&point)?;
            }
            *h -= g.dt.eval(&point)?;
        }
        Ok(())
    }
}

impl ActionFields for FlowAction {
    fn dim(&self) -> usize {
        self.flow.dim()
    }

    fn omega(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        self.check_point(x)?;
        self.omega_at(t, x)
    }

    /// `J` and `H = ∫₀¹ xᵀ [Ω f − ∂_t J](t, s x) ds` from one pass over the ray.
    fn j_and_h(&self, t: f64, x: &[f64]) -> Result<(DVector<f64>, f64), V1Error> {
        self.check_point(x)?;
        let rule = GaussLegendre::standard();
        let xv = DVector::from_column_slice(x);
        let mut j = DVector::zeros(x.len());
        let mut h = 0.0;
        for (s, w) in rule.nodes().iter().zip(rule.weights()) {
            let y: Vec<f64> = x.iter().map(|v| s * v).collect();
            let om = self.omega_at(t, &y)?;
            let f = DVector::from_vec(self.flow.field_at(t, &y)?);
            j += (w * s) * om.tr_mul(&xv);
            h += w * xv.dot(&(&om * f));
            if let TimeDerivativeMode::CentralDifference { step } = self.mode {
                let djt = (self.ray_j(t + step, &y)? - self.ray_j(t - step, &y)?) / (2.0 * step);
                h -= w * xv.dot(&djt);
            }
        }
        self.gauge_terms(t, x, &mut j, &mut h)?;
        Ok((j, h))
    }

    fn field(&self, t: f64, x: &[f64]) -> Result<DVector<f64>, V1Error> {
        Ok(DVector::from_vec(self.flow.field_at(t, x)?))
    }

    fn field_jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        self.flow.jacobian_at(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational1::FirstOrderSystem;

    fn action(field: [&str; 2]) -> FlowAction {
        let sys = FirstOrderSystem::parse(&["q", "p"], &[], &field).unwrap();
        FlowAction::new(
            FlowMap::new(sys, 1e-3).unwrap(),
            SymplecticSeed::canonical(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn oscillator_keeps_the_seed() {
        let a = action(["p", "-q"]);
        let om = a.omega(0.7, &[0.4, -1.1]).unwrap();
        assert!((om - a.seed().matrix()).amax() < 1e-10);
        assert_eq!(
            a.omega(0.0, &[0.4, -1.1]).unwrap(),
            a.seed().matrix().clone()
        );
    }

    #[test]
    fn oscillator_j_and_h() {
        let a = action(["p", "-q"]);
        let (q, p) = (0.4, -1.1);
        let (j, h) = a.j_and_h(0.6, &[q, p]).unwrap();
        assert!((j[0] + 0.5 * p).abs() < 1e-10 && (j[1] - 0.5 * q).abs() < 1e-10);
        assert!((h + 0.5 * (q * q + p * p)).abs() < 1e-10);
        let (j0, h0) = a.j_and_h(0.6, &[0.0, 0.0]).unwrap();
        assert_eq!(j0.amax(), 0.0);
        assert_eq!(h0, 0.0);
    }

    #[test]
    fn free_particle_hamiltonian() {
        let a = action(["p", "0"]);
        let h = a.build_h(0.9, &[0.3, 0.7]).unwrap();
        assert!((h + 0.5 * 0.49).abs() < 1e-10);
    }

    #[test]
    fn time_derivative_modes_agree() {
        let sys = FirstOrderSystem::parse(&["q", "p"], &[], &["p", "-q - q^3/3 + t*p/5"]).unwrap();
        let fm = FlowMap::new(sys, 1e-3).unwrap();
        let radial = FlowAction::new(fm.clone(), SymplecticSeed::canonical(2).unwrap()).unwrap();
        let central = radial
            .clone()
            .with_mode(TimeDerivativeMode::CentralDifference { step: 1e-4 });
        let x = [0.5, -0.3];
        let a = radial.build_h(0.4, &x).unwrap();
        let b = central.build_h(0.4, &x).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn gauge_shifts_j_and_h() {
        let plain = action(["p", "-q"]);
        let phi = crate::symexpr::parse_with("t*q*p", &|_| true)
            .unwrap()
            .simplify();
        let gauged = plain.clone().with_gauge(&phi).unwrap();
        let x = [0.3, 0.8];
        let (j0, h0) = plain.j_and_h(0.5, &x).unwrap();
        let (j1, h1) = gauged.j_and_h(0.5, &x).unwrap();
        assert!((j1[0] - j0[0] - 0.5 * 0.8).abs() < 1e-12);
        assert!((j1[1] - j0[1] - 0.5 * 0.3).abs() < 1e-12);
        assert!((h1 - h0 + 0.3 * 0.8).abs() < 1e-12);
    }
}
