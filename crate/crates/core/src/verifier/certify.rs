use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::density::ActionDensity;
use super::discrete::discrete_variational_derivative;
use super::helmholtz::{helmholtz_asymmetry, Equation};
use super::trajectory::DiscreteTrajectory;
use super::{finite, VerifyError};
use crate::exec::{map_range, Exec};
use crate::ode::Rk4;
use crate::symexpr::{point_rng, CompiledExpr, SamplingBox};
use crate::variational1::ActionFields;
use crate::variational2::{Multiplier, SecondOrderSystem};

/// The equations an action is certified against.
pub trait TargetEquations: Sync {
    /// Configuration dimension (`x` for first-order, `q` for second-order).
    fn dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, VerifyError>;
    /// Position, velocity and acceleration of the configuration at a state.
    fn kinematics(&self, t: f64, y: &[f64]) -> Result<[DVector<f64>; 3], VerifyError>;
    /// Expected variational derivative along a path with the given
    /// derivatives.
    fn target(&self, t: f64, x: &[f64], v: &[f64], a: &[f64]) -> Result<DVector<f64>, VerifyError>;
}

/// `ẋ = f(t, x)` with target `Ω(ẋ − f)`, both read from the action fields.
pub struct FirstOrderTarget<'a> {
    fields: &'a dyn ActionFields,
}

impl<'a> FirstOrderTarget<'a> {
    pub fn new(fields: &'a dyn ActionFields) -> Self {
        FirstOrderTarget { fields }
    }
}

impl TargetEquations for FirstOrderTarget<'_> {
    fn dim(&self) -> usize {
        self.fields.dim()
    }

    fn state_dim(&self) -> usize {
        self.fields.dim()
    }

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, VerifyError> {
        Ok(self.fields.field(t, y)?.as_slice().to_vec())
    }

    /// The acceleration is not needed by the target and is left at zero.
    fn kinematics(&self, t: f64, y: &[f64]) -> Result<[DVector<f64>; 3], VerifyError> {
        let n = self.dim();
        Ok([
            DVector::from_column_slice(y),
            self.fields.field(t, y)?,
            DVector::zeros(n),
        ])
    }

    fn target(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
        _a: &[f64],
    ) -> Result<DVector<f64>, VerifyError> {
        let om = self.fields.omega(t, x)?;
        Ok(om * (DVector::from_column_slice(v) - self.fields.field(t, x)?))
    }
}

/// `q̈ = f(t, q, q̇)` with target `−h(q̈ − f)`.
#[derive(Debug, Clone)]
pub struct SecondOrderTarget {
    n: usize,
    forces: Vec<CompiledExpr>,
    h: Vec<CompiledExpr>,
}

impl SecondOrderTarget {
    pub fn new(sys: &SecondOrderSystem, h: &Multiplier) -> Result<Self, VerifyError> {
        let n = sys.dim();
        if h.dim() != n {
            return Err(VerifyError::Invalid(format!(
                "{0}x{0} multiplier for {n} coordinates",
                h.dim()
            )));
        }
        let vars = sys.phase_variables();
        let params = sys.env().parameters();
        let forces = sys
            .forces()
            .iter()
            .map(|f| CompiledExpr::new(f, &vars, params))
            .collect::<Result<Vec<_>, _>>()?;
        let mut hs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                hs.push(CompiledExpr::new(h.get(i, j), &vars, params)?);
            }
        }
        Ok(SecondOrderTarget { n, forces, h: hs })
    }

    fn point(t: f64, q: &[f64], v: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 + q.len() + v.len());
        p.push(t);
        p.extend_from_slice(q);
        p.extend_from_slice(v);
        p
    }

    fn force(&self, point: &[f64]) -> Result<DVector<f64>, VerifyError> {
        let f = self
            .forces
            .iter()
            .map(|c| c.eval(point))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DVector::from_vec(f))
    }
}

impl TargetEquations for SecondOrderTarget {
    fn dim(&self) -> usize {
        self.n
    }

    fn state_dim(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, VerifyError> {
        let (q, v) = y.split_at(self.n);
        let f = self.force(&Self::point(t, q, v))?;
        let mut dy = v.to_vec();
        dy.extend(f.iter());
        Ok(dy)
    }

    fn kinematics(&self, t: f64, y: &[f64]) -> Result<[DVector<f64>; 3], VerifyError> {
        let (q, v) = y.split_at(self.n);
        let f = self.force(&Self::point(t, q, v))?;
        Ok([
            DVector::from_column_slice(q),
            DVector::from_column_slice(v),
            f,
        ])
    }

    fn target(&self, t: f64, x: &[f64], v: &[f64], a: &[f64]) -> Result<DVector<f64>, VerifyError> {
        let point = Self::point(t, x, v);
        let f = self.force(&point)?;
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                h[(i, j)] = self.h[i * self.n + j].eval(&point)?;
            }
        }
        Ok(-(h * (DVector::from_column_slice(a) - f)))
    }
}

struct TargetEquation<'a>(&'a dyn TargetEquations);

impl Equation for TargetEquation<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, t: f64, x: &[f64], v: &[f64], a: &[f64]) -> Result<DVector<f64>, VerifyError> {
        self.0.target(t, x, v, a)
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub trajectories: usize,
    /// Length of each trajectory.
    pub window: f64,
    /// Coarse grid step; the order estimate also runs at `dt / 2`.
    pub dt: f64,
    /// Interval containing every trajectory.
    pub t_range: (f64, f64),
    /// Amplitude of the `sin²` bump added for off-solution checks.
    pub bump: f64,
    /// RK4 steps per fine grid interval when integrating solutions.
    pub substeps: usize,
    pub seed: u64,
    pub tol: f64,
    pub sampling: SamplingBox,
    pub retries: usize,
    /// Central-difference step for the Helmholtz check; `None` skips it.
    pub helmholtz_eps: Option<f64>,
    pub exec: Exec,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            trajectories: 2,
            window: 0.4,
            dt: 1e-3,
            t_range: (0.0, 1.0),
            bump: 1e-2,
            substeps: 4,
            seed: 42,
            tol: 1e-4,
            sampling: SamplingBox::default(),
            retries: 10,
            helmholtz_eps: Some(1e-6),
            exec: Exec::default(),
        }
    }
}

impl CertifyOptions {
    fn validate(&self) -> Result<usize, VerifyError> {
        let (lo, hi) = self.t_range;
        if !(self.dt > 0.0 && self.window > 0.0 && hi - lo >= self.window) {
            return Err(VerifyError::Invalid(format!(
                "window {} with step {} does not fit in [{lo}, {hi}]",
                self.window, self.dt
            )));
        }
        let m = (self.window / self.dt).round() as usize;
        if m < 4 || self.substeps == 0 || self.trajectories == 0 {
            return Err(VerifyError::Invalid(
                "need at least one trajectory, one substep and 4 grid intervals".into(),
            ));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Largest `|discrete δS/δx − target|` over interior points of the
    /// solution and perturbed trajectories at the coarse step.
    pub max_residual: f64,
    pub solution_residual: f64,
    pub refined_residual: f64,
    pub perturbed_mismatch: f64,
    /// `log₂` of the solution residual ratio between the two grids.
    pub order_estimate: Option<f64>,
    pub helmholtz_asymmetry: Option<f64>,
    pub dt: f64,
    pub trajectories: usize,
    pub pass: bool,
}

struct Sample {
    t0: f64,
    /// Full states on the fine grid.
    states: Vec<Vec<f64>>,
    direction: DVector<f64>,
}

fn integrate(
    eqs: &dyn TargetEquations,
    t0: f64,
    y0: &[f64],
    h: f64,
    substeps: usize,
    points: usize,
) -> Result<Vec<Vec<f64>>, VerifyError> {
    let mut rk = Rk4::new(y0.len());
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), VerifyError> {
        dy.copy_from_slice(&eqs.rhs(t, y)?);
        Ok(())
    };
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    let step = h / substeps as f64;
    for j in 1..points {
        let t = t0 + (j - 1) as f64 * h;
        for s in 0..substeps {
            rk.step(&mut rhs, t + s as f64 * step, &mut y, step)?;
        }
        finite(&y, "solution state", t + h)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Draws a solution on the fine grid and a unit perturbation direction.
fn draw(
    eqs: &dyn TargetEquations,
    opts: &CertifyOptions,
    index: usize,
    m: usize,
) -> Result<Sample, VerifyError> {
    let mut rng = point_rng(opts.seed, index as u64);
    let (lo, hi) = opts.t_range;
    let mut last = None;
    for _ in 0..=opts.retries {
        let t0 = lo + rng.gen::<f64>() * (hi - lo - opts.window);
        let y0: Vec<f64> = (0..eqs.state_dim())
            .map(|i| opts.sampling.draw(&format!("y{i}"), &mut rng))
            .collect();
        let mut e = DVector::from_fn(eqs.dim(), |_, _| rng.gen_range(-1.0..1.0));
        if e.norm() < 1e-3 {
            e[0] = 1.0;
        }
        e /= e.norm();
        match integrate(eqs, t0, &y0, 0.5 * opts.dt, opts.substeps, 2 * m + 1) {
            Ok(states) => {
                return Ok(Sample {
                    t0,
                    states,
                    direction: e,
                })
            }
            Err(err) => last = Some(err),
        }
    }
    Err(VerifyError::Trajectory {
        attempts: opts.retries + 1,
        last: Box::new(last.expect("at least one attempt")),
    })
}

fn config_trajectory(
    eqs: &dyn TargetEquations,
    t0: f64,
    dt: f64,
    states: &[&Vec<f64>],
) -> Result<DiscreteTrajectory, VerifyError> {
    let n = eqs.dim();
    DiscreteTrajectory::new(
        t0,
        dt,
        states
            .iter()
            .map(|y| DVector::from_column_slice(&y[..n]))
            .collect(),
    )
}

/// `b(τ) = A sin²(πτ/T)` and its first two derivatives.
fn bump(amp: f64, window: f64, tau: f64) -> [f64; 3] {
    let w = PI / window;
    let s = (w * tau).sin();
    let c = (w * tau).cos();
    [
        amp * s * s,
        amp * w * 2.0 * s * c,
        amp * 2.0 * w * w * (c * c - s * s),
    ]
}

fn max_abs(r: &[DVector<f64>]) -> f64 {
    r.iter().map(|v| v.amax()).fold(0.0, f64::max)
}

struct TrajectoryResult {
    solution: f64,
    refined: f64,
    perturbed: f64,
    helmholtz: Option<f64>,
}

fn perturbed_trajectory(
    eqs: &dyn TargetEquations,
    opts: &CertifyOptions,
    sample: &Sample,
    coarse: &[&Vec<f64>],
) -> Result<(DiscreteTrajectory, Vec<DVector<f64>>), VerifyError> {
    let mut xs = Vec::with_capacity(coarse.len());
    let mut targets = Vec::with_capacity(coarse.len());
    for (k, y) in coarse.iter().enumerate() {
        let tau = k as f64 * opts.dt;
        let t = sample.t0 + tau;
        let [b, db, ddb] = bump(opts.bump, opts.window, tau);
        let [x, v, a] = eqs.kinematics(t, y)?;
        let x = x + &sample.direction * b;
        let v = v + &sample.direction * db;
        let a = a + &sample.direction * ddb;
        if k > 0 && k + 1 < coarse.len() {
            targets.push(eqs.target(t, x.as_slice(), v.as_slice(), a.as_slice())?);
        }
        xs.push(x);
    }
    Ok((DiscreteTrajectory::new(sample.t0, opts.dt, xs)?, targets))
}

fn run_one(
    action: &dyn ActionDensity,
    eqs: &dyn TargetEquations,
    opts: &CertifyOptions,
    index: usize,
    m: usize,
) -> Result<TrajectoryResult, VerifyError> {
    let sample = draw(eqs, opts, index, m)?;
    let fine: Vec<&Vec<f64>> = sample.states.iter().collect();
    let coarse: Vec<&Vec<f64>> = sample.states.iter().step_by(2).collect();
    let sol_fine = config_trajectory(eqs, sample.t0, 0.5 * opts.dt, &fine)?;
    let sol = config_trajectory(eqs, sample.t0, opts.dt, &coarse)?;
    let solution = max_abs(&discrete_variational_derivative(action, &sol)?);
    let refined = max_abs(&discrete_variational_derivative(action, &sol_fine)?);

    let (pert, targets) = perturbed_trajectory(eqs, opts, &sample, &coarse)?;
    let r = discrete_variational_derivative(action, &pert)?;
    let perturbed = r
        .iter()
        .zip(&targets)
        .map(|(r, t)| (r - t).amax())
        .fold(0.0, f64::max);

    let helmholtz = match opts.helmholtz_eps {
        Some(eps) if index == 0 => Some(helmholtz_asymmetry(&TargetEquation(eqs), &sol, eps)?),
        _ => None,
    };
    Ok(TrajectoryResult {
        solution,
        refined,
        perturbed,
        helmholtz,
    })
}

/// Checks `action` against `eqs` on seeded random trajectories: the discrete
/// variational derivative must vanish on solutions, converge at second
/// order, and reproduce the target on bump-perturbed paths.
pub fn certify(
    action: &dyn ActionDensity,
    eqs: &dyn TargetEquations,
    opts: &CertifyOptions,
) -> Result<VerificationReport, VerifyError> {
    if action.dim() != eqs.dim() {
        return Err(VerifyError::Invalid(format!(
            "action has {} components but the equations have {}",
            action.dim(),
            eqs.dim()
        )));
    }
    let m = opts.validate()?;
    let results = map_range(opts.exec, opts.trajectories, |i| {
        run_one(action, eqs, opts, i, m)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let solution = results.iter().map(|r| r.solution).fold(0.0, f64::max);
    let refined = results.iter().map(|r| r.refined).fold(0.0, f64::max);
    let perturbed = results.iter().map(|r| r.perturbed).fold(0.0, f64::max);
    let max_residual = solution.max(perturbed);
    let order_estimate = (solution > 0.0 && refined > 0.0).then(|| (solution / refined).log2());
    Ok(VerificationReport {
        max_residual,
        solution_residual: solution,
        refined_residual: refined,
        perturbed_mismatch: perturbed,
        order_estimate,
        helmholtz_asymmetry: results.iter().find_map(|r| r.helmholtz),
        dt: opts.dt,
        trajectories: results.len(),
        pass: max_residual.is_finite() && max_residual <= opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSetCase {
    pub trajectory: usize,
    pub perturbed: bool,
    pub residual_a: f64,
    pub residual_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSetAgreement {
    pub tol: f64,
    pub cases: Vec<ZeroSetCase>,
    pub agree: bool,
}

/// Compares where two actions have vanishing discrete variational
/// derivative, on solutions of `eqs` and on their perturbations. A path is
/// in the zero set when its largest interior residual is at most `tol`.
pub fn zero_set_agreement(
    a: &dyn ActionDensity,
    b: &dyn ActionDensity,
    eqs: &dyn TargetEquations,
    opts: &CertifyOptions,
    tol: f64,
) -> Result<ZeroSetAgreement, VerifyError> {
    let m = opts.validate()?;
    let per = map_range(
        opts.exec,
        opts.trajectories,
        |i| -> Result<Vec<ZeroSetCase>, VerifyError> {
            let sample = draw(eqs, opts, i, m)?;
            let coarse: Vec<&Vec<f64>> = sample.states.iter().step_by(2).collect();
            let sol = config_trajectory(eqs, sample.t0, opts.dt, &coarse)?;
            let (pert, _) = perturbed_trajectory(eqs, opts, &sample, &coarse)?;
            [(sol, false), (pert, true)]
                .into_iter()
                .map(|(tr, perturbed)| {
                    Ok(ZeroSetCase {
                        trajectory: i,
                        perturbed,
                        residual_a: max_abs(&discrete_variational_derivative(a, &tr)?),
                        residual_b: max_abs(&discrete_variational_derivative(b, &tr)?),
                    })
                })
                .collect()
        },
    );
    let mut cases = Vec::new();
    for p in per {
        cases.extend(p?);
    }
    let agree = cases
        .iter()
        .all(|c| (c.residual_a <= tol) == (c.residual_b <= tol));
    Ok(ZeroSetAgreement { tol, cases, agree })
}
