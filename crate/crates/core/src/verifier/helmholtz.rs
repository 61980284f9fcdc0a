use nalgebra::{DMatrix, DVector};

use super::trajectory::DiscreteTrajectory;
use super::{finite, VerifyError};

/// Equations `g(t, x, ẋ, ẍ)` whose variational character is tested.
pub trait Equation: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], v: &[f64], a: &[f64]) -> Result<DVector<f64>, VerifyError>;
}

/// [`Equation`] from a closure.
pub struct FnEquation<F> {
    dim: usize,
    f: F,
}

impl<F> FnEquation<F>
where
    F: Fn(f64, &[f64], &[f64], &[f64]) -> Result<DVector<f64>, VerifyError> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnEquation { dim, f }
    }
}

impl<F> Equation for FnEquation<F>
where
    F: Fn(f64, &[f64], &[f64], &[f64]) -> Result<DVector<f64>, VerifyError> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], v: &[f64], a: &[f64]) -> Result<DVector<f64>, VerifyError> {
        (self.f)(t, x, v, a)
    }
}

/// `G_k = g(t_k, x_k, (x_{k+1} − x_{k−1})/2Δ, (x_{k+1} − 2x_k + x_{k−1})/Δ²)`.
fn discrete_g(
    g: &dyn Equation,
    t: f64,
    dt: f64,
    prev: &[f64],
    cur: &[f64],
    next: &[f64],
) -> Result<DVector<f64>, VerifyError> {
    let n = cur.len();
    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    for i in 0..n {
        v[i] = (next[i] - prev[i]) / (2.0 * dt);
        a[i] = (next[i] - 2.0 * cur[i] + prev[i]) / (dt * dt);
    }
    let out = g.eval(t, cur, &v, &a)?;
    finite(out.as_slice(), "equation", t)?;
    Ok(out)
}

/// `∂G_k/∂x_{k+offset}` by central differences.
fn block(
    g: &dyn Equation,
    traj: &DiscreteTrajectory,
    k: usize,
    offset: isize,
    eps: f64,
) -> Result<DMatrix<f64>, VerifyError> {
    let n = traj.dim();
    let mut win: [Vec<f64>; 3] = [
        traj.state(k - 1).as_slice().to_vec(),
        traj.state(k).as_slice().to_vec(),
        traj.state(k + 1).as_slice().to_vec(),
    ];
    let slot = (offset + 1) as usize;
    let t = traj.time(k);
    let mut m = DMatrix::zeros(n, n);
    for b in 0..n {
        let x = win[slot][b];
        win[slot][b] = x + eps;
        let gp = discrete_g(g, t, traj.dt(), &win[0], &win[1], &win[2])?;
        win[slot][b] = x - eps;
        let gm = discrete_g(g, t, traj.dt(), &win[0], &win[1], &win[2])?;
        win[slot][b] = x;
        m.set_column(b, &((gp - gm) / (2.0 * eps)));
    }
    Ok(m)
}

/// `Δ · max |∂G_k/∂x_m − (∂G_m/∂x_k)ᵀ|` over interior grid pairs, with
/// entries from central differences of size `eps`. Zero for the discretized
/// Euler-Lagrange expressions of an action; `O(Δ)` when the weights vary in
/// time.
pub fn helmholtz_asymmetry(
    g: &dyn Equation,
    traj: &DiscreteTrajectory,
    eps: f64,
) -> Result<f64, VerifyError> {
    if traj.len() < 4 {
        return Err(VerifyError::Invalid(format!(
            "need at least 4 grid points, got {}",
            traj.len()
        )));
    }
    if traj.dim() != g.dim() {
        return Err(VerifyError::Invalid(format!(
            "trajectory has {} components but the equations have {}",
            traj.dim(),
            g.dim()
        )));
    }
    let last = traj.len() - 2;
    let mut worst: f64 = 0.0;
    for k in 1..=last {
        let d0 = block(g, traj, k, 0, eps)?;
        worst = worst.max((&d0 - d0.transpose()).amax());
        if k < last {
            let up = block(g, traj, k, 1, eps)?;
            let down = block(g, traj, k + 1, -1, eps)?;
            worst = worst.max((up - down.transpose()).amax());
        }
    }
    Ok(traj.dt() * worst)
}
