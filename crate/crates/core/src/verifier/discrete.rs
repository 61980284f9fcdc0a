use nalgebra::DVector;

use super::density::ActionDensity;
use super::trajectory::DiscreteTrajectory;
use super::{finite, VerifyError};

/// `Δ⁻¹ ∂S_Δ/∂x_k` at interior points `k = 1..N−1`, where
/// `S_Δ = Σ_k L(t_{k+½}, (x_k + x_{k+1})/2, (x_{k+1} − x_k)/Δ) Δ`.
pub fn discrete_variational_derivative(
    action: &dyn ActionDensity,
    traj: &DiscreteTrajectory,
) -> Result<Vec<DVector<f64>>, VerifyError> {
    if traj.len() < 3 {
        return Err(VerifyError::Invalid(format!(
            "need at least 3 grid points, got {}",
            traj.len()
        )));
    }
    if traj.dim() != action.dim() {
        return Err(VerifyError::Invalid(format!(
            "trajectory has {} components but the action has {}",
            traj.dim(),
            action.dim()
        )));
    }
    let dt = traj.dt();
    let mut mid = Vec::with_capacity(traj.len() - 1);
    for k in 0..traj.len() - 1 {
        let (a, b) = (traj.state(k), traj.state(k + 1));
        let xm = (a + b) * 0.5;
        let v = (b - a) / dt;
        let t = traj.time(k) + 0.5 * dt;
        let (lx, lv) = action.partials(t, xm.as_slice(), v.as_slice())?;
        finite(lx.as_slice(), "action gradient", t)?;
        finite(lv.as_slice(), "action gradient", t)?;
        mid.push((lx, lv));
    }
    Ok(mid
        .windows(2)
        .map(|w| (&w[0].0 + &w[1].0) * 0.5 - (&w[1].1 - &w[0].1) / dt)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse_with, SymbolEnv};
    use crate::verifier::SecondOrderDensity;

    fn density(l: &str) -> SecondOrderDensity {
        let env = SymbolEnv::new(&["q"], &[]).unwrap();
        SecondOrderDensity::new(&parse_with(l, &|_| true).unwrap(), &env).unwrap()
    }

    #[test]
    fn free_particle_on_a_line() {
        let tr =
            DiscreteTrajectory::from_fn(0.0, 0.1, 11, |t| DVector::from_vec(vec![2.0 * t - 1.0]))
                .unwrap();
        let r = discrete_variational_derivative(&density("dq^2/2"), &tr).unwrap();
        assert_eq!(r.len(), 9);
        assert!(r.iter().all(|v| v[0].abs() < 1e-12));
    }

    #[test]
    fn oscillator_is_second_order() {
        let l = density("dq^2/2 - q^2/2");
        let mut maxes = Vec::new();
        for &dt in &[1e-2, 5e-3] {
            let n = (1.0 / dt) as usize + 1;
            let tr = DiscreteTrajectory::from_fn(0.0, dt, n, |t| DVector::from_vec(vec![t.cos()]))
                .unwrap();
            let r = discrete_variational_derivative(&l, &tr).unwrap();
            maxes.push(r.iter().map(|v| v[0].abs()).fold(0.0, f64::max));
        }
        assert!(maxes[0] <= 1e-3);
        let order = (maxes[0] / maxes[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn off_solution_matches_the_equation() {
        // x = t^3: δS/δx = −ẍ − x
        let l = density("dq^2/2 - q^2/2");
        let tr =
            DiscreteTrajectory::from_fn(0.0, 1e-3, 1001, |t| DVector::from_vec(vec![t.powi(3)]))
                .unwrap();
        let r = discrete_variational_derivative(&l, &tr).unwrap();
        for (k, v) in r.iter().enumerate() {
            let t = tr.time(k + 1);
            assert!((v[0] + 6.0 * t + t.powi(3)).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_short_trajectories() {
        let tr = DiscreteTrajectory::from_fn(0.0, 0.1, 2, |t| DVector::from_vec(vec![t])).unwrap();
        assert!(discrete_variational_derivative(&density("dq^2"), &tr).is_err());
    }
}
