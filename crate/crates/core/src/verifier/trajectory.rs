use nalgebra::DVector;

use super::VerifyError;

/// States on the uniform grid `t_k = t0 + k Δ`. The first and last states
/// are held fixed; only interior states are varied.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    t0: f64,
    dt: f64,
    states: Vec<DVector<f64>>,
}

impl DiscreteTrajectory {
    pub fn new(t0: f64, dt: f64, states: Vec<DVector<f64>>) -> Result<Self, VerifyError> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(VerifyError::Invalid(format!("grid t0 = {t0}, step = {dt}")));
        }
        let dim = states.first().map_or(0, |s| s.len());
        if dim == 0 {
            return Err(VerifyError::Invalid("trajectory has no states".into()));
        }
        for (k, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(VerifyError::Invalid(format!(
                    "state {k} has {} components, expected {dim}",
                    s.len()
                )));
            }
            super::finite(s.as_slice(), "state", t0 + k as f64 * dt)?;
        }
        Ok(DiscreteTrajectory { t0, dt, states })
    }

    /// Samples `x(t)` at `n` grid points.
    pub fn from_fn(
        t0: f64,
        dt: f64,
        n: usize,
        x: impl Fn(f64) -> DVector<f64>,
    ) -> Result<Self, VerifyError> {
        Self::new(t0, dt, (0..n).map(|k| x(t0 + k as f64 * dt)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    /// Every other state, doubling the step.
    pub fn coarsened(&self) -> Result<Self, VerifyError> {
        Self::new(
            self.t0,
            2.0 * self.dt,
            self.states.iter().step_by(2).cloned().collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_states() {
        assert!(DiscreteTrajectory::new(0.0, 0.1, vec![]).is_err());
        assert!(DiscreteTrajectory::new(0.0, 0.0, vec![DVector::zeros(1)]).is_err());
        let bad = vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![f64::NAN]),
        ];
        assert!(matches!(
            DiscreteTrajectory::new(0.0, 0.1, bad),
            Err(VerifyError::NonFinite { .. })
        ));
        let mixed = vec![DVector::zeros(1), DVector::zeros(2)];
        assert!(DiscreteTrajectory::new(0.0, 0.1, mixed).is_err());
    }

    #[test]
    fn coarsening_keeps_times() {
        let tr = DiscreteTrajectory::from_fn(1.0, 0.25, 5, |t| DVector::from_vec(vec![t])).unwrap();
        let c = tr.coarsened().unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.time(2), 2.0);
        assert_eq!(c.state(2)[0], 2.0);
    }
}
