//! Fixed-step classical Runge-Kutta.

/// Right-hand side `dy/dt = f(t, y)` written into the output slice.
pub trait Rhs {
    type Error;
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Self::Error>;
}

impl<E, F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    type Error = E;
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), E> {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// One step of size `h` from `(t, y)`, updating `y` in place.
    pub fn step<R: Rhs>(
        &mut self,
        f: &mut R,
        t: f64,
        y: &mut [f64],
        h: f64,
    ) -> Result<(), R::Error> {
        let n = y.len();
        f.eval(t, y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f.eval(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f.eval(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f.eval(t + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }

    /// Integrates from `t0` to `t1` in `steps` equal steps.
    pub fn integrate<R: Rhs>(
        &mut self,
        f: &mut R,
        t0: f64,
        t1: f64,
        steps: usize,
        y: &mut [f64],
    ) -> Result<(), R::Error> {
        if steps == 0 {
            return Ok(());
        }
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            self.step(f, t0 + k as f64 * h, y, h)?;
        }
        Ok(())
    }
}

/// Number of uniform steps of size at most `dt` covering `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> usize {
    let span = (t1 - t0).abs();
    if span == 0.0 {
        0
    } else {
        ((span / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_rotation() {
        let mut rk = Rk4::new(2);
        let mut y = [1.0, 0.0];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        rk.integrate(&mut f, 0.0, 1.0, 1000, &mut y).unwrap();
        assert!((y[0] - 1f64.cos()).abs() < 1e-12);
        assert!((y[1] + 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn counts_steps() {
        assert_eq!(step_count(0.0, 1.0, 1e-3), 1000);
        assert_eq!(step_count(0.0, -0.0105, 1e-3), 11);
        assert_eq!(step_count(0.3, 0.3, 1e-3), 0);
    }
}
