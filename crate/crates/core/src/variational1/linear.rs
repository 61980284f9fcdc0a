use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::action::ActionFields;
use super::system::{LinearSystem, SymplecticSeed};
use super::V1Error;
use crate::ode::step_count;

/// `L = ½ xᵀΩẋ − ½ xᵀBx − Cᵀx` tabulated on a time grid, with
/// `Ω = ΛᵀΩ⁰Λ`, `Λ = Γ⁻¹`, `B = ½(ΩA − AᵀΩ)` and `C = Ωj`.
#[derive(Debug, Clone)]
pub struct QuadraticAction {
    lin: LinearSystem,
    seed: SymplecticSeed,
    dt: f64,
    grid: Vec<f64>,
    gamma: Vec<DMatrix<f64>>,
    hamiltonian_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSample {
    pub t: f64,
    pub gamma: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Export row with row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticRow {
    pub t: f64,
    #[serde(rename = "Omega")]
    pub omega: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// One RK4 step of `Γ̇ = A(t)Γ`.
fn gamma_step(
    lin: &LinearSystem,
    t: f64,
    g: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>, V1Error> {
    let a0 = lin.a_at(t)?;
    let am = lin.a_at(t + 0.5 * h)?;
    let a1 = lin.a_at(t + h)?;
    let k1 = &a0 * g;
    let k2 = &am * (g + &k1 * (0.5 * h));
    let k3 = &am * (g + &k2 * (0.5 * h));
    let k4 = &a1 * (g + &k3 * h);
    Ok(g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn advance(
    lin: &LinearSystem,
    t0: f64,
    t1: f64,
    dt: f64,
    g: &DMatrix<f64>,
) -> Result<DMatrix<f64>, V1Error> {
    let steps = step_count(t0, t1, dt);
    let mut g = g.clone();
    if steps > 0 {
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            g = gamma_step(lin, t0 + k as f64 * h, &g, h)?;
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(V1Error::NonFinite { t: t1 });
    }
    Ok(g)
}

/// Tabulates the quadratic action on `grid` (which must start at 0 and
/// increase strictly), integrating `Γ` with steps of at most `dt`.
pub fn quadratic_action(
    lin: &LinearSystem,
    seed: &SymplecticSeed,
    grid: &[f64],
    dt: f64,
) -> Result<QuadraticAction, V1Error> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(V1Error::Invalid("the time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) || grid.iter().any(|t| !t.is_finite())
    {
        return Err(V1Error::Invalid(
            "the time grid must be finite and strictly increasing".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(V1Error::Invalid(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if seed.dim() != lin.dim() {
        return Err(V1Error::Invalid(format!(
            "seed is {0}x{0} but the system has {1} coordinates",
            seed.dim(),
            lin.dim()
        )));
    }
    let n = lin.dim();
    let mut gamma = vec![DMatrix::identity(n, n)];
    for w in grid.windows(2) {
        let next = advance(lin, w[0], w[1], dt, gamma.last().expect("non-empty"))?;
        gamma.push(next);
    }
    let action = QuadraticAction {
        lin: lin.clone(),
        seed: seed.clone(),
        dt,
        grid: grid.to_vec(),
        gamma,
        hamiltonian_scale: 1.0,
    };
    for k in 0..action.grid.len() {
        action.sample(k)?;
    }
    Ok(action)
}

impl QuadraticAction {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn system(&self) -> &LinearSystem {
        &self.lin
    }

    pub fn seed(&self) -> &SymplecticSeed {
        &self.seed
    }

    /// Multiplies `H = ½xᵀBx + Cᵀx` by `k`; `k ≠ 1` breaks the action.
    pub fn with_hamiltonian_scale(mut self, k: f64) -> Self {
        self.hamiltonian_scale = k;
        self
    }

    fn assemble(&self, t: f64, gamma: DMatrix<f64>) -> Result<QuadraticSample, V1Error> {
        let svd = gamma.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        let lambda = match gamma.clone().try_inverse() {
            Some(l) if condition < 1e14 => l,
            _ => return Err(V1Error::SingularFundamental { t, condition }),
        };
        let omega = lambda.transpose() * self.seed.matrix() * &lambda;
        let a = self.lin.a_at(t)?;
        let b = (&omega * &a - a.transpose() * &omega) * (0.5 * self.hamiltonian_scale);
        let c = &omega * self.lin.j_at(t)? * self.hamiltonian_scale;
        Ok(QuadraticSample {
            t,
            gamma,
            lambda,
            omega,
            b,
            c,
        })
    }

    pub fn sample(&self, k: usize) -> Result<QuadraticSample, V1Error> {
        self.assemble(self.grid[k], self.gamma[k].clone())
    }

    /// Values at any `t >= 0`, integrating from the nearest grid point.
    pub fn at(&self, t: f64) -> Result<QuadraticSample, V1Error> {
        if !t.is_finite() {
            return Err(V1Error::Invalid(format!("t = {t}")));
        }
        let k = match self.grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(k) => return self.sample(k),
            Err(0) => 0,
            Err(i) if i == self.grid.len() => i - 1,
            Err(i) => {
                if (t - self.grid[i - 1]) <= (self.grid[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        };
        let g = advance(&self.lin, self.grid[k], t, self.dt, &self.gamma[k])?;
        self.assemble(t, g)
    }

    pub fn export(&self) -> Result<Vec<QuadraticRow>, V1Error> {
        (0..self.grid.len())
            .map(|k| {
                let s = self.sample(k)?;
                Ok(QuadraticRow {
                    t: s.t,
                    omega: rows(&s.omega),
                    b: rows(&s.b),
                    c: s.c.iter().copied().collect(),
                })
            })
            .collect()
    }
}

impl ActionFields for QuadraticAction {
    fn dim(&self) -> usize {
        self.lin.dim()
    }

    fn omega(&self, t: f64, _x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        Ok(self.at(t)?.omega)
    }

    /// `J = ½Ωᵀx`, `H = ½xᵀBx + Cᵀx`.
    fn j_and_h(&self, t: f64, x: &[f64]) -> Result<(DVector<f64>, f64), V1Error> {
        let s = self.at(t)?;
        let x = DVector::from_column_slice(x);
        let j = s.omega.tr_mul(&x) * 0.5;
        let h = 0.5 * x.dot(&(&s.b * &x)) + s.c.dot(&x);
        Ok((j, h))
    }

    fn field(&self, t: f64, x: &[f64]) -> Result<DVector<f64>, V1Error> {
        Ok(self.lin.a_at(t)? * DVector::from_column_slice(x) + self.lin.j_at(t)?)
    }

    fn field_jacobian(&self, t: f64, _x: &[f64]) -> Result<DMatrix<f64>, V1Error> {
        self.lin.a_at(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..=n).map(|k| end * k as f64 / n as f64).collect()
    }

    #[test]
    fn oscillator_closed_form() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "1"], vec!["-1", "0"]],
            &["0", "0"],
        )
        .unwrap();
        let seed = SymplecticSeed::canonical(2).unwrap();
        let qa = quadratic_action(&lin, &seed, &grid(10, 1.0), 1e-3).unwrap();
        for k in 0..=10 {
            let s = qa.sample(k).unwrap();
            assert!((&s.omega - seed.matrix()).amax() < 1e-8);
            assert!((&s.b + DMatrix::identity(2, 2)).amax() < 1e-8);
            assert_eq!(s.c.amax(), 0.0);
        }
        let mid = qa.at(0.537).unwrap();
        let t: f64 = 0.537;
        assert!(
            (mid.gamma[(0, 0)] - t.cos()).abs() < 1e-12
                && (mid.gamma[(0, 1)] - t.sin()).abs() < 1e-12
        );
    }

    #[test]
    fn constant_source() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "0"], vec!["0", "0"]],
            &["1", "2"],
        )
        .unwrap();
        let seed = SymplecticSeed::canonical(2).unwrap();
        let s = quadratic_action(&lin, &seed, &grid(4, 1.0), 1e-3)
            .unwrap()
            .sample(4)
            .unwrap();
        assert_eq!(s.omega, seed.matrix().clone());
        assert_eq!(s.b.amax(), 0.0);
        assert_eq!(s.c, seed.matrix() * DVector::from_vec(vec![1.0, 2.0]));
    }

    #[test]
    fn time_dependent_rotation() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "t"], vec!["-t", "0"]],
            &["0", "0"],
        )
        .unwrap();
        let seed = SymplecticSeed::canonical(2).unwrap();
        let qa = quadratic_action(&lin, &seed, &grid(20, 1.0), 1e-3).unwrap();
        let s = qa.sample(20).unwrap();
        assert!((s.gamma[(0, 0)] - 0.5f64.cos()).abs() < 1e-10);
        assert!((&s.omega - seed.matrix()).amax() < 1e-10);
    }

    #[test]
    fn export_is_row_major() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "1"], vec!["0", "0"]],
            &["0", "0"],
        )
        .unwrap();
        let qa = quadratic_action(
            &lin,
            &SymplecticSeed::canonical(2).unwrap(),
            &[0.0, 0.5],
            1e-3,
        )
        .unwrap();
        let rows = qa.export().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].omega, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn rejects_bad_grids() {
        let lin = LinearSystem::parse(
            &["q", "p"],
            &[],
            &[vec!["0", "1"], vec!["0", "0"]],
            &["0", "0"],
        )
        .unwrap();
        let seed = SymplecticSeed::canonical(2).unwrap();
        assert!(quadratic_action(&lin, &seed, &[0.1, 0.2], 1e-3).is_err());
        assert!(quadratic_action(&lin, &seed, &[0.0, 0.0], 1e-3).is_err());
        assert!(quadratic_action(&lin, &seed, &[], 1e-3).is_err());
    }
}
