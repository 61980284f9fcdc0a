use std::collections::BTreeMap;

use super::V2Error;
use crate::symexpr::{parse, Expr, SymbolEnv, SymbolKind, TIME};

/// Square matrix of expressions, row-major.
pub type ExprMatrix = Vec<Vec<Expr>>;

/// `q̈^i = f^i(t, q, q̇)`.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    env: SymbolEnv,
    forces: Vec<Expr>,
}

impl SecondOrderSystem {
    pub fn new(env: SymbolEnv, forces: Vec<Expr>) -> Result<Self, V2Error> {
        if env.dim() == 0 {
            return Err(V2Error::Invalid(
                "at least one coordinate is required".into(),
            ));
        }
        if forces.len() != env.dim() {
            return Err(V2Error::Invalid(format!(
                "{} forces for {} coordinates",
                forces.len(),
                env.dim()
            )));
        }
        let forces: Vec<Expr> = forces.iter().map(Expr::simplify).collect();
        for f in &forces {
            check_phase_space(&env, f, "force")?;
        }
        Ok(SecondOrderSystem { env, forces })
    }

    /// Parses coordinate names, parameters and one force per coordinate.
    pub fn parse(
        coordinates: &[&str],
        parameters: &[(&str, f64)],
        forces: &[&str],
    ) -> Result<Self, V2Error> {
        let env = SymbolEnv::new(coordinates, parameters)?;
        let forces = forces
            .iter()
            .map(|s| parse(s, &env))
            .collect::<Result<Vec<_>, _>>()?;
        SecondOrderSystem::new(env, forces)
    }

    pub fn env(&self) -> &SymbolEnv {
        &self.env
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    pub fn forces(&self) -> &[Expr] {
        &self.forces
    }

    pub fn coordinates(&self) -> Vec<String> {
        self.env.coordinates().to_vec()
    }

    pub fn velocities(&self) -> Vec<String> {
        self.env.velocities()
    }

    /// Phase-space variables `t, q..., q̇...` in sampling order.
    pub fn phase_variables(&self) -> Vec<String> {
        let mut v = vec![TIME.to_string()];
        v.extend(self.coordinates());
        v.extend(self.velocities());
        v
    }

    /// `F^i_j = ∂f^i/∂q̇^j`.
    pub fn velocity_jacobian(&self) -> ExprMatrix {
        let vel = self.velocities();
        self.forces
            .iter()
            .map(|f| vel.iter().map(|v| f.diff(v)).collect())
            .collect()
    }

    /// `∂f^i/∂q^j`.
    pub fn coordinate_jacobian(&self) -> ExprMatrix {
        let q = self.coordinates();
        self.forces
            .iter()
            .map(|f| q.iter().map(|c| f.diff(c)).collect())
            .collect()
    }
}

pub(crate) fn check_phase_space(env: &SymbolEnv, e: &Expr, what: &str) -> Result<(), V2Error> {
    for s in e.free_symbols() {
        match env.kind(&s) {
            Some(SymbolKind::Acceleration(_)) | None => {
                return Err(V2Error::Invalid(format!(
                    "{what} `{e}` uses `{s}`, which is not a phase-space symbol"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Candidate integrating multiplier `h_ij(t, q, q̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    entries: ExprMatrix,
}

impl Multiplier {
    pub fn new(entries: ExprMatrix) -> Result<Self, V2Error> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(V2Error::Invalid(
                "multiplier must be a non-empty square matrix".into(),
            ));
        }
        Ok(Multiplier {
            entries: entries
                .into_iter()
                .map(|r| r.iter().map(Expr::simplify).collect())
                .collect(),
        })
    }

    pub fn parse(env: &SymbolEnv, rows: &[Vec<&str>]) -> Result<Self, V2Error> {
        let entries = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse(s, env))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Multiplier::new(entries)
    }

    pub fn identity(n: usize) -> Self {
        Multiplier::from_f64(
            &(0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
    }

    pub fn from_f64(m: &[Vec<f64>]) -> Self {
        Multiplier {
            entries: m
                .iter()
                .map(|r| r.iter().map(|v| Expr::Num(*v)).collect())
                .collect(),
        }
    }

    pub fn scaled(&self, c: &Expr) -> Self {
        Multiplier {
            entries: self
                .entries
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|e| Expr::mul(vec![c.clone(), e.clone()]))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &ExprMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i][j]
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e.to_string()).collect())
            .collect()
    }

    pub(crate) fn check_dim(&self, sys: &SecondOrderSystem) -> Result<(), V2Error> {
        if self.dim() != sys.dim() {
            return Err(V2Error::Invalid(format!(
                "multiplier is {}x{} but the system has {} coordinates",
                self.dim(),
                self.dim(),
                sys.dim()
            )));
        }
        for row in &self.entries {
            for e in row {
                check_phase_space(sys.env(), e, "multiplier entry")?;
            }
        }
        Ok(())
    }
}

/// `D̂e = ∂_t e + q̇^j ∂_{q^j} e + f^j ∂_{q̇^j} e`.
pub fn d_hat(sys: &SecondOrderSystem, e: &Expr) -> Expr {
    let mut terms = vec![e.diff(TIME)];
    for (j, (q, v)) in sys.coordinates().iter().zip(sys.velocities()).enumerate() {
        terms.push(Expr::mul(vec![Expr::sym(&v), e.diff(q)]));
        terms.push(Expr::mul(vec![sys.forces()[j].clone(), e.diff(&v)]));
    }
    Expr::add(terms)
}

/// `B^i_j = ½ F^i_m F^m_j − D̂F^i_j + 2 ∂f^i/∂q^j`.
pub fn b_matrix(sys: &SecondOrderSystem) -> ExprMatrix {
    let n = sys.dim();
    let f = sys.velocity_jacobian();
    let g = sys.coordinate_jacobian();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut terms: Vec<Expr> = (0..n)
                        .map(|m| Expr::mul(vec![Expr::Num(0.5), f[i][m].clone(), f[m][j].clone()]))
                        .collect();
                    terms.push(Expr::neg(d_hat(sys, &f[i][j])));
                    terms.push(Expr::mul(vec![Expr::Num(2.0), g[i][j].clone()]));
                    Expr::add(terms)
                })
                .collect()
        })
        .collect()
}

/// `A_ik = ½ (h_ij F^j_k − h_kj F^j_i)`.
pub fn a_matrix(h: &Multiplier, f: &ExprMatrix) -> ExprMatrix {
    let n = h.dim();
    let hf = mat_mul(h.entries(), f);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    Expr::mul(vec![
                        Expr::Num(0.5),
                        Expr::sub(hf[i][k].clone(), hf[k][i].clone()),
                    ])
                })
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &ExprMatrix, b: &ExprMatrix) -> ExprMatrix {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    Expr::add(
                        (0..b.len())
                            .map(|k| Expr::mul(vec![a[i][k].clone(), b[k][j].clone()]))
                            .collect(),
                    )
                })
                .collect()
        })
        .collect()
}

/// Numeric value of a matrix whose entries are constant expressions.
pub fn constant_matrix(m: &ExprMatrix, params: &BTreeMap<String, f64>) -> Option<Vec<Vec<f64>>> {
    m.iter()
        .map(|r| {
            r.iter()
                .map(|e| e.eval(&|s| params.get(s).copied()).ok())
                .collect()
        })
        .collect()
}
