use nalgebra::DMatrix;

use super::V1Error;
use crate::symexpr::{parse, CompiledExpr, Expr, SymbolEnv, SymbolKind, TIME};
use crate::variational2::SecondOrderSystem;

/// `ẋ^α = f^α(t, x)` with an even number of coordinates.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    env: SymbolEnv,
    field: Vec<Expr>,
}

fn check_symbols(env: &SymbolEnv, e: &Expr, what: &str) -> Result<(), V1Error> {
    for s in e.free_symbols() {
        match env.kind(&s) {
            Some(SymbolKind::Time | SymbolKind::Coordinate(_) | SymbolKind::Parameter(_)) => {}
            _ => {
                return Err(V1Error::Invalid(format!(
                    "{what} `{e}` uses `{s}`, which is neither t, a coordinate nor a parameter"
                )))
            }
        }
    }
    Ok(())
}

impl FirstOrderSystem {
    pub fn new(env: SymbolEnv, field: Vec<Expr>) -> Result<Self, V1Error> {
        let n = env.dim();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(V1Error::Invalid(format!(
                "a first-order system needs an even number (>= 2) of coordinates, got {n}"
            )));
        }
        if field.len() != n {
            return Err(V1Error::Invalid(format!(
                "{} field components for {n} coordinates",
                field.len()
            )));
        }
        let field: Vec<Expr> = field.iter().map(Expr::simplify).collect();
        for f in &field {
            check_symbols(&env, f, "velocity field component")?;
        }
        Ok(FirstOrderSystem { env, field })
    }

    pub fn parse(
        coordinates: &[&str],
        parameters: &[(&str, f64)],
        field: &[&str],
    ) -> Result<Self, V1Error> {
        let env = SymbolEnv::new(coordinates, parameters)?;
        let field = field
            .iter()
            .map(|s| parse(s, &env))
            .collect::<Result<Vec<_>, _>>()?;
        FirstOrderSystem::new(env, field)
    }

    pub fn env(&self) -> &SymbolEnv {
        &self.env
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    pub fn field(&self) -> &[Expr] {
        &self.field
    }

    /// `t, x^1, ..., x^N`.
    pub fn variables(&self) -> Vec<String> {
        let mut v = vec![TIME.to_string()];
        v.extend(self.env.coordinates().iter().cloned());
        v
    }

    /// `∂f^α/∂x^β`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        let x = self.env.coordinates();
        self.field
            .iter()
            .map(|f| x.iter().map(|c| f.diff(c)).collect())
            .collect()
    }

    pub(crate) fn compile_field(&self) -> Result<Vec<CompiledExpr>, V1Error> {
        let vars = self.variables();
        self.field
            .iter()
            .map(|f| CompiledExpr::new(f, &vars, self.env.parameters()).map_err(V1Error::from))
            .collect()
    }

    /// Whether `f` is affine in `x`; then returns `A(t)` and `j(t)`.
    pub fn as_linear(&self) -> Option<LinearSystem> {
        let a = self.jacobian();
        let x = self.env.coordinates();
        if a.iter()
            .flatten()
            .any(|e| x.iter().any(|c| e.contains_symbol(c)))
        {
            return None;
        }
        let j = self
            .field
            .iter()
            .map(|f| f.substitute(&|s| x.iter().any(|c| c == s).then(Expr::zero)))
            .collect();
        LinearSystem::new(self.env.clone(), a, j).ok()
    }
}

/// `q̈ = f(t, q, q̇)` rewritten as `q̇ = p`, `ṗ = f(t, q, p)` with momenta
/// named `p_<coordinate>`.
pub fn reduce_to_first_order(sys: &SecondOrderSystem) -> Result<FirstOrderSystem, V1Error> {
    let q = sys.coordinates();
    let v = sys.velocities();
    let p: Vec<String> = q.iter().map(|c| format!("p_{c}")).collect();
    let mut names: Vec<&str> = q.iter().map(String::as_str).collect();
    names.extend(p.iter().map(String::as_str));
    let env = SymbolEnv::from_parts(
        names.iter().map(|s| s.to_string()).collect(),
        sys.env().parameters().clone(),
    )?;
    let rename = |s: &str| v.iter().position(|n| n == s).map(|i| Expr::sym(&p[i]));
    let mut field: Vec<Expr> = p.iter().map(|s| Expr::sym(s)).collect();
    field.extend(sys.forces().iter().map(|f| f.substitute(&rename)));
    FirstOrderSystem::new(env, field)
}

/// `ẋ = A(t) x + j(t)`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    env: SymbolEnv,
    a: Vec<Vec<Expr>>,
    j: Vec<Expr>,
    a_c: Vec<CompiledExpr>,
    j_c: Vec<CompiledExpr>,
}

impl LinearSystem {
    pub fn new(env: SymbolEnv, a: Vec<Vec<Expr>>, j: Vec<Expr>) -> Result<Self, V1Error> {
        let n = env.dim();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(V1Error::Invalid(format!(
                "a linear system needs an even number (>= 2) of coordinates, got {n}"
            )));
        }
        if a.len() != n || a.iter().any(|r| r.len() != n) || j.len() != n {
            return Err(V1Error::Invalid(format!(
                "A must be {n}x{n} and j must have {n} entries"
            )));
        }
        let a: Vec<Vec<Expr>> = a
            .iter()
            .map(|r| r.iter().map(Expr::simplify).collect())
            .collect();
        let j: Vec<Expr> = j.iter().map(Expr::simplify).collect();
        let vars = vec![TIME.to_string()];
        let params = env.parameters();
        let compile = |e: &Expr, what: &str| -> Result<CompiledExpr, V1Error> {
            for s in e.free_symbols() {
                if s != TIME && !params.contains_key(&s) {
                    return Err(V1Error::Invalid(format!(
                        "{what} `{e}` may depend on t and parameters only, found `{s}`"
                    )));
                }
            }
            Ok(CompiledExpr::new(e, &vars, params)?)
        };
        let a_c = a
            .iter()
            .flatten()
            .map(|e| compile(e, "A entry"))
            .collect::<Result<_, _>>()?;
        let j_c = j
            .iter()
            .map(|e| compile(e, "j entry"))
            .collect::<Result<_, _>>()?;
        Ok(LinearSystem {
            env,
            a,
            j,
            a_c,
            j_c,
        })
    }

    pub fn parse(
        coordinates: &[&str],
        parameters: &[(&str, f64)],
        a: &[Vec<&str>],
        j: &[&str],
    ) -> Result<Self, V1Error> {
        let env = SymbolEnv::new(coordinates, parameters)?;
        let a = a
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse(s, &env))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let j = j
            .iter()
            .map(|s| parse(s, &env))
            .collect::<Result<Vec<_>, _>>()?;
        LinearSystem::new(env, a, j)
    }

    pub fn env(&self) -> &SymbolEnv {
        &self.env
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    pub fn a_exprs(&self) -> &[Vec<Expr>] {
        &self.a
    }

    pub fn j_exprs(&self) -> &[Expr] {
        &self.j
    }

    pub fn a_at(&self, t: f64) -> Result<DMatrix<f64>, V1Error> {
        let n = self.dim();
        let mut vals = Vec::with_capacity(n * n);
        for c in &self.a_c {
            vals.push(c.eval(&[t])?);
        }
        Ok(DMatrix::from_row_slice(n, n, &vals))
    }

    pub fn j_at(&self, t: f64) -> Result<nalgebra::DVector<f64>, V1Error> {
        let vals = self
            .j_c
            .iter()
            .map(|c| c.eval(&[t]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(nalgebra::DVector::from_vec(vals))
    }

    /// The same dynamics as a general first-order system.
    pub fn to_first_order(&self) -> Result<FirstOrderSystem, V1Error> {
        let x = self.env.coordinates();
        let field = (0..self.dim())
            .map(|i| {
                let mut terms: Vec<Expr> = (0..self.dim())
                    .map(|k| Expr::mul(vec![self.a[i][k].clone(), Expr::sym(&x[k])]))
                    .collect();
                terms.push(self.j[i].clone());
                Expr::add(terms)
            })
            .collect();
        FirstOrderSystem::new(self.env.clone(), field)
    }
}

/// Constant nonsingular antisymmetric `Ω⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSeed {
    matrix: DMatrix<f64>,
}

impl SymplecticSeed {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, V1Error> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(V1Error::Invalid(
                "seed must be a non-empty square matrix".into(),
            ));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(V1Error::Invalid("seed has non-finite entries".into()));
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix + matrix.transpose()).amax() > 1e-12 * scale {
            return Err(V1Error::Invalid("seed must be antisymmetric".into()));
        }
        if matrix.determinant().abs() <= 1e-12 * scale.powi(n as i32) {
            return Err(V1Error::Invalid("seed must be nonsingular".into()));
        }
        Ok(SymplecticSeed { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, V1Error> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(V1Error::Invalid("seed must be square".into()));
        }
        SymplecticSeed::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// `[[0, I], [−I, 0]]`.
    pub fn canonical(n: usize) -> Result<Self, V1Error> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(V1Error::Invalid(format!(
                "canonical seed needs an even dimension, got {n}"
            )));
        }
        let h = n / 2;
        SymplecticSeed::new(DMatrix::from_fn(n, n, |i, j| {
            if j == i + h {
                1.0
            } else if i == j + h {
                -1.0
            } else {
                0.0
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}
