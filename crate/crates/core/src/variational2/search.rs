//! Multiplier search over restricted ansatz classes.
//!
//! Each class turns the multiplier conditions into linear algebra on the
//! unknown entries. When a class admits no nonsingular solution the search
//! reports which condition forced which entries to vanish.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::conditions::{check_multiplier, CheckOptions};
use super::system::{b_matrix, constant_matrix, ExprMatrix, Multiplier, SecondOrderSystem};
use super::V2Error;
use crate::linalg::{nullspace, orthonormalize, project, snap};
use crate::symexpr::{
    integrate_unit_or_node, sample_values, CompiledExpr, Expr, Func, SampleError, TIME,
};

/// Labels used in obstruction chains.
pub const ALGEBRAIC_LABEL: &str = "Eq19";
pub const TRANSPORT_LABEL: &str = "Eq11";

const NULL_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    Constant,
    ScaledTime,
    DiagonalFunctions,
}

impl Ansatz {
    pub const ALL: [Ansatz; 3] = [
        Ansatz::Constant,
        Ansatz::ScaledTime,
        Ansatz::DiagonalFunctions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ansatz::Constant => "constant",
            Ansatz::ScaledTime => "scaled_time",
            Ansatz::DiagonalFunctions => "diagonal_functions",
        }
    }

    pub fn from_name(s: &str) -> Option<Ansatz> {
        Ansatz::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// Index pairs `(i, j)`, `i <= j`, of the independent entries of a
/// symmetric `n×n` matrix.
pub fn sym_unknowns(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// One-based entry name, e.g. `h12`.
pub fn entry_name(i: usize, j: usize, n: usize) -> String {
    if n < 10 {
        format!("h{}{}", i + 1, j + 1)
    } else {
        format!("h{}_{}", i + 1, j + 1)
    }
}

/// `Σ_k coefficients[k] · u_k = 0` over the symmetric unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coefficients: Vec<Expr>,
}

impl LinearConstraint {
    pub fn is_trivial(&self) -> bool {
        self.coefficients.iter().all(Expr::is_zero)
    }

    /// Divides through by the first structurally nonzero coefficient.
    pub fn normalized(&self) -> LinearConstraint {
        let Some(pivot) = self.coefficients.iter().find(|c| !c.is_zero()) else {
            return self.clone();
        };
        let inv = Expr::powi(pivot.clone(), -1);
        LinearConstraint {
            coefficients: self
                .coefficients
                .iter()
                .map(|c| Expr::mul(vec![c.clone(), inv.clone()]))
                .collect(),
        }
    }

    /// The left-hand side as an expression in entry symbols `h11, h12, ...`.
    pub fn to_expr(&self, n: usize) -> Expr {
        Expr::add(
            sym_unknowns(n)
                .into_iter()
                .zip(&self.coefficients)
                .map(|((i, j), c)| Expr::mul(vec![c.clone(), Expr::sym(&entry_name(i, j, n))]))
                .collect(),
        )
    }
}

fn unit_coefficient(x: usize, y: usize, a: usize, b: usize) -> bool {
    (x == a && y == b) || (x == b && y == a)
}

/// `(hB)_ik − (hB)_ki = 0` for `i < k`, as linear forms in the entries of a
/// symmetric `h`.
pub fn algebraic_constraints(sys: &SecondOrderSystem) -> Vec<LinearConstraint> {
    let b = b_matrix(sys);
    commutator_constraints(&b, sys.dim())
}

fn commutator_constraints(b: &ExprMatrix, n: usize) -> Vec<LinearConstraint> {
    let unknowns = sym_unknowns(n);
    let mut rows = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            let coefficients = unknowns
                .iter()
                .map(|&(a, c)| {
                    let mut terms = Vec::new();
                    for j in 0..n {
                        if unit_coefficient(i, j, a, c) {
                            terms.push(b[j][k].clone());
                        }
                        if unit_coefficient(k, j, a, c) {
                            terms.push(Expr::neg(b[j][i].clone()));
                        }
                    }
                    Expr::add(terms).expand()
                })
                .collect();
            rows.push(LinearConstraint { coefficients });
        }
    }
    rows
}

/// `½(hF + Fᵀh)_ik = 0` for `i <= k`.
fn symmetric_part_constraints(f: &ExprMatrix, n: usize) -> Vec<LinearConstraint> {
    let unknowns = sym_unknowns(n);
    let mut rows = Vec::new();
    for i in 0..n {
        for k in i..n {
            let coefficients = unknowns
                .iter()
                .map(|&(a, c)| {
                    let mut terms = Vec::new();
                    for j in 0..n {
                        if unit_coefficient(i, j, a, c) {
                            terms.push(Expr::mul(vec![Expr::Num(0.5), f[j][k].clone()]));
                        }
                        if unit_coefficient(k, j, a, c) {
                            terms.push(Expr::mul(vec![Expr::Num(0.5), f[j][i].clone()]));
                        }
                    }
                    Expr::add(terms).expand()
                })
                .collect();
            rows.push(LinearConstraint { coefficients });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionStep {
    pub condition: String,
    pub forced: Vec<String>,
}

/// Why an ansatz class admits no nonsingular multiplier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstruction {
    pub ansatz: Ansatz,
    pub steps: Vec<ObstructionStep>,
    /// Every solution in the class is singular.
    pub singular: bool,
    /// Conditions still failing for the best candidate, when the chain does
    /// not end in a singular matrix.
    pub unresolved: Vec<String>,
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| {
                let forced: Vec<String> = s.forced.iter().map(|e| format!("{e}=0")).collect();
                format!("{}→{}", s.condition, forced.join(","))
            })
            .collect();
        if self.singular {
            parts.push("det=0".into());
        }
        if !self.unresolved.is_empty() {
            parts.push(format!("unresolved: {}", self.unresolved.join(",")));
        }
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoundMultiplier {
    pub ansatz: Ansatz,
    pub multiplier: Multiplier,
    /// Basis of the constant part's solution space, as symmetric matrices.
    pub basis: Vec<Vec<Vec<f64>>>,
    /// Time factor `c(t)` of a scaled ansatz.
    pub time_factor: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(FoundMultiplier),
    Obstructed(Obstruction),
}

/// Searches `ansatz` for an integrating multiplier.
pub fn search_multiplier(
    sys: &SecondOrderSystem,
    ansatz: Ansatz,
    opts: &CheckOptions,
) -> Result<SearchOutcome, V2Error> {
    match ansatz {
        Ansatz::Constant => search_constant(sys, opts),
        Ansatz::ScaledTime => search_scaled_time(sys, opts),
        Ansatz::DiagonalFunctions => search_diagonal(sys, opts),
    }
}

/// Coefficient rows evaluated at seeded phase-space points: `[point][row][k]`.
fn sample_rows(
    sys: &SecondOrderSystem,
    rows: &[LinearConstraint],
    opts: &CheckOptions,
) -> Result<Vec<Vec<Vec<f64>>>, V2Error> {
    let vars = sys.phase_variables();
    let compiled = rows
        .iter()
        .map(|r| {
            r.coefficients
                .iter()
                .map(|c| CompiledExpr::new(c, &vars, sys.env().parameters()))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut sample = opts.sample.clone();
    sample.samples = sample.samples.clamp(1, 16);
    let values = sample_values(&vars, &sample, |x| {
        compiled
            .iter()
            .map(|r| r.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| match e {
        SampleError::Eval(e) => V2Error::Eval(e),
        other => V2Error::Domain {
            message: other.to_string(),
        },
    })?;
    Ok(values.into_iter().map(|(v, _, _)| v).collect())
}

fn stack(points: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    points.iter().flatten().cloned().collect()
}

fn forced_entries(basis: &[DVector<f64>], m: usize) -> Vec<usize> {
    (0..m)
        .filter(|&k| basis.iter().all(|b| b[k].abs() < ZERO_TOL))
        .collect()
}

struct Stager<'a> {
    names: &'a [String],
    forced: Vec<usize>,
    steps: Vec<ObstructionStep>,
}

impl Stager<'_> {
    fn record(&mut self, label: &str, now_forced: Vec<usize>) {
        let new: Vec<usize> = now_forced
            .into_iter()
            .filter(|k| !self.forced.contains(k))
            .collect();
        if !new.is_empty() {
            self.steps.push(ObstructionStep {
                condition: label.to_string(),
                forced: new.iter().map(|&k| self.names[k].clone()).collect(),
            });
            self.forced.extend(new);
        }
    }
}

fn weights(unknowns: &[(usize, usize)]) -> Vec<f64> {
    unknowns
        .iter()
        .map(|&(i, j)| {
            if i == j {
                1.0
            } else {
                std::f64::consts::SQRT_2
            }
        })
        .collect()
}

fn to_matrix(u: &DVector<f64>, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (k, &(i, j)) in sym_unknowns(n).iter().enumerate() {
        m[i][j] = u[k];
        m[j][i] = u[k];
    }
    m
}

fn is_nonsingular(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    let d = DMatrix::from_fn(n, n, |i, j| m[i][j] / scale).determinant();
    d.abs() > 1e-8
}

/// The element of `span(basis)` nearest the identity in Frobenius norm, or
/// failing that the first nonsingular basis element.
fn canonical(basis: &[DVector<f64>], n: usize) -> Option<Vec<Vec<f64>>> {
    let unknowns = sym_unknowns(n);
    let w = weights(&unknowns);
    let weighted: Vec<DVector<f64>> = basis
        .iter()
        .map(|b| DVector::from_fn(b.len(), |k, _| b[k] * w[k]))
        .collect();
    let ortho = orthonormalize(&weighted, 1e-12);
    let identity = DVector::from_fn(unknowns.len(), |k, _| {
        let (i, j) = unknowns[k];
        if i == j {
            1.0
        } else {
            0.0
        }
    });
    let p = project(&identity, &ortho);
    let u = DVector::from_fn(p.len(), |k, _| snap(p[k] / w[k], 1e-9));
    let m = to_matrix(&u, n);
    if is_nonsingular(&m) {
        return Some(m);
    }
    basis
        .iter()
        .map(|b| to_matrix(b, n))
        .find(|m| is_nonsingular(m))
}

fn basis_matrices(basis: &[DVector<f64>], n: usize) -> Vec<Vec<Vec<f64>>> {
    basis
        .iter()
        .map(|b| to_matrix(&DVector::from_fn(b.len(), |k, _| snap(b[k], 1e-12)), n))
        .collect()
}

fn names(n: usize) -> Vec<String> {
    sym_unknowns(n)
        .into_iter()
        .map(|(i, j)| entry_name(i, j, n))
        .collect()
}

fn constant_velocity_jacobian(sys: &SecondOrderSystem) -> Option<Vec<Vec<f64>>> {
    let f = sys.velocity_jacobian();
    let params = sys.env().parameters();
    let constant = f
        .iter()
        .flatten()
        .all(|e| e.free_symbols().iter().all(|s| params.contains_key(s)));
    if constant {
        constant_matrix(&f, params)
    } else {
        None
    }
}

fn search_constant(sys: &SecondOrderSystem, opts: &CheckOptions) -> Result<SearchOutcome, V2Error> {
    let n = sys.dim();
    let m = n * (n + 1) / 2;
    let Some(fnum) = constant_velocity_jacobian(sys) else {
        return Err(V2Error::UnsupportedAnsatz(
            "the constant ansatz needs ∂f/∂q̇ to be constant".into(),
        ));
    };
    let fexpr: ExprMatrix = fnum
        .iter()
        .map(|r| r.iter().map(|v| Expr::Num(*v)).collect())
        .collect();
    let alg = stack(&sample_rows(sys, &algebraic_constraints(sys), opts)?);
    let transport = stack(&sample_rows(
        sys,
        &symmetric_part_constraints(&fexpr, n),
        opts,
    )?);
    let labels = names(n);
    let mut stager = Stager {
        names: &labels,
        forced: Vec::new(),
        steps: Vec::new(),
    };
    let b1 = nullspace(&alg, m, NULL_TOL);
    stager.record(ALGEBRAIC_LABEL, forced_entries(&b1, m));
    let mut rows = alg;
    rows.extend(transport);
    let b2 = nullspace(&rows, m, NULL_TOL);
    stager.record(TRANSPORT_LABEL, forced_entries(&b2, m));
    match canonical(&b2, n) {
        Some(h) => Ok(SearchOutcome::Found(FoundMultiplier {
            ansatz: Ansatz::Constant,
            multiplier: Multiplier::from_f64(&h),
            basis: basis_matrices(&b2, n),
            time_factor: None,
        })),
        None => Ok(SearchOutcome::Obstructed(Obstruction {
            ansatz: Ansatz::Constant,
            steps: stager.steps,
            singular: true,
            unresolved: Vec::new(),
        })),
    }
}

/// `exp(−∫₀ᵗ rate dτ)`, integrating in closed form when possible.
pub fn decay_factor(rate: &Expr) -> Expr {
    let s = "__s";
    let t = Expr::sym(TIME);
    let body = rate.subs(TIME, &Expr::mul(vec![Expr::sym(s), t.clone()]));
    let (integral, _) = integrate_unit_or_node(&body, s);
    Expr::func(Func::Exp, Expr::neg(Expr::mul(vec![t, integral])))
}

fn time_only(sys: &SecondOrderSystem, e: &Expr) -> bool {
    e.free_symbols()
        .iter()
        .all(|s| s == TIME || sys.env().parameters().contains_key(s))
}

/// `Some(α)` when `∂f/∂q̇ = α(t)·I`.
fn scalar_rate(sys: &SecondOrderSystem) -> Option<Expr> {
    let f = sys.velocity_jacobian();
    let n = sys.dim();
    let alpha = f[0][0].clone();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                if f[i][j] != alpha {
                    return None;
                }
            } else if !f[i][j].is_zero() {
                return None;
            }
        }
    }
    time_only(sys, &alpha).then_some(alpha)
}

fn search_scaled_time(
    sys: &SecondOrderSystem,
    opts: &CheckOptions,
) -> Result<SearchOutcome, V2Error> {
    let n = sys.dim();
    let m = n * (n + 1) / 2;
    let labels = names(n);
    let mut stager = Stager {
        names: &labels,
        forced: Vec::new(),
        steps: Vec::new(),
    };
    let alg = stack(&sample_rows(sys, &algebraic_constraints(sys), opts)?);
    let b1 = nullspace(&alg, m, NULL_TOL);
    stager.record(ALGEBRAIC_LABEL, forced_entries(&b1, m));

    if let Some(alpha) = scalar_rate(sys) {
        // ċ h⁰ + α c h⁰ = 0 for every h⁰
        return Ok(match canonical(&b1, n) {
            Some(h0) => {
                let c = decay_factor(&alpha);
                SearchOutcome::Found(FoundMultiplier {
                    ansatz: Ansatz::ScaledTime,
                    multiplier: Multiplier::from_f64(&h0).scaled(&c),
                    basis: basis_matrices(&b1, n),
                    time_factor: Some(c),
                })
            }
            None => SearchOutcome::Obstructed(Obstruction {
                ansatz: Ansatz::ScaledTime,
                steps: stager.steps,
                singular: true,
                unresolved: Vec::new(),
            }),
        });
    }

    let Some(fnum) = constant_velocity_jacobian(sys) else {
        return Err(V2Error::UnsupportedAnsatz(
            "the scaled_time ansatz needs ∂f/∂q̇ to be α(t)·I or constant".into(),
        ));
    };
    // With c = e^{λt}: λ h⁰ = T(h⁰), T(S) = −½(SF + FᵀS).
    let unknowns = sym_unknowns(n);
    let f = DMatrix::from_fn(n, n, |i, j| fnum[i][j]);
    let mut t = DMatrix::<f64>::zeros(m, m);
    for (c, &(a, b)) in unknowns.iter().enumerate() {
        let mut s = DMatrix::<f64>::zeros(n, n);
        s[(a, b)] = 1.0;
        s[(b, a)] = 1.0;
        let ts = -0.5 * (&s * &f + f.transpose() * &s);
        for (r, &(i, j)) in unknowns.iter().enumerate() {
            t[(r, c)] = ts[(i, j)];
        }
    }
    let mut rates: Vec<f64> = Vec::new();
    if !b1.is_empty() {
        let p = DMatrix::from_columns(&b1);
        let reduced = p.transpose() * &t * &p;
        for ev in reduced.complex_eigenvalues().iter() {
            if ev.im.abs() <= 1e-9 * ev.re.abs().max(1.0)
                && !rates.iter().any(|r| (r - ev.re).abs() < 1e-8)
            {
                rates.push(ev.re);
            }
        }
    }
    rates.sort_by(f64::total_cmp);
    let mut spaces = Vec::new();
    for &lambda in &rates {
        let mut rows = alg.clone();
        for r in 0..m {
            rows.push(
                (0..m)
                    .map(|c| t[(r, c)] - if r == c { lambda } else { 0.0 })
                    .collect(),
            );
        }
        let basis = nullspace(&rows, m, NULL_TOL);
        if !basis.is_empty() {
            spaces.push((lambda, basis));
        }
    }
    let forced: Vec<usize> = (0..m)
        .filter(|&k| {
            spaces
                .iter()
                .all(|(_, b)| forced_entries(b, m).contains(&k))
        })
        .collect();
    stager.record(TRANSPORT_LABEL, forced);
    for (lambda, basis) in &spaces {
        if let Some(h0) = canonical(basis, n) {
            let c = Expr::func(
                Func::Exp,
                Expr::mul(vec![Expr::Num(snap(*lambda, 1e-12)), Expr::sym(TIME)]),
            );
            return Ok(SearchOutcome::Found(FoundMultiplier {
                ansatz: Ansatz::ScaledTime,
                multiplier: Multiplier::from_f64(&h0).scaled(&c),
                basis: basis_matrices(basis, n),
                time_factor: Some(c),
            }));
        }
    }
    Ok(SearchOutcome::Obstructed(Obstruction {
        ansatz: Ansatz::ScaledTime,
        steps: stager.steps,
        singular: true,
        unresolved: Vec::new(),
    }))
}

fn pointwise_forced(points: &[Vec<Vec<f64>>], m: usize) -> Vec<usize> {
    let per_point: Vec<Vec<usize>> = points
        .iter()
        .map(|rows| forced_entries(&nullspace(rows, m, NULL_TOL), m))
        .collect();
    (0..m)
        .filter(|k| per_point.iter().all(|f| f.contains(k)))
        .collect()
}

fn search_diagonal(sys: &SecondOrderSystem, opts: &CheckOptions) -> Result<SearchOutcome, V2Error> {
    let n = sys.dim();
    let m = n * (n + 1) / 2;
    let unknowns = sym_unknowns(n);
    let labels = names(n);
    let mut stager = Stager {
        names: &labels,
        forced: Vec::new(),
        steps: Vec::new(),
    };
    let alg_rows = algebraic_constraints(sys);
    let alg = sample_rows(sys, &alg_rows, opts)?;
    stager.record(ALGEBRAIC_LABEL, pointwise_forced(&alg, m));

    // Restrict to the diagonal: off-diagonal entries vanish identically, so
    // their transport rows reduce to ½(d_i F^i_k + d_k F^k_i) = 0.
    let diag: Vec<usize> = (0..m).filter(|&k| unknowns[k].0 == unknowns[k].1).collect();
    let restrict = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| diag.iter().map(|&k| r[k]).collect())
            .collect()
    };
    let f = sys.velocity_jacobian();
    let off_rows: Vec<LinearConstraint> = symmetric_part_constraints(&f, n)
        .into_iter()
        .zip(&unknowns)
        .filter(|(_, (i, k))| i != k)
        .map(|(r, _)| r)
        .collect();
    let transport = sample_rows(sys, &off_rows, opts)?;
    let diag_alg: Vec<Vec<Vec<f64>>> = alg.iter().map(restrict).collect();
    let lift = |forced: Vec<usize>| -> Vec<usize> { forced.into_iter().map(|k| diag[k]).collect() };
    stager.record(ALGEBRAIC_LABEL, lift(pointwise_forced(&diag_alg, n)));
    let combined: Vec<Vec<Vec<f64>>> = diag_alg
        .iter()
        .zip(&transport)
        .map(|(a, t)| {
            let mut rows = a.clone();
            rows.extend(restrict(t));
            rows
        })
        .collect();
    stager.record(TRANSPORT_LABEL, lift(pointwise_forced(&combined, n)));

    if diag.iter().any(|k| stager.forced.contains(k)) {
        return Ok(SearchOutcome::Obstructed(Obstruction {
            ansatz: Ansatz::DiagonalFunctions,
            steps: stager.steps,
            singular: true,
            unresolved: Vec::new(),
        }));
    }

    // Diagonal transport: D̂d_i + F^i_i d_i = 0, solved for d_i = d_i(t).
    if !(0..n).all(|i| time_only(sys, &f[i][i])) {
        return Err(V2Error::UnsupportedAnsatz(
            "the diagonal_functions ansatz needs every ∂f^i/∂q̇^i to depend on t only".into(),
        ));
    }
    let entries: ExprMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        decay_factor(&f[i][i])
                    } else {
                        Expr::zero()
                    }
                })
                .collect()
        })
        .collect();
    let h = Multiplier::new(entries)?;
    let report = check_multiplier(sys, &h, opts)?;
    if report.all_pass() {
        Ok(SearchOutcome::Found(FoundMultiplier {
            ansatz: Ansatz::DiagonalFunctions,
            multiplier: h,
            basis: Vec::new(),
            time_factor: None,
        }))
    } else {
        Ok(SearchOutcome::Obstructed(Obstruction {
            ansatz: Ansatz::DiagonalFunctions,
            steps: stager.steps,
            singular: false,
            unresolved: report.failing().into_iter().map(String::from).collect(),
        }))
    }
}
