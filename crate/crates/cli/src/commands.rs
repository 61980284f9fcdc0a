//! Subcommand logic on in-memory documents.

use serde::Serialize;
use varinverse_core::report::{ConditionReport, ConditionResult};
use varinverse_core::symexpr::{point_rng, Expr, SampleOptions, SamplingBox};
use varinverse_core::variational1::{
    check_first_order_conditions, quadratic_action, reduce_to_first_order, ActionFields,
    FirstOrderCheckOptions, FirstOrderSystem, FlowAction, FlowMap, LinearSystem, QuadraticRow,
    SymplecticSeed,
};
use varinverse_core::variational2::{
    build_lagrangian, check_multiplier, search_multiplier, Ansatz, CheckOptions, LagrangianSO,
    Multiplier, SearchOutcome, SecondOrderSystem,
};
use varinverse_core::verifier::{
    certify, ActionDensity, CertifyOptions, FirstOrderTarget, RayDensity, SecondOrderDensity,
    SecondOrderTarget, TargetEquations, VerificationReport,
};

use crate::error::{CliError, EXIT_FAIL, EXIT_OBSTRUCTION, EXIT_PASS};
use crate::schema::{LagrangianFile, LoadedSystem, MultiplierFile, SeedFile, SystemFile};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub samples: usize,
    /// Condition tolerance; `None` picks 1e-8 for second-order checks and
    /// 1e-5 for the finite-difference first-order checks.
    pub tol: Option<f64>,
    pub certify_tol: f64,
    pub seed: u64,
    pub dt: f64,
    pub trajectories: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            samples: 64,
            tol: None,
            certify_tol: 1e-4,
            seed: 42,
            dt: 1e-3,
            trajectories: 2,
        }
    }
}

impl Settings {
    fn second_order_check(&self) -> CheckOptions {
        CheckOptions::new(self.samples, self.tol.unwrap_or(1e-8), self.seed)
    }

    fn first_order_check(&self, horizon: f64) -> FirstOrderCheckOptions {
        FirstOrderCheckOptions {
            sample: SampleOptions::default()
                .with_samples(self.samples)
                .with_seed(self.seed),
            tol: self.tol.unwrap_or(1e-5),
            t_range: (0.0, horizon),
            ..Default::default()
        }
    }

    fn certify(&self, horizon: f64) -> CertifyOptions {
        let base = CertifyOptions::default();
        CertifyOptions {
            trajectories: self.trajectories,
            window: base.window.min(horizon),
            dt: self.dt,
            t_range: (0.0, horizon),
            seed: self.seed,
            tol: self.certify_tol,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Check {
        system: SystemFile,
        multiplier: Option<MultiplierFile>,
        omega0: Option<SeedFile>,
        horizon: f64,
        flow: bool,
    },
    Build {
        system: SystemFile,
        multiplier: Option<MultiplierFile>,
        ansatz: Option<String>,
    },
    FirstOrder {
        system: SystemFile,
        omega0: Option<SeedFile>,
        horizon: f64,
        grid: usize,
        flow: bool,
    },
    Verify {
        system: SystemFile,
        multiplier: Option<MultiplierFile>,
        lagrangian: Option<LagrangianFile>,
        omega0: Option<SeedFile>,
        horizon: f64,
        flow: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCandidate {
    pub factor: String,
    pub sym11_residual: f64,
}

/// Which time factor of a scaled multiplier satisfies the transport
/// condition, among the solved factor and its square.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentOracle {
    pub candidates: Vec<ExponentCandidate>,
    pub selected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianOut {
    /// `null` when the kinetic term needs numeric quadrature.
    #[serde(rename = "K")]
    pub k: Option<String>,
    #[serde(rename = "K_quadrature", skip_serializing_if = "Option::is_none")]
    pub k_quadrature: Option<String>,
    pub l: Vec<String>,
    pub l0: String,
    #[serde(rename = "L")]
    pub lagrangian: Option<String>,
    #[serde(rename = "L_quadrature", skip_serializing_if = "Option::is_none")]
    pub lagrangian_quadrature: Option<String>,
    pub base_velocity: Vec<f64>,
    pub numeric_callable: bool,
}

/// Printed form, expanded when that is shorter. Quadrature terms of a sum
/// are kept as they are.
fn tidy(e: &Expr) -> String {
    if let Expr::Add(ts) = e {
        let (quad, rest): (Vec<Expr>, Vec<Expr>) = ts.iter().cloned().partition(Expr::has_integral);
        if !quad.is_empty() && !rest.is_empty() {
            let rest = tidy(&Expr::add(rest));
            let quad: Vec<String> = quad.iter().map(Expr::to_string).collect();
            return format!("{rest} + {}", quad.join(" + "));
        }
    }
    let plain = e.to_string();
    let expanded = e.expand().simplify().to_string();
    if expanded.len() < plain.len() {
        expanded
    } else {
        plain
    }
}

impl LagrangianOut {
    fn new(lag: &LagrangianSO) -> Self {
        let split = |e: &Expr| {
            if e.has_integral() {
                (None, Some(tidy(e)))
            } else {
                (Some(tidy(e)), None)
            }
        };
        let (k, k_quadrature) = split(&lag.k);
        let (lagrangian, lagrangian_quadrature) = split(&lag.lagrangian);
        LagrangianOut {
            k,
            k_quadrature,
            l: lag.l.iter().map(tidy).collect(),
            l0: tidy(&lag.l0),
            lagrangian,
            lagrangian_quadrature,
            base_velocity: lag.base_velocity.clone(),
            numeric_callable: lag.numeric_callable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionOut {
    pub ansatz: String,
    pub chain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRow {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(rename = "Omega")]
    pub omega: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ActionTable {
    Quadratic(Vec<QuadraticRow>),
    Flow(Vec<FlowRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionOut {
    pub path: &'static str,
    pub coordinates: Vec<String>,
    pub omega0: Vec<Vec<f64>>,
    pub table: ActionTable,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<ConditionResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<MultiplierFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_oracle: Option<ExponentOracle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<Vec<ObstructionOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionOut>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// `None` when nothing may be written.
    pub report: Option<Report>,
    pub message: String,
}

impl Outcome {
    fn from_report(report: Report, message: String) -> Self {
        Outcome {
            code: if report.pass { EXIT_PASS } else { EXIT_FAIL },
            report: Some(report),
            message,
        }
    }
}

fn conditions_message(r: &ConditionReport) -> String {
    if r.all_pass() {
        format!("all {} conditions pass", r.conditions.len())
    } else {
        format!("failing conditions: {}", r.failing().join(", "))
    }
}

fn certify_message(v: &VerificationReport) -> String {
    let order = v
        .order_estimate
        .map_or("n/a".to_string(), |o| format!("{o:.2}"));
    format!(
        "certify {}: max residual {:.3e}, order {order}",
        if v.pass { "passed" } else { "failed" },
        v.max_residual
    )
}

fn second_order(sys: LoadedSystem, what: &str) -> Result<SecondOrderSystem, CliError> {
    match sys {
        LoadedSystem::SecondOrder(s) => Ok(s),
        _ => Err(CliError::Schema(format!(
            "{what} needs a second_order system"
        ))),
    }
}

fn check_horizon(horizon: f64) -> Result<(), CliError> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(CliError::Schema(format!(
            "--t must be positive, got {horizon}"
        )))
    }
}

/// A first-order action on either path, with its equations.
enum FirstOrderAction {
    Quadratic(varinverse_core::variational1::QuadraticAction),
    Flow(FlowAction),
}

impl FirstOrderAction {
    fn fields(&self) -> &dyn ActionFields {
        match self {
            FirstOrderAction::Quadratic(q) => q,
            FirstOrderAction::Flow(f) => f,
        }
    }

    fn certify(&self, opts: &CertifyOptions) -> Result<VerificationReport, CliError> {
        let target = FirstOrderTarget::new(self.fields());
        let r = match self {
            FirstOrderAction::Quadratic(q) => certify(q, &target, opts)?,
            FirstOrderAction::Flow(f) => certify(&RayDensity::new(f), &target, opts)?,
        };
        Ok(r)
    }
}

struct FirstOrderSetup {
    coordinates: Vec<String>,
    seed: SymplecticSeed,
    action: FirstOrderAction,
}

fn first_order_setup(
    system: &SystemFile,
    omega0: Option<&SeedFile>,
    horizon: f64,
    grid: usize,
    flow: bool,
    s: &Settings,
) -> Result<FirstOrderSetup, CliError> {
    check_horizon(horizon)?;
    if grid == 0 {
        return Err(CliError::Schema("--grid must be at least 1".into()));
    }
    let (fo, lin): (FirstOrderSystem, Option<LinearSystem>) = match system.load()? {
        LoadedSystem::SecondOrder(sys) => {
            let fo = reduce_to_first_order(&sys)?;
            let lin = fo.as_linear();
            (fo, lin)
        }
        LoadedSystem::FirstOrder(fo) => {
            let lin = fo.as_linear();
            (fo, lin)
        }
        LoadedSystem::Linear(lin) => (lin.to_first_order()?, Some(lin)),
    };
    let n = fo.dim();
    let seed = match omega0 {
        Some(f) => f.load(n)?,
        None => SymplecticSeed::canonical(n)?,
    };
    let coordinates = fo.env().coordinates().to_vec();
    let action = match lin {
        Some(lin) if !flow => {
            let times: Vec<f64> = (0..=grid)
                .map(|k| horizon * k as f64 / grid as f64)
                .collect();
            FirstOrderAction::Quadratic(quadratic_action(&lin, &seed, &times, s.dt)?)
        }
        _ => FirstOrderAction::Flow(FlowAction::new(FlowMap::new(fo, s.dt)?, seed.clone())?),
    };
    Ok(FirstOrderSetup {
        coordinates,
        seed,
        action,
    })
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Ω, J and H at three seeded points per grid time.
fn flow_table(
    fa: &FlowAction,
    horizon: f64,
    grid: usize,
    seed: u64,
) -> Result<Vec<FlowRow>, CliError> {
    const POINTS: usize = 3;
    let sampling = SamplingBox::default();
    let mut rows = Vec::new();
    for k in 0..=grid {
        let t = horizon * k as f64 / grid as f64;
        let mut rng = point_rng(seed, k as u64);
        for _ in 0..POINTS {
            let x: Vec<f64> = (0..fa.dim())
                .map(|i| sampling.draw(&format!("x{i}"), &mut rng))
                .collect();
            let omega = fa.omega(t, &x)?;
            let (j, h) = fa.j_and_h(t, &x)?;
            rows.push(FlowRow {
                t,
                x,
                omega: matrix_rows(&omega),
                j: j.iter().copied().collect(),
                h,
            });
        }
    }
    Ok(rows)
}

fn exponent_oracle(
    sys: &SecondOrderSystem,
    h: &Multiplier,
    factor: &Expr,
    opts: &CheckOptions,
) -> Result<ExponentOracle, CliError> {
    let squared = Expr::powi(factor.clone(), 2).simplify();
    let mut candidates = Vec::new();
    for (f, m) in [
        (factor.clone(), h.clone()),
        (squared.clone(), h.scaled(factor)),
    ] {
        let r = check_multiplier(sys, &m, opts)?;
        let sym11 = r.get("sym11").map_or(f64::NAN, |c| c.max_residual);
        candidates.push(ExponentCandidate {
            factor: f.to_string(),
            sym11_residual: sym11,
        });
    }
    let selected = candidates
        .iter()
        .min_by(|a, b| a.sym11_residual.total_cmp(&b.sym11_residual))
        .map(|c| c.factor.clone())
        .unwrap_or_default();
    Ok(ExponentOracle {
        candidates,
        selected,
    })
}

fn second_order_certify(
    sys: &SecondOrderSystem,
    l: &Expr,
    h: &Multiplier,
    s: &Settings,
) -> Result<VerificationReport, CliError> {
    let density = SecondOrderDensity::new(l, sys.env())?;
    let target = SecondOrderTarget::new(sys, h)?;
    Ok(certify(
        &density as &dyn ActionDensity,
        &target as &dyn TargetEquations,
        &s.certify(1.0),
    )?)
}

fn run_check(
    system: &SystemFile,
    multiplier: Option<&MultiplierFile>,
    omega0: Option<&SeedFile>,
    horizon: f64,
    flow: bool,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let report = match system.load()? {
        LoadedSystem::SecondOrder(sys) => {
            let h = match multiplier {
                Some(m) => m.load(&sys)?,
                None => Multiplier::identity(sys.dim()),
            };
            check_multiplier(&sys, &h, &s.second_order_check())?
        }
        _ => {
            let setup = first_order_setup(system, omega0, horizon, 10, flow, s)?;
            check_first_order_conditions(setup.action.fields(), &s.first_order_check(horizon))?
        }
    };
    let message = conditions_message(&report);
    Ok(Outcome::from_report(
        Report {
            command: "check",
            pass: report.all_pass(),
            conditions: Some(report.conditions),
            ..Default::default()
        },
        message,
    ))
}

fn run_build(
    system: &SystemFile,
    multiplier: Option<&MultiplierFile>,
    ansatz: Option<&str>,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let sys = second_order(system.load()?, "build")?;
    let opts = s.second_order_check();
    let mut report = Report {
        command: "build",
        ..Default::default()
    };
    let (h, oracle_factor) = match (multiplier, ansatz) {
        (Some(_), Some(_)) => {
            return Err(CliError::Schema(
                "give either a multiplier file or --ansatz".into(),
            ))
        }
        (Some(m), None) => (m.load(&sys)?, None),
        (None, a) => {
            let classes = match a {
                Some(name) => vec![Ansatz::from_name(name).ok_or_else(|| {
                    let known: Vec<&str> = Ansatz::ALL.iter().map(|a| a.name()).collect();
                    CliError::Schema(format!(
                        "unknown ansatz `{name}` (expected one of {})",
                        known.join(", ")
                    ))
                })?],
                None => Ansatz::ALL.to_vec(),
            };
            let mut obstructions = Vec::new();
            let mut found = None;
            for class in classes {
                match search_multiplier(&sys, class, &opts)? {
                    SearchOutcome::Found(f) => {
                        found = Some(f);
                        break;
                    }
                    SearchOutcome::Obstructed(o) => obstructions.push(ObstructionOut {
                        ansatz: class.name().to_string(),
                        chain: o.to_string(),
                    }),
                }
            }
            match found {
                Some(f) => {
                    report.ansatz = Some(f.ansatz.name().to_string());
                    (f.multiplier, f.time_factor)
                }
                None => {
                    let message = obstructions
                        .iter()
                        .map(|o| format!("{}: {}", o.ansatz, o.chain))
                        .collect::<Vec<_>>()
                        .join("\n");
                    report.obstruction = Some(obstructions);
                    return Ok(Outcome {
                        code: EXIT_OBSTRUCTION,
                        report: Some(report),
                        message,
                    });
                }
            }
        }
    };
    report.multiplier = Some(MultiplierFile::from_multiplier(&h));
    if let Some(c) = oracle_factor.filter(|c| !c.free_symbols().is_empty()) {
        report.exponent_oracle = Some(exponent_oracle(&sys, &h, &c, &opts)?);
    }
    let conditions = check_multiplier(&sys, &h, &opts)?;
    if !conditions.all_pass() {
        let message = conditions_message(&conditions);
        report.conditions = Some(conditions.conditions);
        return Ok(Outcome::from_report(report, message));
    }
    report.conditions = Some(conditions.conditions);
    let lag = build_lagrangian(&sys, &h, &opts)?;
    let cert = second_order_certify(&sys, &lag.lagrangian, &h, s)?;
    let message = certify_message(&cert);
    report.pass = cert.pass;
    report.lagrangian = Some(LagrangianOut::new(&lag));
    report.certify = Some(cert);
    if !report.pass {
        return Ok(Outcome {
            code: EXIT_FAIL,
            report: None,
            message: format!("{message}; nothing written"),
        });
    }
    Ok(Outcome::from_report(report, message))
}

fn run_first_order(
    system: &SystemFile,
    omega0: Option<&SeedFile>,
    horizon: f64,
    grid: usize,
    flow: bool,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let setup = first_order_setup(system, omega0, horizon, grid, flow, s)?;
    let (path, table) = match &setup.action {
        FirstOrderAction::Quadratic(q) => ("closed_form", ActionTable::Quadratic(q.export()?)),
        FirstOrderAction::Flow(f) => (
            "flow",
            ActionTable::Flow(flow_table(f, horizon, grid, s.seed)?),
        ),
    };
    let conditions =
        check_first_order_conditions(setup.action.fields(), &s.first_order_check(horizon))?;
    let cert = setup.action.certify(&s.certify(horizon))?;
    let message = format!(
        "{}; {}",
        conditions_message(&conditions),
        certify_message(&cert)
    );
    Ok(Outcome::from_report(
        Report {
            command: "first-order",
            pass: conditions.all_pass() && cert.pass,
            conditions: Some(conditions.conditions),
            certify: Some(cert),
            action: Some(ActionOut {
                path,
                coordinates: setup.coordinates,
                omega0: matrix_rows(setup.seed.matrix()),
                table,
            }),
            ..Default::default()
        },
        message,
    ))
}

fn run_verify(
    system: &SystemFile,
    multiplier: Option<&MultiplierFile>,
    lagrangian: Option<&LagrangianFile>,
    omega0: Option<&SeedFile>,
    horizon: f64,
    flow: bool,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let cert = match system.load()? {
        LoadedSystem::SecondOrder(sys) => {
            let (l, h) =
                match (lagrangian, multiplier) {
                    (Some(lf), m) => {
                        let (l, mut h) = lf.load(&sys)?;
                        if let Some(m) = m {
                            h = m.load(&sys)?;
                        }
                        (l, h)
                    }
                    (None, Some(m)) => {
                        let h = m.load(&sys)?;
                        (
                            build_lagrangian(&sys, &h, &s.second_order_check())?.lagrangian,
                            h,
                        )
                    }
                    (None, None) => return Err(CliError::Schema(
                        "verify needs a Lagrangian file or a multiplier for second-order systems"
                            .into(),
                    )),
                };
            second_order_certify(&sys, &l, &h, s)?
        }
        _ => first_order_setup(system, omega0, horizon, 10, flow, s)?
            .action
            .certify(&s.certify(horizon))?,
    };
    let message = certify_message(&cert);
    Ok(Outcome::from_report(
        Report {
            command: "verify",
            pass: cert.pass,
            certify: Some(cert),
            ..Default::default()
        },
        message,
    ))
}

pub fn execute(req: &Request, s: &Settings) -> Result<Outcome, CliError> {
    match req {
        Request::Check {
            system,
            multiplier,
            omega0,
            horizon,
            flow,
        } => run_check(
            system,
            multiplier.as_ref(),
            omega0.as_ref(),
            *horizon,
            *flow,
            s,
        ),
        Request::Build {
            system,
            multiplier,
            ansatz,
        } => run_build(system, multiplier.as_ref(), ansatz.as_deref(), s),
        Request::FirstOrder {
            system,
            omega0,
            horizon,
            grid,
            flow,
        } => run_first_order(system, omega0.as_ref(), *horizon, *grid, *flow, s),
        Request::Verify {
            system,
            multiplier,
            lagrangian,
            omega0,
            horizon,
            flow,
        } => run_verify(
            system,
            multiplier.as_ref(),
            lagrangian.as_ref(),
            omega0.as_ref(),
            *horizon,
            *flow,
            s,
        ),
    }
}

/// Runs a request and folds errors into an exit code and message.
pub fn execute_to_outcome(req: &Request, s: &Settings) -> Outcome {
    execute(req, s).unwrap_or_else(|e| Outcome {
        code: e.exit_code(),
        report: None,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> SystemFile {
        SystemFile::from_json(r#"{"kind":"second_order","coordinates":["q"],"forces":{"q":"-q"}}"#)
            .unwrap()
    }

    #[test]
    fn tidy_prefers_the_shorter_form() {
        let env = varinverse_core::symexpr::SymbolEnv::new(&["x"], &[("a", 1.0)]).unwrap();
        let e = varinverse_core::symexpr::parse("a*(x + 1) - a*x", &env).unwrap();
        assert_eq!(tidy(&e), "a");
    }

    #[test]
    fn identity_check_on_a_conservative_system() {
        let req = Request::Check {
            system: oscillator(),
            multiplier: None,
            omega0: None,
            horizon: 1.0,
            flow: false,
        };
        let out = execute(&req, &Settings::default()).unwrap();
        assert_eq!(out.code, EXIT_PASS, "{}", out.message);
        assert!(out
            .report
            .unwrap()
            .conditions
            .unwrap()
            .iter()
            .all(|c| c.pass));
    }

    #[test]
    fn build_rejects_first_order_input() {
        let sys = SystemFile::from_json(
            r#"{"kind":"first_order","coordinates":["x","p"],"velocity_field":{"x":"p","p":"-x"}}"#,
        )
        .unwrap();
        let req = Request::Build {
            system: sys,
            multiplier: None,
            ansatz: None,
        };
        assert!(matches!(
            execute(&req, &Settings::default()),
            Err(CliError::Schema(_))
        ));
    }

    #[test]
    fn nonpositive_horizon_is_an_input_error() {
        let sys = SystemFile::from_json(
            r#"{"kind":"linear_first_order","coordinates":["x","p"],"A":[["0","1"],["-1","0"]],"j":["0","0"]}"#,
        )
        .unwrap();
        let req = Request::FirstOrder {
            system: sys,
            omega0: None,
            horizon: 0.0,
            grid: 4,
            flow: false,
        };
        assert_eq!(
            execute_to_outcome(&req, &Settings::default()).code,
            crate::error::EXIT_SCHEMA
        );
    }
}
