//! Bundled regression examples with expected exit codes.

use serde::{Deserialize, Serialize};

use crate::commands::{execute_to_outcome, Outcome, Request, Settings};
use crate::error::{CliError, EXIT_FAIL, EXIT_PASS};
use crate::schema::{LagrangianFile, MultiplierFile, SeedFile, SystemFile};

const FILES: &[(&str, &str)] = &[
    ("canonical2.json", include_str!("../corpus/canonical2.json")),
    (
        "dissipative.json",
        include_str!("../corpus/dissipative.json"),
    ),
    (
        "dissipative_multiplier.json",
        include_str!("../corpus/dissipative_multiplier.json"),
    ),
    ("douglas.json", include_str!("../corpus/douglas.json")),
    (
        "linear_oscillator.json",
        include_str!("../corpus/linear_oscillator.json"),
    ),
    ("magnetic.json", include_str!("../corpus/magnetic.json")),
    (
        "magnetic_multiplier.json",
        include_str!("../corpus/magnetic_multiplier.json"),
    ),
    ("malformed.json", include_str!("../corpus/malformed.json")),
    ("oscillator.json", include_str!("../corpus/oscillator.json")),
    (
        "oscillator_lagrangian.json",
        include_str!("../corpus/oscillator_lagrangian.json"),
    ),
    ("pendulum.json", include_str!("../corpus/pendulum.json")),
    ("riccati.json", include_str!("../corpus/riccati.json")),
];

const MANIFEST: &str = include_str!("../corpus/manifest.json");

/// Per-example overrides of the global flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsOverride {
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub certify_tol: Option<f64>,
    pub dt: Option<f64>,
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub name: String,
    pub command: String,
    pub system: String,
    #[serde(default)]
    pub multiplier: Option<String>,
    #[serde(default)]
    pub omega0: Option<String>,
    #[serde(default)]
    pub lagrangian: Option<String>,
    #[serde(default)]
    pub ansatz: Option<String>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub flow: bool,
    #[serde(default)]
    pub settings: SettingsOverride,
    pub expected_exit: i32,
}

pub fn file(name: &str) -> Option<&'static str> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn examples() -> Vec<Example> {
    serde_json::from_str(MANIFEST).expect("bundled manifest parses")
}

fn bundled(name: &str) -> Result<&'static str, CliError> {
    file(name).ok_or_else(|| CliError::Schema(format!("no bundled file `{name}`")))
}

fn opt<T>(
    name: &Option<String>,
    parse: fn(&str) -> Result<T, CliError>,
) -> Result<Option<T>, CliError> {
    name.as_deref()
        .map(|n| bundled(n).and_then(parse))
        .transpose()
}

impl Example {
    pub fn request(&self) -> Result<Request, CliError> {
        let system = SystemFile::from_json(bundled(&self.system)?)?;
        let horizon = self.t.unwrap_or(1.0);
        Ok(match self.command.as_str() {
            "check" => Request::Check {
                system,
                multiplier: opt(&self.multiplier, MultiplierFile::from_json)?,
                omega0: opt(&self.omega0, SeedFile::from_json)?,
                horizon,
                flow: self.flow,
            },
            "build" => Request::Build {
                system,
                multiplier: opt(&self.multiplier, MultiplierFile::from_json)?,
                ansatz: self.ansatz.clone(),
            },
            "first-order" => Request::FirstOrder {
                system,
                omega0: opt(&self.omega0, SeedFile::from_json)?,
                horizon,
                grid: self.grid.unwrap_or(10),
                flow: self.flow,
            },
            "verify" => Request::Verify {
                system,
                multiplier: opt(&self.multiplier, MultiplierFile::from_json)?,
                lagrangian: opt(&self.lagrangian, LagrangianFile::from_json)?,
                omega0: opt(&self.omega0, SeedFile::from_json)?,
                horizon,
                flow: self.flow,
            },
            other => return Err(CliError::Schema(format!("unknown command `{other}`"))),
        })
    }

    pub fn settings(&self, base: &Settings) -> Settings {
        let o = &self.settings;
        Settings {
            samples: o.samples.unwrap_or(base.samples),
            tol: o.tol.or(base.tol),
            certify_tol: o.certify_tol.unwrap_or(base.certify_tol),
            seed: base.seed,
            dt: o.dt.unwrap_or(base.dt),
            trajectories: o.trajectories.unwrap_or(base.trajectories),
        }
    }

    pub fn run(&self, base: &Settings) -> Outcome {
        match self.request() {
            Ok(req) => execute_to_outcome(&req, &self.settings(base)),
            Err(e) => Outcome {
                code: e.exit_code(),
                report: None,
                message: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleResult {
    pub name: String,
    pub expected_exit: i32,
    pub exit: i32,
    pub ok: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub pass: bool,
    pub examples: Vec<ExampleResult>,
}

pub fn run_corpus(filter: Option<&str>, base: &Settings) -> (i32, CorpusReport, String) {
    let mut results = Vec::new();
    for ex in examples() {
        if filter.is_some_and(|f| !ex.name.contains(f)) {
            continue;
        }
        let out = ex.run(base);
        results.push(ExampleResult {
            ok: out.code == ex.expected_exit,
            name: ex.name,
            expected_exit: ex.expected_exit,
            exit: out.code,
            message: out.message,
        });
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.ok)
        .map(|r| r.name.as_str())
        .collect();
    let message = if failed.is_empty() {
        format!("{} examples match their expected exit codes", results.len())
    } else {
        format!("unexpected exit codes: {}", failed.join(", "))
    };
    let pass = failed.is_empty();
    (
        if pass { EXIT_PASS } else { EXIT_FAIL },
        CorpusReport {
            pass,
            examples: results,
        },
        message,
    )
}
