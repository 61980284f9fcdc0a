//! JSON input documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use varinverse_core::symexpr::parse;
use varinverse_core::variational1::{FirstOrderSystem, LinearSystem, SymplecticSeed};
use varinverse_core::variational2::{Multiplier, SecondOrderSystem};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    SecondOrder,
    FirstOrder,
    LinearFirstOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub kind: SystemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_field: Option<BTreeMap<String, String>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierFile {
    pub entries: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedFile {
    pub omega0: Vec<Vec<f64>>,
}

/// A Lagrangian to verify, with the multiplier it should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianFile {
    #[serde(rename = "L")]
    pub lagrangian: String,
    #[serde(default)]
    pub multiplier: Option<MultiplierFile>,
}

#[derive(Debug, Clone)]
pub enum LoadedSystem {
    SecondOrder(SecondOrderSystem),
    FirstOrder(FirstOrderSystem),
    Linear(LinearSystem),
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn ordered<'a>(
    map: &'a BTreeMap<String, String>,
    coords: &[String],
    field: &str,
) -> Result<Vec<&'a str>, CliError> {
    if let Some(extra) = map.keys().find(|k| !coords.contains(k)) {
        return Err(schema(format!(
            "`{field}` has an entry for unknown coordinate `{extra}`"
        )));
    }
    coords
        .iter()
        .map(|c| {
            map.get(c)
                .map(String::as_str)
                .ok_or_else(|| schema(format!("`{field}` is missing coordinate `{c}`")))
        })
        .collect()
}

fn refs(rows: &[Vec<String>]) -> Vec<Vec<&str>> {
    rows.iter()
        .map(|r| r.iter().map(String::as_str).collect())
        .collect()
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("system file: {e}")))
    }

    pub fn load(&self) -> Result<LoadedSystem, CliError> {
        let coords: Vec<&str> = self.coordinates.iter().map(String::as_str).collect();
        let params: Vec<(&str, f64)> = self
            .parameters
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        let stray = |present: bool, field: &str| {
            if present {
                Err(schema(format!(
                    "`{field}` does not belong in a {:?} system",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            SystemKind::SecondOrder => {
                stray(
                    self.velocity_field.is_some() || self.a.is_some() || self.j.is_some(),
                    "velocity_field/A/j",
                )?;
                let forces = self
                    .forces
                    .as_ref()
                    .ok_or_else(|| schema("second_order systems need `forces`"))?;
                let f = ordered(forces, &self.coordinates, "forces")?;
                Ok(LoadedSystem::SecondOrder(SecondOrderSystem::parse(
                    &coords, &params, &f,
                )?))
            }
            SystemKind::FirstOrder => {
                stray(
                    self.forces.is_some() || self.a.is_some() || self.j.is_some(),
                    "forces/A/j",
                )?;
                let field = self
                    .velocity_field
                    .as_ref()
                    .ok_or_else(|| schema("first_order systems need `velocity_field`"))?;
                let f = ordered(field, &self.coordinates, "velocity_field")?;
                Ok(LoadedSystem::FirstOrder(FirstOrderSystem::parse(
                    &coords, &params, &f,
                )?))
            }
            SystemKind::LinearFirstOrder => {
                stray(
                    self.forces.is_some() || self.velocity_field.is_some(),
                    "forces/velocity_field",
                )?;
                let a = self
                    .a
                    .as_ref()
                    .ok_or_else(|| schema("linear_first_order systems need `A`"))?;
                let j = self
                    .j
                    .as_ref()
                    .ok_or_else(|| schema("linear_first_order systems need `j`"))?;
                let n = self.coordinates.len();
                if a.len() != n || a.iter().any(|r| r.len() != n) || j.len() != n {
                    return Err(schema(format!(
                        "`A` must be {n}x{n} and `j` must have {n} entries"
                    )));
                }
                let j: Vec<&str> = j.iter().map(String::as_str).collect();
                Ok(LoadedSystem::Linear(LinearSystem::parse(
                    &coords,
                    &params,
                    &refs(a),
                    &j,
                )?))
            }
        }
    }
}

impl MultiplierFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("multiplier file: {e}")))
    }

    pub fn load(&self, sys: &SecondOrderSystem) -> Result<Multiplier, CliError> {
        let n = sys.dim();
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return Err(schema(format!("multiplier must be {n}x{n}")));
        }
        Ok(Multiplier::parse(sys.env(), &refs(&self.entries))?)
    }

    pub fn from_multiplier(h: &Multiplier) -> Self {
        MultiplierFile {
            entries: h.to_strings(),
        }
    }
}

impl SeedFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("seed file: {e}")))
    }

    pub fn load(&self, dim: usize) -> Result<SymplecticSeed, CliError> {
        if self.omega0.len() != dim || self.omega0.iter().any(|r| r.len() != dim) {
            return Err(schema(format!("omega0 must be {dim}x{dim}")));
        }
        Ok(SymplecticSeed::from_rows(&self.omega0)?)
    }
}

impl LagrangianFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("lagrangian file: {e}")))
    }

    pub fn load(
        &self,
        sys: &SecondOrderSystem,
    ) -> Result<(varinverse_core::symexpr::Expr, Multiplier), CliError> {
        let l = parse(&self.lagrangian, sys.env()).map_err(|e| schema(format!("L: {e}")))?;
        let h = match &self.multiplier {
            Some(m) => m.load(sys)?,
            None => Multiplier::identity(sys.dim()),
        };
        Ok((l.simplify(), h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_forces_follow_coordinate_order() {
        let f = SystemFile::from_json(
            r#"{"kind":"second_order","coordinates":["x","y"],"forces":{"y":"-y","x":"-dy"}}"#,
        )
        .unwrap();
        let LoadedSystem::SecondOrder(sys) = f.load().unwrap() else {
            panic!()
        };
        assert_eq!(sys.forces()[0].to_string(), "-dy");
    }

    #[test]
    fn rejects_mismatched_documents() {
        let bad = [
            r#"{"kind":"second_order","coordinates":["x"],"forces":{"y":"0"}}"#,
            r#"{"kind":"second_order","coordinates":["x"],"velocity_field":{"x":"0"}}"#,
            r#"{"kind":"linear_first_order","coordinates":["x"],"A":[["0","1"]],"j":["0"]}"#,
            r#"{"kind":"first_order","coordinates":["x"],"velocity_field":{"x":"zz"}}"#,
        ];
        for text in bad {
            let r = SystemFile::from_json(text).and_then(|f| f.load().map(|_| ()));
            assert!(matches!(r, Err(CliError::Schema(_))), "{text}");
        }
        assert!(SystemFile::from_json(r#"{"kind":"third_order","coordinates":[]}"#).is_err());
        assert!(SystemFile::from_json("{").is_err());
    }

    #[test]
    fn seed_must_be_square_and_valid() {
        let s = SeedFile {
            omega0: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
        };
        assert!(s.load(2).is_ok());
        assert!(s.load(4).is_err());
        let sym = SeedFile {
            omega0: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        };
        assert!(sym.load(2).is_err());
    }
}
