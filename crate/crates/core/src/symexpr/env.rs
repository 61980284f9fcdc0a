use std::collections::BTreeMap;

use thiserror::Error;

use super::expr::Func;

pub const TIME: &str = "t";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("duplicate symbol `{0}`")]
    Duplicate(String),
    #[error("names starting with `__` are reserved: `{0}`")]
    Reserved(String),
    #[error("`t` is reserved for time")]
    ReservedTime,
    #[error("`{0}` is a function name")]
    FunctionName(String),
    #[error("`{name}` is ambiguous with the velocity of `{coordinate}`")]
    VelocityClash { name: String, coordinate: String },
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("parameter `{0}` has a non-finite value")]
    NonFiniteParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    Time,
    Coordinate(usize),
    Velocity(usize),
    Acceleration(usize),
    Parameter(f64),
}

/// Declared symbols: time `t`, ordered coordinates with their velocities
/// `d<name>` and accelerations `dd<name>`, and numeric parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEnv {
    coordinates: Vec<String>,
    parameters: BTreeMap<String, f64>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SymbolEnv {
    pub fn new(coordinates: &[&str], parameters: &[(&str, f64)]) -> Result<Self, EnvError> {
        Self::from_parts(
            coordinates.iter().map(|s| s.to_string()).collect(),
            parameters
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        )
    }

    pub fn from_parts(
        coordinates: Vec<String>,
        parameters: BTreeMap<String, f64>,
    ) -> Result<Self, EnvError> {
        let mut seen: Vec<&str> = Vec::new();
        let all = coordinates.iter().chain(parameters.keys());
        for name in all {
            if !is_identifier(name) {
                return Err(EnvError::InvalidIdentifier(name.clone()));
            }
            if name.starts_with("__") {
                return Err(EnvError::Reserved(name.clone()));
            }
            if name == TIME {
                return Err(EnvError::ReservedTime);
            }
            if Func::from_name(name).is_some() {
                return Err(EnvError::FunctionName(name.clone()));
            }
            if seen.contains(&name.as_str()) {
                return Err(EnvError::Duplicate(name.clone()));
            }
            seen.push(name);
        }
        for name in coordinates.iter().chain(parameters.keys()) {
            for c in &coordinates {
                if let Some(rest) = name.strip_prefix('d') {
                    let clash = rest == c || rest.strip_prefix('d') == Some(c.as_str());
                    if clash {
                        return Err(EnvError::VelocityClash {
                            name: name.clone(),
                            coordinate: c.clone(),
                        });
                    }
                }
            }
        }
        if let Some((k, _)) = parameters.iter().find(|(_, v)| !v.is_finite()) {
            return Err(EnvError::NonFiniteParameter(k.clone()));
        }
        Ok(SymbolEnv {
            coordinates,
            parameters,
        })
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn velocity(&self, i: usize) -> String {
        format!("d{}", self.coordinates[i])
    }

    pub fn acceleration(&self, i: usize) -> String {
        format!("dd{}", self.coordinates[i])
    }

    pub fn velocities(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.velocity(i)).collect()
    }

    pub fn accelerations(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.acceleration(i)).collect()
    }

    pub fn kind(&self, name: &str) -> Option<SymbolKind> {
        if name == TIME {
            return Some(SymbolKind::Time);
        }
        if let Some(v) = self.parameters.get(name) {
            return Some(SymbolKind::Parameter(*v));
        }
        if let Some(i) = self.coordinates.iter().position(|c| c == name) {
            return Some(SymbolKind::Coordinate(i));
        }
        let rest = name.strip_prefix('d')?;
        if let Some(i) = self.coordinates.iter().position(|c| c == rest) {
            return Some(SymbolKind::Velocity(i));
        }
        let rest = rest.strip_prefix('d')?;
        self.coordinates
            .iter()
            .position(|c| c == rest)
            .map(SymbolKind::Acceleration)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.kind(name).is_some()
    }

    /// Parameter bindings, as used for evaluation.
    pub fn parameter_bindings(&self) -> BTreeMap<String, f64> {
        self.parameters.clone()
    }

    /// Same parameters over a different coordinate list.
    pub fn with_coordinates(&self, coordinates: Vec<String>) -> Result<SymbolEnv, EnvError> {
        SymbolEnv::from_parts(coordinates, self.parameters.clone())
    }
}
