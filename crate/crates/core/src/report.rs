use std::collections::BTreeMap;

use serde::Serialize;

/// Outcome of one numerically checked condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: String,
    pub pass: bool,
    pub max_residual: f64,
    pub witness: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.id.as_str())
            .collect()
    }

    pub(crate) fn push(
        &mut self,
        id: &str,
        max_residual: f64,
        tol: f64,
        witness: BTreeMap<String, f64>,
    ) {
        self.conditions.push(ConditionResult {
            id: id.to_string(),
            pass: max_residual.is_finite() && max_residual < tol,
            max_residual,
            witness,
        });
    }
}
