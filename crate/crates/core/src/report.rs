//! Named numeric checks shared by the certificate verifiers.

use serde::{Deserialize, Serialize};

/// One recomputed constraint. `margin` is the smallest eigenvalue for cone
/// checks, minus the residual for equalities, and the slack for inequalities;
/// the check passes when `margin >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            margin,
            tolerance,
            passed: margin >= -tolerance,
        }
    }
}

pub(crate) fn first_failure(checks: &[Check]) -> Option<&Check> {
    checks.iter().find(|c| !c.passed)
}

pub(crate) fn rejection(c: &Check) -> crate::Error {
    crate::Error::Rejected(format!(
        "{} violated (margin {:.3e}, tolerance {:.1e})",
        c.name, c.margin, c.tolerance
    ))
}
