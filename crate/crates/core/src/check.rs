use std::fmt;

use serde::Serialize;

/// Outcome of a structural precondition check on a graph or leader model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// First violated condition, or `None` when satisfied.
    pub diagnostic: Option<String>,
}

impl ConditionReport {
    pub fn pass() -> Self {
        Self {
            satisfied: true,
            diagnostic: None,
        }
    }

    pub fn fail(diagnostic: impl Into<String>) -> Self {
        Self {
            satisfied: false,
            diagnostic: Some(diagnostic.into()),
        }
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.diagnostic {
            None => write!(f, "satisfied"),
            Some(d) => write!(f, "violated: {d}"),
        }
    }
}
