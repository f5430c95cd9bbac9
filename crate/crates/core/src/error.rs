//! Error type shared by the library.

use thiserror::Error;

use crate::model::MapViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter block failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The data-center description is internally inconsistent.
    #[error("model integrity error: {0}")]
    Model(String),

    /// A bandwidth or distance query could not be answered.
    #[error("network model error: {0}")]
    Network(String),

    /// A migration map violates capacity or completeness constraints.
    #[error("migration map validation failed: {}", format_violations(.0))]
    InvalidMap(Vec<MapViolation>),

    /// A VM could not be placed on any machine of its cluster.
    #[error("no feasible placement for VM {vm}")]
    Infeasible { vm: usize },

    /// Workload generation kept producing infeasible placements.
    #[error("workload generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: u32, reason: String },
}

fn format_violations(violations: &[MapViolation]) -> String {
    let shown: Vec<String> = violations.iter().take(8).map(|v| v.to_string()).collect();
    let mut text = format!("{} violation(s): {}", violations.len(), shown.join("; "));
    if violations.len() > shown.len() {
        text.push_str(", ...");
    }
    text
}
