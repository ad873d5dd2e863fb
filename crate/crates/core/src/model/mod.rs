//! Nest structure, utility specification and parameter layout.

mod design;
mod params;
mod spec;
mod tree;

use thiserror::Error;

pub use design::{build_design, DesignMatrix};
pub use params::{pack_parameters, unpack_parameters, ParamKind, ParamLayout, ParameterVector, Slot};
pub use spec::{validate_spec, Covariate, ModelSpec, UtilityTerm, Violation, CONSTANT};
pub use tree::{Alternative, IvSpec, Nest, NestTree};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid model specification:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("parameter names do not match the model (missing: [{}]; unexpected: [{}])", .missing.join(", "), .extra.join(", "))]
    ParameterMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("dataset has no column `{0}`")]
    UnknownColumn(String),
    #[error("unknown alternative `{0}`")]
    UnknownAlternative(String),
    #[error("non-finite value in column `{column}` at row {row} (alternative `{alternative}`)")]
    NonFiniteCovariate { row: usize, column: String, alternative: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}
