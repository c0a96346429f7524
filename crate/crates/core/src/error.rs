use thiserror::Error;

use crate::expr::ParseError;

/// Errors raised by the library.
///
/// Variants fall into three groups that the CLI maps onto exit codes:
/// configuration problems, numerical failures during a run, and
/// contract violations on inputs to the Čech solver.
#[derive(Debug, Error)]
pub enum GbxError {
    #[error("expression parse error at {0}")]
    Parse(#[from] ParseError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point ({u}, {v}) lies outside chart '{chart}'")]
    OutOfDomain { chart: String, u: f64, v: f64 },

    #[error("metric on chart '{chart}' is not positive definite at ({u}, {v})")]
    DegenerateMetric { chart: String, u: f64, v: f64 },

    #[error("transition map is singular at ({u}, {v})")]
    SingularTransition { u: f64, v: f64 },

    #[error("non-finite value {value} at ({u}, {v}) on chart '{chart}'")]
    NonFinite {
        chart: String,
        u: f64,
        v: f64,
        value: f64,
    },

    #[error("section vanishes at ({u}, {v}) on chart '{chart}' (undeclared singularity?)")]
    VanishingSection { chart: String, u: f64, v: f64 },

    #[error("loop under-resolved at point i={label}")]
    UnderResolved { label: i64 },

    #[error("index unstable at point i={label}: {at_radius} at r={radius}, {at_half} at r/2")]
    IndexUnstable {
        label: i64,
        radius: f64,
        at_radius: String,
        at_half: String,
    },

    #[error("finite-difference stencil exits the domain of chart '{chart}' at ({u}, {v})")]
    StencilOutOfDomain { chart: String, u: f64, v: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("{0}")]
    Cech(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
}

impl GbxError {
    pub fn class(&self) -> ErrorClass {
        match self {
            GbxError::UnderResolved { .. }
            | GbxError::IndexUnstable { .. }
            | GbxError::NonFinite { .. }
            | GbxError::VanishingSection { .. }
            | GbxError::StencilOutOfDomain { .. }
            | GbxError::SingularTransition { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Config,
        }
    }

    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            GbxError::Parse(_) => "parse",
            GbxError::Config(_) => "config",
            GbxError::OutOfDomain { .. } => "out_of_domain",
            GbxError::DegenerateMetric { .. } => "degenerate_metric",
            GbxError::SingularTransition { .. } => "singular_transition",
            GbxError::NonFinite { .. } => "non_finite",
            GbxError::VanishingSection { .. } => "vanishing_section",
            GbxError::UnderResolved { .. } => "under_resolved",
            GbxError::IndexUnstable { .. } => "index_unstable",
            GbxError::StencilOutOfDomain { .. } => "stencil",
            GbxError::Unsupported(_) => "unsupported",
            GbxError::Cech(_) => "cech",
            GbxError::Io(_) => "io",
            GbxError::Json(_) => "json",
        }
    }
}

pub type Result<T, E = GbxError> = std::result::Result<T, E>;
