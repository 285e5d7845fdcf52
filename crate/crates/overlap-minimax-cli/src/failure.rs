use std::fmt;

use overlap_minimax::Error;
use serde::Serialize;

use crate::output::SCHEMA_VERSION;

/// Process exit codes.
pub mod code {
    pub const VALIDATION: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const STRICT: i32 = 4;
}

/// A fatal outcome: exit code plus a machine-readable kind.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: code::VALIDATION, kind: "validation", message: message.into() }
    }

    pub fn strict(message: impl Into<String>) -> Self {
        Self { code: code::STRICT, kind: "degenerate_estimand", message: message.into() }
    }

    pub fn io(err: std::io::Error) -> Self {
        Self { code: code::VALIDATION, kind: "io", message: err.to_string() }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            schema_version: u32,
            error: &'a str,
            message: &'a str,
            exit_code: i32,
        }
        serde_json::to_string(&Body {
            schema_version: SCHEMA_VERSION,
            error: self.kind,
            message: &self.message,
            exit_code: self.code,
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

/// Library error kind and exit code.
pub fn classify(err: &Error) -> (&'static str, i32) {
    match err {
        Error::Schema(_) | Error::Json(_) => ("schema", code::VALIDATION),
        Error::InvalidInput(_) | Error::Unsupported(_) | Error::InsufficientUnits { .. } | Error::InfiniteSlope { .. } => {
            ("validation", code::VALIDATION)
        }
        Error::Degenerate(_) => ("degenerate", code::VALIDATION),
        Error::Io(_) => ("io", code::VALIDATION),
        Error::NotConverged { .. } | Error::Inconsistent(_) | Error::Infeasible(_) | Error::LevelMismatch(..) => {
            ("solver", code::SOLVER)
        }
        Error::Step { source, .. } => classify(source),
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let (kind, code) = classify(&err);
        Self { code, kind, message: err.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Self::io(err)
    }
}

impl From<csv::Error> for Failure {
    fn from(err: csv::Error) -> Self {
        Self { code: code::VALIDATION, kind: "io", message: err.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Self { code: code::VALIDATION, kind: "schema", message: err.to_string() }
    }
}
