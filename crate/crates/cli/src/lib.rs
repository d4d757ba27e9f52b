//! Command-line front end for `fhn-core`: TOML experiments, figure presets,
//! verification suites and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod presets;
pub mod verify;

use serde::Serialize;

use fhn_core::Error;

/// Exit status of a finished command.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_BLOW_UP: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_INVALID_BRACKET: i32 = 6;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) => EXIT_CONFIG,
        Error::Guard { .. } => EXIT_GUARD,
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::InvalidBracket(_) => EXIT_INVALID_BRACKET,
        Error::Domain(_)
        | Error::Size { .. }
        | Error::Resolution(_)
        | Error::Bracket { .. }
        | Error::NoOscillation(_) => EXIT_SOLVER,
    }
}

/// Machine-readable form written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl ErrorReport {
    pub fn new(err: &Error) -> Self {
        let error = match err {
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Guard { .. } => "guard",
            Error::BlowUp { .. } => "blow_up",
            Error::InvalidBracket(_) => "invalid_bracket",
            Error::Bracket { .. } => "bracket",
            Error::Domain(_) => "domain",
            Error::Size { .. } => "size",
            Error::Resolution(_) => "resolution",
            Error::NoOscillation(_) => "no_oscillation",
        };
        Self { error, exit_code: exit_code(err), message: err.to_string() }
    }
}
