use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Numerical routines report *why* they failed (divergent series, pole,
/// table range) rather than returning NaN, so callers can distinguish a
/// configuration mistake from a genuine breakdown of the method.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series did not converge within {max_terms} terms (last term magnitude {last_term:.3e})")]
    NonConvergent { max_terms: usize, last_term: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conformal block has a pole at delta = 1 (got delta = {delta:.17e})")]
    PoleAtDeltaOne { delta: f64 },

    #[error("integral transform undefined for delta = {delta} ({requirement})")]
    InvalidDelta { delta: f64, requirement: &'static str },

    #[error("closed-form coefficients degenerate as g -> 0 (got g = {g:.3e})")]
    DivergenceAtZero { g: f64 },

    #[error("g = {g} outside curvature table range [{min}, {max}]")]
    OutOfTableRange { g: f64, min: f64, max: f64 },

    #[error("quadrature error estimate {estimate:.3e} still above tolerance after {subdivisions} subdivisions")]
    QuadratureNonConvergent { subdivisions: usize, estimate: f64 },

    #[error("table build failed at {location}: {source}")]
    TableBuild {
        location: String,
        #[source]
        source: Box<Error>,
    },

    #[error("state deltas disagree with table deltas at channel {channel}: {state} vs {table}")]
    DeltaMismatch { channel: usize, state: f64, table: f64 },

    #[error("replay buffer holds {have} transitions, need at least {need}")]
    NotEnoughData { have: usize, need: usize },

    #[error("need at least {need} run records, have {have}")]
    InsufficientRuns { need: usize, have: usize },

    #[error("search run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("no spectrum row for g = {0}")]
    NoRowForG(f64),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wrap an I/O error with the offending path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_context() {
        let e = Error::NonConvergent { max_terms: 2000, last_term: 1.5e-3 };
        let msg = e.to_string();
        assert!(msg.contains("2000"));
        assert!(msg.contains("1.500e-3"));

        let e = Error::OutOfTableRange { g: 9.5, min: 0.1, max: 4.0 };
        assert!(e.to_string().contains("9.5"));

        let e = Error::parse("spectrum.csv", 3, "expected 11 columns");
        assert!(e.to_string().contains("spectrum.csv:3"));
    }

    #[test]
    fn table_build_preserves_source() {
        use std::error::Error as _;
        let inner = Error::PoleAtDeltaOne { delta: 1.0 };
        let outer = Error::TableBuild { location: "F[channel 2, point 7]".into(), source: Box::new(inner) };
        assert!(outer.source().is_some());
        assert!(outer.to_string().contains("channel 2"));
        assert!(outer.to_string().contains("pole"));
    }
}
