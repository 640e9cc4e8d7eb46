//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input that must carry data was empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Malformed text input (CSV dataset or G-code), with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The same id appeared more than once in a record list.
    #[error("duplicate id {id} in {context}")]
    DuplicateId { id: u64, context: String },

    /// Ids present in one dataset but absent from the other.
    #[error("missing counterpart records: {}", missing_counterpart_msg(.missing_geometry, .missing_magnetization))]
    MissingCounterpart {
        /// Ids with magnetization but no geometry record.
        missing_geometry: Vec<u64>,
        /// Ids with geometry but no magnetization record.
        missing_magnetization: Vec<u64>,
    },

    /// Design failed validation; messages are the error entries of the report.
    #[error("invalid design: {}", .messages.join("; "))]
    DesignInvalid { messages: Vec<String> },

    /// A magnetization direction that cannot be oriented (zero or non-unit).
    #[error("degenerate magnetization: {0}")]
    DegenerateMagnetization(String),

    /// A target pose lies outside the machine's travel range.
    #[error("{axis} target {value} mm outside travel limits [{min}, {max}]{}", voxel_id.map(|id| format!(" (voxel {id})")).unwrap_or_default())]
    TravelLimit {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
        voxel_id: Option<u64>,
    },

    /// Bad machine or scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Field evaluation requested too close to a source singularity.
    #[error("field evaluation {distance_mm} mm from dipole (minimum {min_mm} mm)")]
    Singularity { distance_mm: f64, min_mm: f64 },

    /// Design voxels do not form a single face-connected line.
    #[error("not a chain: {0}")]
    NotAChain(String),

    /// Equilibrium solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e} N*m)")]
    Convergence { iterations: usize, residual: f64 },

    /// Program header fingerprint does not match the executing config.
    #[error("config fingerprint mismatch: program {program}, machine {machine}")]
    FingerprintMismatch { program: String, machine: String },

    /// A program violated machine semantics during execution.
    #[error("execution error: {0}")]
    Execution(String),

    /// Tool path does not cover the design it claims to.
    #[error("path/design mismatch: {0}")]
    PathDesignMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn missing_counterpart_msg(missing_geometry: &[u64], missing_magnetization: &[u64]) -> String {
    let mut parts = Vec::new();
    if !missing_geometry.is_empty() {
        parts.push(format!("no geometry for ids {missing_geometry:?}"));
    }
    if !missing_magnetization.is_empty() {
        parts.push(format!(
            "no magnetization for ids {missing_magnetization:?}"
        ));
    }
    parts.join(", ")
}

impl Error {
    /// 1-based line number for parse errors, if this is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_counterpart_names_both_sides() {
        let err = Error::MissingCounterpart {
            missing_geometry: vec![2],
            missing_magnetization: vec![3],
        };
        let msg = err.to_string();
        assert!(msg.contains("no geometry for ids [2]"), "{msg}");
        assert!(msg.contains("no magnetization for ids [3]"), "{msg}");
    }

    #[test]
    fn travel_limit_names_axis_and_voxel() {
        let err = Error::TravelLimit {
            axis: "x",
            value: 120.0,
            min: -50.0,
            max: 50.0,
            voxel_id: Some(7),
        };
        let msg = err.to_string();
        assert!(msg.contains('x'), "{msg}");
        assert!(msg.contains("voxel 7"), "{msg}");
    }
}
