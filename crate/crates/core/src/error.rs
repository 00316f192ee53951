use std::fmt;

use thiserror::Error;

/// Location of a problem inside a text input, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base matrix: {0}")]
    InvalidBase(String),

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: Position, msg: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fixed-point format mismatch: {0} vs {1}")]
    FormatMismatch(String, String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("distribution imbalance on edge type {edge_type}: variable sockets {var}, check sockets {chk}")]
    EdgeImbalance {
        edge_type: usize,
        var: String,
        chk: String,
    },

    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("memory layout: {0}")]
    Layout(String),

    #[error("pipeline hazard at cycle {cycle}: {kind} on {bank} address {address}")]
    Hazard {
        cycle: u64,
        kind: String,
        bank: String,
        address: usize,
    },

    #[error("non-physical channel: {0}")]
    NonPhysical(String),

    #[error("degenerate FER data: {0}")]
    DegenerateFit(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
