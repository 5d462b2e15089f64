use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Diagnostic, StateId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("invalid model: {}", join_diagnostics(.0))]
    InvalidModel(Vec<Diagnostic>),

    #[error(
        "state {state} is flagged reflex but has {out_degree} outgoing transitions (expected 1)"
    )]
    ReflexOutDegree { state: StateId, out_degree: usize },

    #[error("lump sum on ({from},{to}) refers to a transition that is not in the model")]
    UnknownLumpSumTransition { from: StateId, to: StateId },

    #[error("more than one lump sum declared on transition ({from},{to})")]
    DuplicateLumpSum { from: StateId, to: StateId },

    #[error(
        "ambiguous lump sums into state {state}: {reason}; split the inflows into separate \
         amount classes or remove the transitional flag"
    )]
    AmbiguousLumpSum { state: StateId, reason: String },

    #[error("missing table column {column}")]
    MissingColumn { column: String },

    #[error("unexpected table column {column}")]
    UnexpectedColumn { column: String },

    #[error("negative count in column {column} at k={k}")]
    NegativeCount { k: usize, column: String },

    #[error("non-finite count in column {column} at k={k}")]
    NonFiniteCount { k: usize, column: String },

    #[error("decrement exceeds occupancy at k={k} for state {state} ({decrements} > {occupancy})")]
    DecrementExceedsOccupancy {
        k: usize,
        state: StateId,
        decrements: f64,
        occupancy: f64,
    },

    #[error("reflex state {state} has no inbound transitions")]
    ReflexWithoutInflow { state: StateId },

    #[error("reflex states {0:?} form a cycle; occupancies cannot be inferred")]
    ReflexCycle(Vec<StateId>),

    #[error("transitional state {state} retains probability {retained} at k={k}")]
    TransitionalRetains {
        k: usize,
        state: StateId,
        retained: f64,
    },

    #[error("transition probability q({from},{to}) = {value} at k={k} lies outside [0,1]")]
    ProbabilityOutOfRange {
        k: usize,
        from: StateId,
        to: StateId,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("no premium-paying state is reachable before m={m}")]
    EmptyPaySet { m: usize },

    #[error("premium denominator is zero")]
    ZeroDenominator,

    #[error("negative benefit {value} at k={k}, state {state}")]
    NegativeBenefit {
        k: usize,
        state: StateId,
        value: f64,
    },

    #[error("unknown benefit case {0} (expected 1, 2 or 3)")]
    UnknownCase(u32),

    #[error("enumeration limited to {max_states} states and {max_periods} periods, got {states} and {periods}")]
    EnumerationTooLarge {
        states: usize,
        periods: usize,
        max_states: usize,
        max_periods: usize,
    },
}

impl Error {
    /// I/O and syntax failures, as opposed to inputs that parse but violate
    /// a model, table or valuation constraint.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. })
    }

    pub(crate) fn parse(
        origin: impl Into<String>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
