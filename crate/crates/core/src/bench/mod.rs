//! Mechanical test traces: peak extraction, specimen statistics and
//! comparison with published bond-strength values.

mod analysis;
mod reference;
mod stats;
mod trace;

use thiserror::Error;

pub use analysis::{analyze_traces, AnalysisOptions, BenchReport, FileOutcome, GroupReport};
pub use reference::{
    bond_reference, compare_to_embedded, compare_to_reference, find_reference, reference_csv, RefValue,
    ReferenceComparison, ReferenceRow, DEFAULT_REFERENCE_TOLERANCE,
};
pub use stats::{
    cycle_drift, failure_point, improvement, mean_std, onset_estimate, summarize, uniform_boundaries, CycleDrift,
    FailurePoint, GroupKey, Improvement, Summary, DEFAULT_ONSET_DROP,
};
pub use trace::{load_trace, parse_trace, trace_to_csv, BondTest, Material, MechTrace, Method, TraceKind, TraceMeta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("{0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("expected header `abscissa,value`, found `{0}`")]
    BadHeader(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: abscissa does not increase")]
    NonMonotone { row: usize },
    #[error("row {row}: value is not finite")]
    NonFinite { row: usize },
    #[error("missing metadata `#{0}=`")]
    MissingMetadata(&'static str),
    #[error("invalid metadata `#{key}={value}`")]
    InvalidMetadata { key: &'static str, value: String },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no load detected")]
    NoLoad,
    #[error("need at least 2 specimens for a standard deviation, got {0}")]
    TooFewTraces(usize),
    #[error("mixed specimen groups: {0}")]
    Mixed(String),
    #[error("baseline mean must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("cycle analysis needs a pressure-time trace")]
    WrongKind,
    #[error("need at least 2 cycles, got {0}")]
    TooFewCycles(usize),
    #[error("cycle boundaries must be strictly increasing")]
    BadBoundaries,
    #[error("cycle {0} contains no samples")]
    EmptyCycle(usize),
    #[error("no reference value for {0}")]
    UnknownReference(String),
    #[error("none of {0} inputs could be analyzed")]
    NothingToAnalyze(usize),
}
