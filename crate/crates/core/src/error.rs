use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("incomparable vectors: unit {left} vs {right}")]
    UnitMismatch { left: &'static str, right: &'static str },

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("undefined: empty ground truth")]
    EmptyGroundTruth,

    #[error("undefined CER: empty ground-truth text")]
    UndefinedCer,

    #[error("micro SpACER needs per-prediction pairs")]
    MissingPairs,

    #[error("per-prediction pairs do not sum to the page vectors ({0})")]
    InconsistentPairs(&'static str),

    #[error("invalid geometry for region {id}: {reason}")]
    InvalidGeometry { id: String, reason: String },

    #[error("degenerate geometry (zero area) for region {0}")]
    DegenerateGeometry(String),

    #[error("page {0} has no predicted regions")]
    MissingPredictions(String),

    #[error("OCR text references unknown region id {0}")]
    UnknownRegion(String),

    #[error("zero total ground-truth area")]
    ZeroGroundTruthArea,

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least two observations")]
    TooFewObservations,

    #[error("constant series has no rank correlation")]
    ConstantSeries,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layout cannot fit a single line: {0}")]
    LayoutTooSmall(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
