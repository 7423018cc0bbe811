use alloc::string::String;
use core::fmt;

/// Errors reported by space construction and operator application.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A product space needs at least one factor.
    EmptyFactorList,
    /// A factor has no outcomes.
    EmptyFactor { factor: usize },
    /// Outcome and probability lists of a factor differ in length.
    ProbLengthMismatch {
        factor: usize,
        outcomes: usize,
        probs: usize,
    },
    /// A probability is zero, negative, or non-finite.
    NonPositiveProb {
        factor: usize,
        index: usize,
        prob: f64,
    },
    /// Factor probabilities do not sum to 1 within 1e-12.
    ProbSumInvalid { factor: usize, sum: f64 },
    /// The product of factor sizes exceeds the state cap.
    StateCapExceeded { total_states: u128, cap: usize },
    /// More factors than a subset bitmask can address.
    TooManyFactors { factors: usize, max: usize },
    /// Two arguments live on different product spaces.
    SpaceMismatch,
    /// Factor index outside `0..m`.
    FactorIndexOutOfRange { index: usize, factors: usize },
    /// Subset bitmask has bits at or above position `m`.
    SubsetOutOfRange { bits: u64, factors: usize },
    /// Level index outside `0..=m` (or `0..=#blocks`).
    LevelOutOfRange { level: usize, max: usize },
    /// A random-variable value array has the wrong length.
    ValueLengthMismatch { expected: usize, got: usize },
    /// Negative time parameter for a semigroup operator.
    NegativeTime { t: f64 },
    /// A scalar parameter fell outside its admissible range.
    ParamOutOfRange { name: &'static str, value: f64 },
    /// Time grid not sorted ascending or containing a negative entry.
    UnsortedGrid,
    /// Monte-Carlo estimation needs at least one sample.
    ZeroSamples,
    /// Wick products require both inputs in H1.
    NotInH1 { defect: f64, tol: f64 },
    /// Subset-measure weights are invalid (negative or not summing to 1).
    InvalidMeasure { reason: String },
    /// Subset measure defined for a different number of atoms.
    MeasureSizeMismatch { expected: usize, got: usize },
    /// The 2^m subset enumeration was requested beyond its cap.
    SubsetEnumerationTooLarge { factors: usize, max: usize },
    /// A full decomposition would exceed the dense-output budget.
    DecompositionTooLarge { components: u128, values: u128 },
    /// Partition blocks are empty, overlapping, or do not cover all factors.
    InvalidPartition { reason: String },
    /// The claimed refinement relation between two partitions does not hold.
    RefinementViolated,
    /// Walk modulus must be an odd integer >= 3.
    InvalidWalkModulus { p: u64 },
    /// Walk truncation must have at least one step.
    InvalidWalkLength { m: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyFactorList => write!(f, "product space needs at least one factor"),
            Error::EmptyFactor { factor } => {
                write!(f, "factor {factor}: outcome list is empty")
            }
            Error::ProbLengthMismatch {
                factor,
                outcomes,
                probs,
            } => write!(
                f,
                "factor {factor}: {outcomes} outcomes but {probs} probabilities"
            ),
            Error::NonPositiveProb {
                factor,
                index,
                prob,
            } => write!(
                f,
                "factor {factor}: probability {prob} at outcome {index} is not strictly positive"
            ),
            Error::ProbSumInvalid { factor, sum } => {
                write!(f, "factor {factor}: probabilities sum to {sum}, not 1")
            }
            Error::StateCapExceeded { total_states, cap } => write!(
                f,
                "space has {total_states} states, exceeding the cap of {cap}"
            ),
            Error::TooManyFactors { factors, max } => {
                write!(f, "{factors} factors exceed the supported maximum of {max}")
            }
            Error::SpaceMismatch => write!(f, "arguments live on different product spaces"),
            Error::FactorIndexOutOfRange { index, factors } => {
                write!(f, "factor index {index} out of range for {factors} factors")
            }
            Error::SubsetOutOfRange { bits, factors } => write!(
                f,
                "subset bitmask {bits:#x} has bits outside 0..{factors}"
            ),
            Error::LevelOutOfRange { level, max } => {
                write!(f, "level {level} out of range 0..={max}")
            }
            Error::ValueLengthMismatch { expected, got } => {
                write!(f, "value array has length {got}, space has {expected} states")
            }
            Error::NegativeTime { t } => write!(f, "time parameter {t} is negative"),
            Error::ParamOutOfRange { name, value } => {
                write!(f, "parameter {name} = {value} out of range")
            }
            Error::UnsortedGrid => write!(f, "time grid must be sorted ascending and nonnegative"),
            Error::ZeroSamples => write!(f, "sample count must be at least 1"),
            Error::NotInH1 { defect, tol } => write!(
                f,
                "input not in H1: defect norm {defect} exceeds tolerance {tol}"
            ),
            Error::InvalidMeasure { reason } => write!(f, "invalid subset measure: {reason}"),
            Error::MeasureSizeMismatch { expected, got } => write!(
                f,
                "subset measure over {got} atoms, space has {expected} factors"
            ),
            Error::SubsetEnumerationTooLarge { factors, max } => write!(
                f,
                "subset enumeration over {factors} factors exceeds the maximum of {max}"
            ),
            Error::DecompositionTooLarge { components, values } => write!(
                f,
                "decomposition of {components} components ({values} values) exceeds the dense-output budget"
            ),
            Error::InvalidPartition { reason } => write!(f, "invalid partition: {reason}"),
            Error::RefinementViolated => {
                write!(f, "the fine partition does not refine the coarse one")
            }
            Error::InvalidWalkModulus { p } => {
                write!(f, "p must be odd and at least 3, got {p}")
            }
            Error::InvalidWalkLength { m } => {
                write!(f, "walk truncation m must be at least 1, got {m}")
            }
        }
    }
}

impl core::error::Error for Error {}
