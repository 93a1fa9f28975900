use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A field evaluation or a derived quantity was not finite.
    Numerical { what: &'static str },
    /// Both `Zh` and `Z²h` vanish at a boundary point.
    AmbiguousClassification { x: f64 },
    /// `Z⁺h − Z⁻h` vanishes, so the sliding field is undefined.
    DivisionDegenerate { x: f64 },
    MaxEventsExceeded { events: usize },
    StepSizeUnderflow { t: f64 },
    /// No transversal hit of the requested section within the time budget.
    NoHit { t_budget: f64 },
    NoReturn,
    /// The cycle through the origin does not close.
    NotGrazing { residual: f64 },
    HyperbolicityViolated { lambda0: f64 },
    NoConvergence { what: &'static str, iterations: usize },
    NoCycle { what: &'static str },
    /// Sign logic and direct integration disagree about a portrait object.
    InconsistentDetection { detail: String },
    EventNotBracketed { beta1: f64 },
    IllConditioned { detail: &'static str },
    RegionMismatch { detail: String },
    /// The cycle offset never changed sign over the scanned `b` range.
    NoBracket { table: Vec<(f64, Option<f64>)> },
    InvalidInput { detail: String },
}

impl Error {
    /// Short machine-readable identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerical { .. } => "NumericalError",
            Error::AmbiguousClassification { .. } => "AmbiguousClassification",
            Error::DivisionDegenerate { .. } => "DivisionDegenerate",
            Error::MaxEventsExceeded { .. } => "MaxEventsExceeded",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::NoHit { .. } => "NoHit",
            Error::NoReturn => "NoReturn",
            Error::NotGrazing { .. } => "NotGrazing",
            Error::HyperbolicityViolated { .. } => "HyperbolicityViolated",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NoCycle { .. } => "NoCycle",
            Error::InconsistentDetection { .. } => "InconsistentDetection",
            Error::EventNotBracketed { .. } => "EventNotBracketed",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::RegionMismatch { .. } => "RegionMismatch",
            Error::NoBracket { .. } => "NoBracket",
            Error::InvalidInput { .. } => "InvalidInput",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Numerical { what } => write!(f, "non-finite value in {what}"),
            Error::AmbiguousClassification { x } => {
                write!(f, "degenerate tangency at x = {x}: Zh and Z²h both vanish")
            }
            Error::DivisionDegenerate { x } => {
                write!(f, "sliding field undefined at x = {x}: Z⁺h − Z⁻h vanishes")
            }
            Error::MaxEventsExceeded { events } => write!(f, "more than {events} events"),
            Error::StepSizeUnderflow { t } => write!(f, "step size underflow at t = {t}"),
            Error::NoHit { t_budget } => write!(f, "section not reached within t = {t_budget}"),
            Error::NoReturn => write!(f, "orbit does not return to the section"),
            Error::NotGrazing { residual } => {
                write!(f, "orbit through the origin does not close (residual {residual:e})")
            }
            Error::HyperbolicityViolated { lambda0 } => {
                write!(f, "cycle is not hyperbolic: lambda(0) = {lambda0}")
            }
            Error::NoConvergence { what, iterations } => {
                write!(f, "{what} did not converge after {iterations} iterations")
            }
            Error::NoCycle { what } => write!(f, "no limit cycle: {what}"),
            Error::InconsistentDetection { detail } => write!(f, "inconsistent detection: {detail}"),
            Error::EventNotBracketed { beta1 } => {
                write!(f, "boundary event not bracketed at beta1 = {beta1:e}")
            }
            Error::IllConditioned { detail } => write!(f, "ill-conditioned: {detail}"),
            Error::RegionMismatch { detail } => write!(f, "region mismatch: {detail}"),
            Error::NoBracket { table } => {
                write!(f, "cycle offset never changes sign over {} scanned values", table.len())
            }
            Error::InvalidInput { detail } => write!(f, "invalid input: {detail}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
