use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    IndexOutOfRange { index: usize, max: usize },
    /// Pfaffian-type operation requested on a matrix of odd size.
    OddSize(usize),
    ZeroMatrix,
    /// No principal block passes the Pfaffian threshold at the detected rank.
    IllConditioned(String),
    /// Goh matrix numerically singular where an inverse is required.
    SingularGoh { det: f64 },
    /// Goh matrix has full rank where a corank-a stratum was expected.
    FullRankGoh,
    /// A symbolic expansion outgrew its term budget.
    BudgetExceeded { terms: usize, budget: usize },
    Precondition(String),
    /// Extremal flow reached `h_I = 0` with no usable control.
    Degenerate { t: f64, reason: String },
    BlowUp { t: f64 },
    /// Fuller order or construction depth beyond the configured bound.
    DepthExceeded { bound: usize },
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, max } => {
                write!(f, "index {index} out of range (max {max})")
            }
            Error::OddSize(k) => write!(f, "matrix of odd size {k} has no Pfaffian"),
            Error::ZeroMatrix => write!(f, "matrix is zero"),
            Error::IllConditioned(msg) => write!(f, "ill-conditioned: {msg}"),
            Error::SingularGoh { det } => write!(f, "Goh matrix is numerically singular (det = {det:e})"),
            Error::FullRankGoh => write!(f, "Goh matrix has full rank"),
            Error::BudgetExceeded { terms, budget } => {
                write!(f, "symbolic term budget exceeded ({terms} > {budget})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Degenerate { t, reason } => write!(f, "degenerate regime at t = {t}: {reason}"),
            Error::BlowUp { t } => write!(f, "state blew up at t = {t}"),
            Error::DepthExceeded { bound } => write!(f, "order/depth at least {bound} (bound reached)"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
