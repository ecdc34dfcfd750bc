use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Problems decoding a `CTF1` byte stream. Offsets are byte positions in the
/// input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    BadMagic { found: [u8; 4] },
    UnsupportedVersion { found: u8 },
    Truncated { offset: usize, expected: usize, actual: usize },
    ZeroExtent { offset: usize },
    NonFinite { offset: usize },
    TrailingBytes { offset: usize, expected: usize, actual: usize },
    TooManyDims { ndim: usize },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::BadMagic { found } => {
                write!(f, "bad magic at offset 0: expected 43 54 46 31, found {:02x} {:02x} {:02x} {:02x}", found[0], found[1], found[2], found[3])
            }
            FormatError::UnsupportedVersion { found } => {
                write!(f, "unsupported format version at offset 3: expected '1', found 0x{found:02x}")
            }
            FormatError::Truncated { offset, expected, actual } => write!(
                f,
                "truncated at offset {offset}: expected {expected} bytes, got {actual}"
            ),
            FormatError::ZeroExtent { offset } => write!(f, "zero extent at offset {offset}"),
            FormatError::NonFinite { offset } => write!(f, "non-finite value at offset {offset}"),
            FormatError::TrailingBytes { offset, expected, actual } => write!(
                f,
                "trailing data at offset {offset}: expected {expected} bytes total, got {actual}"
            ),
            FormatError::TooManyDims { ndim } => write!(f, "{ndim} dimensions do not fit a u8"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Extents disagree. `context` names the operation.
    Shape { context: &'static str, left: Vec<usize>, right: Vec<usize> },
    /// An extent or argument is out of range.
    InvalidArgument(String),
    NonFinite { context: &'static str },
    Format(FormatError),
    TooFewPoints { distinct: usize },
    DegenerateGeometry,
    InsufficientLandmarks { needed: usize, found: usize },
}

impl Error {
    pub(crate) fn shape(context: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape { context, left: left.to_vec(), right: right.to_vec() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { context, left, right } => {
                write!(f, "{context}: shape mismatch {left:?} vs {right:?}")
            }
            Error::InvalidArgument(msg) => f.write_str(msg),
            Error::NonFinite { context } => write!(f, "{context}: non-finite value"),
            Error::Format(e) => write!(f, "format error: {e}"),
            Error::TooFewPoints { distinct } => {
                write!(f, "need at least 3 distinct points, got {distinct}")
            }
            Error::DegenerateGeometry => f.write_str("all points are collinear"),
            Error::InsufficientLandmarks { needed, found } => {
                write!(f, "insufficient landmarks: need {needed}, found {found}")
            }
        }
    }
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::Format(e)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FormatError {}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
