//! Error type shared by every module.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cube contains no lattice point.
    EmptyCube,
    /// An exponent is outside its admissible range (q < 1, p ≤ 0, ...).
    InvalidExponent(String),
    /// Power weight |x|^a with a ≤ -n, or a dual/reverse-Hölder power that
    /// is not locally integrable where an integrable one is required.
    NonIntegrableWeight(String),
    /// A mollifier profile with ∫φ = 0 was passed where the smooth maximal
    /// function needs a nonzero mean.
    DegenerateProfile,
    /// The test-function dictionary is empty.
    EmptyDictionary,
    /// The bump handed to `make_atom` is itself a polynomial of degree ≤ d
    /// on its cube, so moment removal annihilates it.
    DegenerateBump,
    /// An admissibility window is violated; the message names the
    /// violated inequality.
    ParameterWindow(String),
    /// Not enough lattice points in a cube to determine a polynomial fit.
    CubeTooSmall(String),
    /// Requested kernel derivative order exceeds 2m.
    DerivativeOrder(String),
    /// Kernel evaluated at its singularity x = 0.
    KernelSingularity,
    /// Grid resolution below what an operation requires.
    Resolution(String),
    /// A finite-difference test region touches the domain boundary.
    TruncationContamination,
    /// Two grid functions live on different grids.
    MismatchedGrids,
    /// Zero input where a nonzero one is required (norm ratios, ...).
    TrivialInput(String),
    /// `triviality_probe` received a polynomial (degree ≤ 2m-1) input.
    PolynomialInput,
    /// A radius ladder has no radius usable on the grid.
    LadderOutsideGrid(String),
    /// The minimax optimizer hit its iteration cap; carries the best iterate.
    OptimizerStall { best_value: f64, gap: f64 },
    /// Residual of a calibration stayed above tolerance; carries the trace.
    CalibrationFailed(String),
    Io(String),
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCube => write!(f, "empty cube"),
            Error::InvalidExponent(m) => write!(f, "invalid exponent: {m}"),
            Error::NonIntegrableWeight(m) => write!(f, "non-integrable weight: {m}"),
            Error::DegenerateProfile => write!(f, "degenerate profile"),
            Error::EmptyDictionary => write!(f, "empty dictionary"),
            Error::DegenerateBump => write!(f, "degenerate bump"),
            Error::ParameterWindow(m) => write!(f, "parameter window violated: {m}"),
            Error::CubeTooSmall(m) => write!(f, "cube too small for degree: {m}"),
            Error::DerivativeOrder(m) => write!(f, "derivative order unsupported: {m}"),
            Error::KernelSingularity => write!(f, "kernel singularity"),
            Error::Resolution(m) => write!(f, "insufficient resolution: {m}"),
            Error::TruncationContamination => write!(f, "truncation contamination"),
            Error::MismatchedGrids => write!(f, "mismatched grids"),
            Error::TrivialInput(m) => write!(f, "trivial input: {m}"),
            Error::PolynomialInput => write!(f, "polynomial input"),
            Error::LadderOutsideGrid(m) => write!(f, "ladder outside grid: {m}"),
            Error::OptimizerStall { best_value, gap } => {
                write!(f, "optimizer stalled at value {best_value} (gap {gap})")
            }
            Error::CalibrationFailed(m) => write!(f, "calibration failed: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
