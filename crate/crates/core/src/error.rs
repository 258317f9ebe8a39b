use thiserror::Error;

/// Errors raised by grid construction, convolution, series evaluation and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid steps differ: {0} vs {1}")]
    StepMismatch(f64, f64),

    #[error("negative cell integral {value:e} on [{a}, {b})")]
    NegativeCellMass { a: f64, b: f64, value: f64 },

    #[error("non-finite cell integral on [{a}, {b})")]
    NonFiniteCellMass { a: f64, b: f64 },

    #[error("support cap exceeded: {cells} cells requested, cap is {cap}")]
    SupportCap { cells: usize, cap: usize },

    #[error("round-off clamp removed {mass:e} of mass (limit 1e-10)")]
    RoundoffClamp { mass: f64 },

    #[error("series needs more than {cap} terms to reach residual weight {tol:e}")]
    SeriesCap { cap: usize, tol: f64 },

    #[error("window [{x_lo}, {x_hi}] plus probe offset {offset} extends past grid edge {edge}")]
    WindowOutsideGrid {
        x_lo: f64,
        x_hi: f64,
        offset: f64,
        edge: f64,
    },

    #[error("{excluded} of {total} window points have an underflowing denominator")]
    DenominatorUnderflow { excluded: usize, total: usize },

    #[error("late Spitzer terms are not monotone at n = {n}; grid too coarse")]
    NonMonotoneTail { n: usize },

    #[error("Monte Carlo path exceeded {cap} steps")]
    PathCap { cap: u64 },

    #[error("unknown {kind} `{name}`; known: {known}")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("malformed grid file: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable identifier, used in error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::StepMismatch(..) => "step_mismatch",
            Error::NegativeCellMass { .. } => "negative_cell_mass",
            Error::NonFiniteCellMass { .. } => "non_finite_cell_mass",
            Error::SupportCap { .. } => "support_cap",
            Error::RoundoffClamp { .. } => "roundoff_clamp",
            Error::SeriesCap { .. } => "series_cap",
            Error::WindowOutsideGrid { .. } => "window_outside_grid",
            Error::DenominatorUnderflow { .. } => "denominator_underflow",
            Error::NonMonotoneTail { .. } => "non_monotone_tail",
            Error::PathCap { .. } => "path_cap",
            Error::UnknownName { .. } => "unknown_name",
            Error::Csv(_) => "malformed_grid_file",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
