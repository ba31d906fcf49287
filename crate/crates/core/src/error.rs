use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no equilibrium found: {0}")]
    NoEquilibrium(String),

    #[error("simulation diverged at t = {time:.6} s")]
    Diverged { time: f64 },

    #[error("point is not an equilibrium (residual {residual:.3e})")]
    NotAnEquilibrium { residual: f64 },

    #[error("numerical failure: {0}")]
    NumericFailure(String),

    #[error("degenerate voltage magnitude {0:.4} p.u.")]
    DegenerateVoltage(f64),

    #[error("controller state does not match scheme variant: {0}")]
    VariantMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no dominant mode in segment")]
    NoDominantMode,

    #[error("transfer function is not proper: {0}")]
    NonProper(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoEquilibrium(_)
                | Error::Diverged { .. }
                | Error::NotAnEquilibrium { .. }
                | Error::NumericFailure(_)
                | Error::DegenerateVoltage(_)
                | Error::NoDominantMode
                | Error::InsufficientData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
