use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("drive tone {tone} is near-resonant with mode {mode} (detuning {detuning:.4e}, threshold {threshold:.4e})")]
    Resonance {
        tone: usize,
        mode: &'static str,
        detuning: f64,
        threshold: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cross-Kerr rates differ (chi_a = {chi_a}, chi_b = {chi_b}) but a symmetric compensation was requested")]
    Asymmetry { chi_a: f64, chi_b: f64 },

    #[error("cannot identify cat manifold: splitting {splitting:.3e} exceeds gap/10 (gap {gap:.3e})")]
    BasisIdentification { splitting: f64, gap: f64 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("a diagonal cat basis is required for this operation")]
    MissingBasis,

    #[error("negative rate for channel {channel}: {rate}")]
    NegativeRate { channel: &'static str, rate: f64 },

    #[error("integrator diverged at t = {t:.6e} ({reason}){}", context.as_deref().map(|c| format!(" [{c}]")).unwrap_or_default())]
    IntegratorDiverged {
        t: f64,
        reason: String,
        context: Option<String>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from user-supplied configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidDimension { .. }
                | Error::DimensionMismatch { .. }
                | Error::Resonance { .. }
                | Error::Asymmetry { .. }
                | Error::OutOfRange(_)
                | Error::MissingBasis
                | Error::NegativeRate { .. }
        )
    }

    pub(crate) fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::IntegratorDiverged { t, reason, .. } => Error::IntegratorDiverged {
                t,
                reason,
                context: Some(ctx.into()),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
