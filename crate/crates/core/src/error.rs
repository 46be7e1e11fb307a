use crate::spectral::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not traceless: |Tr| = {trace:e} with norm {norm:e}")]
    NotTraceless { trace: f64, norm: f64 },

    #[error("non-finite {what} at z = {z}")]
    NonFinite { what: &'static str, z: f64 },

    #[error("spectral frame undefined at z = {z}: {reason}")]
    FrameSingular { z: f64, reason: String },

    #[error("exceptional point ({regime}) at z = {z}")]
    ExceptionalPoint { z: f64, regime: Regime },

    #[error("polynomial has a zero leading coefficient")]
    ZeroLeadingCoefficient,

    #[error("step size underflow at z = {z} (h = {h:e})")]
    StepSizeUnderflow { z: f64, h: f64 },

    #[error("renormalization undefined: all weights vanish")]
    UndefinedRenormalization,

    #[error("state does not belong to the n = {expected} sector (got {got})")]
    SectorMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
