//! Error type shared across the engine.

use crate::series::Site;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum KamError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("series belong to different parameter samples: {0} vs {1}")]
    ParamMismatch(String, String),

    #[error("site {0:?} has |i| = 0; 0 is tangential by convention")]
    ZeroSite(Site),

    #[error("site {0:?} is tangential; its frequency lives in the frequency map")]
    TangentialSite(Site),

    #[error("need at least two distinct parameter samples")]
    NotEnoughSamples,

    #[error("|l| = {0} exceeds 2; only |l| <= 2 occurs in the scheme")]
    LTooLarge(i64),

    #[error("k = 0 with l = 0 is excluded from the Diophantine condition")]
    ZeroZeroDivisor,

    #[error(
        "parameter must be excised: divisor {divisor:.6e} below threshold {threshold:.6e} \
         at k={k:?}, l={l:?}"
    )]
    Excision {
        k: Vec<i64>,
        l: Vec<(Site, i64)>,
        divisor: f64,
        threshold: f64,
    },

    #[error("Lie series not contracting at order {order} (three non-decreasing tail norms)")]
    LieDivergence { order: usize, norm: f64 },

    #[error("special form violated by key {0}")]
    SpecialForm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KamError>;
