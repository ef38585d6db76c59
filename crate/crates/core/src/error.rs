use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("lattice sum not converged at radius {radius}: relative change {achieved:.3e} > {rel_tol:.1e}")]
    Truncation {
        radius: usize,
        achieved: f64,
        rel_tol: f64,
    },

    #[error("grid too small: edge coefficient ratio {ratio:.3e} exceeds {limit:.1e}")]
    GridTooSmall { ratio: f64, limit: f64 },

    #[error("periodic embedding too small: wrap-around {wrap:.3e} of variance exceeds {limit:.1e}")]
    EmbeddingTooSmall { wrap: f64, limit: f64 },

    #[error("matrix is ill-conditioned or not positive definite: {0}")]
    Conditioning(String),

    #[error("unsupported SPDE case: {0}")]
    UnsupportedCase(String),

    #[error("fit residual {residual:.3e} above {limit:.1e}: not in the asymptotic regime")]
    NonAsymptotic { residual: f64, limit: f64 },
}
