use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported constellation: scheme {scheme} with M = {m}")]
    UnsupportedConstellation { scheme: String, m: usize },

    #[error("symbol enumeration overflow: M = {m}, N = {n} exceeds the enumeration bound")]
    EnumerationOverflow { m: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "numerically rank-ambiguous input: singular value {sigma:.6e} lies within a factor of \
         {window} of the rank cutoff {cutoff:.6e}; adjust the tolerance"
    )]
    RankAmbiguous { sigma: f64, cutoff: f64, window: f64 },

    #[error("Gauss-Hermite quadrature supports at most 2 complex dimensions, got {dim}")]
    QuadratureUnsupported { dim: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(
        "Theorem-2 pairing infeasible: (k - N2) * Ns = ({k} - {n2}) * {ns} < N_t = {nt}; \
         the condition (k - N2) * Ns >= N_t must hold"
    )]
    InfeasiblePairing { k: usize, n2: usize, ns: usize, nt: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
