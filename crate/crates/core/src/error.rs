use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("frequency {xi} outside the band [-{band}, {band}]")]
    OutOfBand { xi: f64, band: f64 },
    #[error("no symbol bound for {0}")]
    NoBound(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("pointwise samples undefined: {0}")]
    Undefined(String),
    #[error("invalid exponent {0}")]
    InvalidExponent(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("at least two time samples are needed for a finite time exponent")]
    TooFewSamples,
    #[error("blow-up guard tripped at t = {t}: sup norm grew by a factor {factor:e}")]
    BlowUp { t: f64, factor: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("no clean rate (slope {slope:.4}, R² {r2:.4}): {reason}")]
    NoCleanRate { slope: f64, r2: f64, reason: String },
    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },
    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
