use thiserror::Error;

/// Errors raised by the simulation and estimation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("insufficient data: need more than {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: estimated cost {estimated:.3e} exceeds cap {cap:.3e}")]
    Budget { estimated: f64, cap: f64 },
    #[error("domain overflow: density support reached |v| = {v:.4} (grid edge {vmax:.4})")]
    DomainOverflow { v: f64, vmax: f64 },
    #[error("CFL guard violated: {0}")]
    Cfl(String),
    #[error("near-singular dispersion: |eps| = {value:.4e} below 0.1 at k = {k:?}, y = {y:.4}")]
    NearSingularDispersion { value: f64, k: [i32; 2], y: f64 },
    #[error("undefined direction: wavevector k = 0")]
    UndefinedDirection,
    #[error("frequency must lie in the upper half-plane, got Im omega = {0}")]
    HalfPlane(f64),
    #[error("degenerate observable: sigma = {0:.3e} below threshold")]
    DegenerateObservable(f64),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
