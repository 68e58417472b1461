use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field has {got} values but the space has {expected} grid points")]
    SizeMismatch { expected: usize, got: usize },

    #[error("operand must have zero mean (|mean| = {mean:.3e} exceeds {tol:.1e})")]
    NonzeroMean { mean: f64, tol: f64 },

    #[error("only 1D and 2D boxes are supported (got dims = {0})")]
    UnsupportedDims(usize),

    #[error("kernel under-resolved: support spans {cells:.2} grid cells, need at least 8")]
    KernelUnresolved { cells: f64 },

    #[error("kernel violates positivity of a(x) = J*1: a({location:?}) = {value:.3e} <= 0")]
    KernelNotPositive { location: Vec<f64>, value: f64 },

    #[error("kernel is not even: max |J(z) - J(-z)| = {residual:.3e}")]
    KernelAsymmetric { residual: f64 },

    #[error("kernel table: {0}")]
    KernelTable(String),

    #[error("potential must be an even-degree polynomial of degree >= 4 with a positive leading coefficient")]
    BadPotential,

    #[error("initial {which} mean {mean:.3e} exceeds the phase-space cap m = {cap:.3e}")]
    MeanCapExceeded { which: &'static str, mean: f64, cap: f64 },

    #[error("invalid parameter {name}: {value} (expected {expected})")]
    BadParam { name: &'static str, value: f64, expected: &'static str },

    #[error("solution blew up at t = {t:.6e} (step {step}); last finite state kept")]
    BlowUp { t: f64, step: usize },

    #[error("oracle integration overflowed at t = {t:.6e}; use a smaller dt")]
    OracleStiff { t: f64 },

    #[error("oracle truncation {n} exceeds the dense limit of 16 modes per axis")]
    OracleTooLarge { n: usize },

    #[error("oracle needs an evaluation grid with at least {needed} nodes per axis, space has {got}")]
    OracleGridTooCoarse { needed: usize, got: usize },

    #[error("Lyapunov functional negative at t = {t:.6e}: E = {value:.3e}; C_F too small")]
    LyapunovNegative { t: f64, value: f64 },

    #[error("energy has not reached a plateau; dissipation fit is inconclusive")]
    NoPlateau,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
