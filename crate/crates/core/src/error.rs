//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown control `{label}` for player {player}")]
    UnknownControl { player: char, label: String },

    #[error("no lattice point qualifies as interior (h = {h}, stencil radius = {radius})")]
    EmptyInterior { h: f64, radius: f64 },

    #[error("point ({x}, {y}) is not a classified grid point")]
    UnclassifiedPoint { x: f64, y: f64 },

    #[error("neighbor ({x}, {y}) of the evaluation point is not a classified grid point")]
    MissingNeighbor { x: f64, y: f64 },

    #[error("matrix [[{}, {}], [{}, {}]] has no nonnegative decomposition with floor {floor} on this stencil (best max-min value {best}){}",
        .matrix[0], .matrix[1], .matrix[2], .matrix[3],
        .location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    DecompositionInfeasible {
        matrix: [f64; 4],
        floor: f64,
        best: f64,
        location: Option<String>,
    },

    #[error("no convergence after {iterations} iterations: residual {residual:e} > tolerance {tolerance:e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("saddle table has sup-inf value {value} at x = ({x}, {y}), expected 0")]
    SaddleValueNonzero { value: f64, x: f64, y: f64 },

    #[error("ordering v_K <= w <= u_K violated by {amount:e} at K = {k}, point ({x}, {y})")]
    OrderingViolation { k: f64, x: f64, y: f64, amount: f64 },

    #[error("barrier check failed: max slack {slack} exceeds -1 + 1e-9 (mu = {mu}, R = {radius})")]
    BarrierInvalid { slack: f64, mu: f64, radius: f64 },

    #[error("mollifier support around ({x}, {y}) with radius {eps} leaves the sampled region")]
    SupportEscapesRegion { x: f64, y: f64, eps: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the batch front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::UnknownControl { .. } => 2,
            Error::EmptyInterior { .. } | Error::SaddleValueNonzero { .. } => 2,
            Error::DecompositionInfeasible { .. } => 3,
            Error::NoConvergence { .. } => 4,
            Error::OrderingViolation { .. } => 5,
            Error::BarrierInvalid { .. } => 6,
            _ => 1,
        }
    }
}
