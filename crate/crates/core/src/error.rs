use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not closed: endpoint gap {gap:.3e}")]
    NotClosed { gap: f64 },

    #[error("curve self-intersects near parameters {t1:.6} and {t2:.6}")]
    SelfIntersection { t1: f64, t2: f64 },

    #[error("degenerate parametrization: speed {speed:.3e} at t = {t:.6}")]
    DegenerateSpeed { t: f64, speed: f64 },

    #[error("curve is oriented clockwise; a counter-clockwise loop is required")]
    Clockwise,

    #[error("grid size {got} is too small (need at least {min})")]
    GridTooSmall { got: usize, min: usize },

    #[error("normal offset {u} exceeds the validated half-width {halfwidth}")]
    OffsetTooLarge { u: f64, halfwidth: f64 },

    #[error("half-width {a} is outside the admissible range (0, {max})")]
    WidthOutOfRange { a: f64, max: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("flux origin violates the strip: {0}")]
    OriginPlacement(String),

    #[error("not enough factor eigenvalues to certify the lowest {n} tensor sums")]
    UncertifiedTensorSum { n: usize },

    #[error("no negative transverse eigenvalue for a = {a}, beta = {beta}")]
    MissingTransverseEigenvalue { a: f64, beta: f64 },

    #[error("angular momentum range [{lo}, {hi}] is insufficient: boundary channel contributes below the returned maximum")]
    MRangeInsufficient { lo: i64, hi: i64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
