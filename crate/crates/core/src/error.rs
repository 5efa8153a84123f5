use std::fmt;

use thiserror::Error;

/// Names the four boundary arcs of an observation domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CurveId {
    /// Lower-left arc, decreasing on `[a, b1]`.
    Gamma12,
    /// Lower-right arc, increasing on `[b1, c]`.
    Gamma1,
    /// Upper-left arc, increasing on `[a, b2]`.
    Gamma2,
    /// Upper-right arc, decreasing on `[b2, c]`.
    Gamma0,
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CurveId::Gamma12 => "gamma12",
            CurveId::Gamma1 => "gamma1",
            CurveId::Gamma2 => "gamma2",
            CurveId::Gamma0 => "gamma0",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{curve} is not strictly monotone near s = {at}")]
    MonotonicityViolation { curve: CurveId, at: f64 },

    #[error("endpoint mismatch: {left_curve}({at}) = {left} but {right_curve}({at}) = {right}")]
    EndpointMismatch {
        left_curve: CurveId,
        right_curve: CurveId,
        at: f64,
        left: f64,
        right: f64,
    },

    #[error("{curve} has non-positive ordinate {value} at s = {at}")]
    NonPositiveOrdinate { curve: CurveId, at: f64, value: f64 },

    #[error("inner strips of {first} and {second} overlap at s = {at}")]
    StripOverlap {
        first: CurveId,
        second: CurveId,
        at: f64,
    },

    #[error("{curve}: inverse does not round-trip at s = {at} (got {got})")]
    InverseMismatch { curve: CurveId, at: f64, got: f64 },

    #[error("circle centred at ({cx}, {cy}) with radius {r} leaves the open positive quadrant")]
    CircleNotInPositiveQuadrant { cx: f64, cy: f64, r: f64 },

    #[error("point ({s}, {t}) lies outside the simulation rectangle [0, {s_max}] x [0, {t_max}]")]
    OutOfRectangle {
        s: f64,
        t: f64,
        s_max: f64,
        t_max: f64,
    },

    #[error("expected a {expected} field model, found {found}")]
    WrongModelVariant {
        expected: &'static str,
        found: &'static str,
    },

    #[error("transformed coordinate ({u}, {v}) is outside the admissible half-plane")]
    NonPositiveCoordinate { u: f64, v: f64 },

    #[error("adaptive quadrature hit its depth limit (best estimate {estimate})")]
    MaxDepthExceeded { estimate: f64 },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("matrix is singular or not positive definite; regressors are linearly dependent on the domain")]
    SingularMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse expression `{input}`: {reason}")]
    ExpressionParse { input: String, reason: String },

    #[error("grid data: {0}")]
    Grid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the observation domain or the field model,
    /// as opposed to malformed input.
    pub fn is_domain_or_model(&self) -> bool {
        matches!(
            self,
            Error::MonotonicityViolation { .. }
                | Error::EndpointMismatch { .. }
                | Error::NonPositiveOrdinate { .. }
                | Error::StripOverlap { .. }
                | Error::InverseMismatch { .. }
                | Error::CircleNotInPositiveQuadrant { .. }
                | Error::OutOfRectangle { .. }
                | Error::WrongModelVariant { .. }
                | Error::NonPositiveCoordinate { .. }
                | Error::MaxDepthExceeded { .. }
                | Error::QuadratureFailure(_)
                | Error::SingularMatrix
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
