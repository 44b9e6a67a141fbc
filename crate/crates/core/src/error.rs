use thiserror::Error;

/// Errors raised by the geometric and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("non-finite value in {0}")]
    NotFinite(&'static str),
    #[error("cannot normalize a zero quaternion onto S3")]
    ZeroQuaternion,
    #[error("vector is not tangent to S3 at its base point (residual {residual:.3e})")]
    NotTangent { residual: f64 },
    #[error("vector is not horizontal (vertical coefficient {vertical:.3e})")]
    NotHorizontal { vertical: f64 },
    #[error("point does not lie over the given base point (distance {distance:.3e})")]
    BasePointMismatch { distance: f64 },
    #[error("tangent vector of length {norm:.6} lies outside the injectivity radius")]
    OutsideInjectivity { norm: f64 },
    #[error("logarithm undefined for antipodal points")]
    Antipodal,
    #[error("points lie on different Hopf fibers (residual {residual:.3e})")]
    DifferentFibers { residual: f64 },
    #[error("points lie on the same Hopf fiber")]
    SameFiber,
    #[error("Hopf fibers are at maximal distance; nearest points are not unique")]
    OrthogonalFibers,
    #[error("regime violation: {what} = {value:.6} exceeds bound {bound:.6}")]
    Regime {
        what: &'static str,
        value: f64,
        bound: f64,
    },
    #[error("angle {alpha:.6} outside the open hemisphere (0, pi/2)")]
    OutOfHemisphere { alpha: f64 },
    #[error("grid of {n} samples is too small (need at least {min})")]
    GridTooSmall { n: usize, min: usize },
    #[error("sampled objects live on different grids")]
    GridMismatch,
    #[error("shooting failed at fiber parameter t = {t:.6} (residual {residual:.3e})")]
    ShootFailed { t: f64, residual: f64 },
    #[error("ambiguous shot: two impact points at lengths {first:.6} and {second:.6}")]
    AmbiguousShot { first: f64, second: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("indefinite Hessian at iterate {iteration}: eigenvalues ({min:.4e}, {max:.4e})")]
    IndefiniteHessian {
        iteration: usize,
        min: f64,
        max: f64,
    },
    #[error("curves too close for a stable linking integral (distance {distance:.3e})")]
    CurvesTooClose { distance: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
