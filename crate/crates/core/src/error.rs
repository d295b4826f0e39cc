use thiserror::Error;

/// Errors shared across the resolvent engines.
#[derive(Debug, Error)]
pub enum KreinError {
    #[error("shift z is within {tol:e} of the spectrum of A")]
    SingularShift { tol: f64 },
    #[error("coupling matrix W is numerically singular (condition estimate {cond:e}); use compress_singular_w")]
    NonInvertibleW { cond: f64 },
    #[error("Q(z)+W singular at nonreal z; Nevanlinna invariant violated")]
    QPlusWSingular,
    #[error("W is invertible (smallest singular value {smin:e}); use krein_rank_n")]
    InvertibleW { smin: f64 },
    #[error("free Green kernel requested at separation r = {r}")]
    ZeroSeparation { r: f64 },
    #[error("green_inner_product requires z != z0")]
    CoincidentShift,
    #[error("centers {a} and {b} coincide (separation {dist:e})")]
    CoincidentCenters { a: usize, b: usize, dist: f64 },
    #[error("coupling matrix W is not Hermitian (max deviation {dev:e})")]
    NonHermitianW { dev: f64 },
    #[error("matrix A is not Hermitian (max deviation {dev:e})")]
    NonHermitianA { dev: f64 },
    #[error("channel vectors are rank deficient (smallest/largest singular value {ratio:e})")]
    RankDeficientChannels { ratio: f64 },
    #[error("evaluation point coincides with center {index}")]
    AtCenter { index: usize },
    #[error("Q(z)+W singular at real energy z (resonance)")]
    ResonantEnergy,
    #[error("Richardson extrapolation stages disagree by {dev:e}")]
    NonConvergentExtrapolation { dev: f64 },
    #[error("adaptive quadrature exceeded depth {depth}")]
    QuadratureFailure { depth: usize },
    #[error("operation requires Im z != 0")]
    RealEnergy,
    #[error("Sturm-Liouville operator has an eigenvalue {lambda:e} within tolerance of zero")]
    ZeroEigenvalue { lambda: f64 },
    #[error("L + Q(z) solve failed at nonreal z; Theorem-5 invariant violated")]
    SingularLPlusQ,
    #[error("operation requires the uniform midpoint grid")]
    NonUniformGrid,
}

pub type Result<T> = std::result::Result<T, KreinError>;
