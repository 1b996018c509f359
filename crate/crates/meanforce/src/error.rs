use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A dissipation spectrum came out indefinite: Im χ̃(ω) must stay PSD.
    #[error("passivity violated at ω = {omega}: min eigenvalue of Im χ̃ is {min_eig:e}")]
    NotPassive { omega: f64, min_eig: f64 },

    /// Static stiffness ω₀²(I − χ̃(0)) is not positive definite; the coupled
    /// system has no stable equilibrium and none of the equilibrium
    /// quantities are defined.
    #[error("static stability violated: min eigenvalue of ω₀²(I − χ̃(0)) is {min_eig:e}")]
    Unstable { min_eig: f64 },

    /// Adaptive integration ran out of subdivisions before reaching the
    /// requested tolerance.
    #[error(
        "quadrature did not converge: estimated error {est_error:e} exceeds target {target:e} \
         after {subdivisions} subdivisions"
    )]
    QuadratureFailure {
        est_error: f64,
        target: f64,
        subdivisions: usize,
    },

    /// The resolvent Λ(ω) is numerically singular (condition estimate above
    /// 1e14), typically because ω sits on top of an undamped resonance.
    #[error("resolvent numerically singular at ω = {omega}: condition estimate {cond:e}")]
    SingularResolvent { omega: f64, cond: f64 },

    /// LAPACK reported a failure (nonzero info) during diagonalization.
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    /// Integrator step size fails the free-oscillation energy-drift probe.
    #[error("time step too large: relative energy drift {drift:e} per period exceeds {limit:e}")]
    StepSizeTooLarge { drift: f64, limit: f64 },

    /// Model parameters rejected at construction.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Run/simulation configuration rejected.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
