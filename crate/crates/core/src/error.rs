use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A complex exponential would exceed the configured exponent cap.
    #[error("exponent {exponent:.3} exceeds the cap {cap} ({context})")]
    OverflowRisk {
        exponent: f64,
        cap: f64,
        context: &'static str,
    },

    #[error("pointwise inverse is near-singular: min |A| = {min_modulus:e} below floor {floor:e}")]
    NearSingular { min_modulus: f64, floor: f64 },

    /// `q^k` is numerically equal to 1.
    #[error("resonance at mode {k}: |q^k - 1| = {modulus:e}")]
    Resonance { k: i64, modulus: f64 },

    /// Small divisors exceed what the solver is willing to invert.
    #[error("near-resonant frequency: max |lambda_k| = {max_lambda:e} at k = {k} exceeds {limit:e}")]
    SmallDivisor { k: i64, max_lambda: f64, limit: f64 },

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("{method} did not converge after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("{method} diverged: residual grew from {from:e} to {to:e} (max |lambda_k| = {max_lambda:e})")]
    Divergence {
        method: &'static str,
        from: f64,
        to: f64,
        max_lambda: f64,
        history: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OverflowRisk { .. } => "overflow_risk",
            Error::NearSingular { .. } => "near_singular",
            Error::Resonance { .. } => "resonance",
            Error::SmallDivisor { .. } => "resonance",
            Error::BoundViolation(_) => "bound_violation",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Divergence { .. } => "divergence",
            Error::Precondition(_) => "precondition",
            Error::InvalidParameter(_) => "invalid_parameter",
        }
    }
}
