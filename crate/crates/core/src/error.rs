use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("unbounded constellation: the identity quantizer has no finite output set")]
    UnboundedConstellation,

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid sub-band plan: {0}")]
    InvalidPlan(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A power-fraction vector lies outside the linear feasible set.
    #[error("infeasible power fraction in band {band}: nu = {nu} is below the floor {floor}")]
    Infeasible { band: usize, nu: f64, floor: f64 },

    /// The effective noise variance is zero, so the rate bound diverges.
    #[error("infinite rate: the chain is noiseless (tau = 0)")]
    InfiniteRate,

    #[error("energy {s} lies outside the constellation energy range [{e_min}, {e_max}]")]
    InfeasibleEnergy { s: f64, e_min: f64, e_max: f64 },

    /// The target energy sits exactly on `e_min` or `e_max`; the optimal tilt is infinite.
    #[error("energy {s} lies on the boundary of the energy range (class multiplicity {multiplicity})")]
    EnergyAtBoundary { s: f64, multiplicity: usize },

    #[error("infeasible spectral mask: a band with delta > 0 has zero target energy")]
    InfeasibleMask,

    #[error("filter design: {0}")]
    Filter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidQuantizer(_)
                | Error::UnboundedConstellation
                | Error::InvalidConstellation(_)
                | Error::InvalidPlan(_)
                | Error::Contract(_)
                | Error::Infeasible { .. }
                | Error::InfeasibleEnergy { .. }
                | Error::InfeasibleMask
                | Error::Filter(_)
                | Error::InvalidConfig(_)
                | Error::Json(_)
        )
    }
}
