use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("state lives on a basis with L={found_sites}, N={found_particles} but the model expects L={sites}, N={particles}")]
    BasisMismatch {
        sites: usize,
        particles: usize,
        found_sites: usize,
        found_particles: usize,
    },

    #[error("norm underflow ({norm:e}) after a deterministic step of dt={dt:e}")]
    StepSize { norm: f64, dt: f64 },

    #[error("dimension {dim} exceeds the limit {limit} for {what}")]
    Resource {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("integration invariant violated at t={t}: {what}")]
    Integration { t: f64, what: String },

    #[error("field integration blew up at t={t} (|m| > {limit})")]
    BlowUp { t: f64, limit: f64 },

    #[error("degenerate closure: q equals 1/K_c")]
    DegenerateClosure,

    #[error("invalid cycle: {0}")]
    Cycle(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
