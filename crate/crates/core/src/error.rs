use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every variant names the operation that raised it (`module::op`).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{op}: invalid configuration: {msg}")]
    InvalidConfig { op: &'static str, msg: String },

    #[error("{op}: domain error: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("{op}: no convergence after {iterations} iterations (best = {best}, residual = {residual:e})")]
    MaxIterExceeded {
        op: &'static str,
        iterations: usize,
        best: Complex64,
        residual: f64,
    },

    #[error("{op}: pole at m = {m_under} (|1 + t m| = {distance:e} for atom t = {atom})")]
    Pole {
        op: &'static str,
        m_under: Complex64,
        atom: f64,
        distance: f64,
    },

    #[error("{op}: scan grid too coarse: sign changes of z'(m) at m = {first} and {second} fall in adjacent cells")]
    Resolution {
        op: &'static str,
        first: f64,
        second: f64,
    },

    #[error("{op}: no square-root branch gives Im m >= 0 at z = {z}")]
    Branch { op: &'static str, z: Complex64 },

    #[error("{op}: quadrature failed: {msg}")]
    Quadrature { op: &'static str, msg: String },

    #[error("{op}: density grid spacing {spacing:e} exceeds h/10 = {limit:e}")]
    GridTooCoarse {
        op: &'static str,
        spacing: f64,
        limit: f64,
    },

    #[error("{op}: degenerate denominator |1 - c m^2 int t^2 dH/(1+tm)^2| = {magnitude:e} at z = {z}")]
    DegenerateDenominator {
        op: &'static str,
        z: Complex64,
        magnitude: f64,
    },

    #[error("{op}: curvature unavailable: {msg}")]
    CurvatureUnavailable { op: &'static str, msg: String },

    #[error("{op}: symmetric eigensolver did not converge")]
    EigenNonConvergence { op: &'static str },

    #[error("{op}: quadrature schemes disagree: {first} vs {second} (tolerance {tol:e})")]
    SchemeDisagreement {
        op: &'static str,
        first: f64,
        second: f64,
        tol: f64,
    },

    #[error("{op}: replication {replication} failed: {source}")]
    Replication {
        op: &'static str,
        replication: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    /// True for failures of a numerical method (solver, quadrature,
    /// eigensolver) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::InvalidConfig { .. } | Error::Domain { .. } | Error::GridTooCoarse { .. } => {
                false
            }
            Error::Replication { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}
