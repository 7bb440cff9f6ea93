//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MmlsError>;

#[derive(Debug, Clone, Error)]
pub enum MmlsError {
    /// Invalid parameter or inconsistent configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Shape mismatch between points, values, queries or frames.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Fewer positive-weight samples than the fit requires. The caller can
    /// enlarge the weight support and retry.
    #[error("insufficient samples: need {needed} positive-weight samples for a degree-{degree} fit, found {found}")]
    InsufficientSamples {
        needed: usize,
        found: usize,
        degree: usize,
    },

    /// The weighted design matrix fell below the reciprocal-condition
    /// threshold of the rank-revealing solve.
    #[error("rank deficient design matrix: rcond {rcond:.3e} below threshold {threshold:.3e}")]
    RankDeficient { rcond: f64, threshold: f64 },

    /// The dual (constrained-minimization) solve requires strictly positive
    /// weights; the caller must pre-filter the support.
    #[error("zero weight at sample index {index}: dual solve requires strictly positive weights")]
    ZeroWeight { index: usize },

    /// Too few samples inside the weight support around the current origin.
    #[error("no usable samples in weight support (radius {radius:.6e}): found {found}, need {needed}")]
    NoSamplesInSupport {
        radius: f64,
        found: usize,
        needed: usize,
    },

    /// Frame iteration exhausted its iteration cap. Carries the last iterate
    /// so callers may inspect or reuse it.
    #[error("frame search did not converge in {iterations} iterations (last step {last_step:.3e})")]
    NotConverged {
        iterations: usize,
        last_step: f64,
        /// Origin of the last iterate.
        last_origin: Vec<f64>,
        /// Per-iteration step norms.
        trace: Vec<f64>,
    },

    /// The converged frame origin violates the search-radius constraint.
    #[error("frame origin outside search radius: |r - q| = {dist:.6e} > mu = {mu:.6e}")]
    SearchRadiusExceeded { dist: f64, mu: f64 },

    /// The chart origin landed outside the weighted mass of the in-support
    /// samples, so evaluating there would extrapolate rather than fit.
    /// Raised for queries beyond the sampled region (an open manifold's
    /// ends, for instance) instead of returning an extrapolated value.
    #[error("query projects outside the sampled region: chart offset {offset:.3e} exceeds {limit:.3e}")]
    OutsideSampledRegion { offset: f64, limit: f64 },

    /// Malformed input file.
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl MmlsError {
    /// True for errors that an automatic support enlargement can plausibly fix.
    pub fn is_support_related(&self) -> bool {
        matches!(
            self,
            MmlsError::InsufficientSamples { .. }
                | MmlsError::RankDeficient { .. }
                | MmlsError::NoSamplesInSupport { .. }
        )
    }
}
