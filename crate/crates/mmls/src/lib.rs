//! Moving least-squares regression over manifold-supported point clouds.
//!
//! Given samples `(r_i, psi_i)` whose points lie on or near an unknown
//! d-dimensional manifold embedded in R^n, this crate approximates the
//! sampled function at arbitrary nearby queries. Each evaluation builds a
//! local affine chart around the query by a constrained weighted fit, then
//! solves a weighted polynomial regression over the chart coordinates; the
//! value of that polynomial at the chart origin is the estimate. No global
//! parametrization or dimension reduction is involved, the per-query cost is
//! linear in the ambient dimension, and only the intrinsic dimension `d`
//! must be known.
//!
//! Modules:
//! - [`kernel`]: radial weight families.
//! - [`polybasis`]: monomial bases, weighted least squares and the dual
//!   (constrained) solution route used to cross-check it.
//! - [`frame`]: the local coordinate-system search.
//! - [`approximator`]: the end-to-end evaluation, point projection and
//!   batched variants.
//! - [`datasets`]: synthetic manifold samplers and noise models.
//! - [`harness`]: reproducible experiment drivers (convergence order,
//!   benchmarks, scaling).
//! - [`io`]: CSV schemas shared with the command-line tool.
//!
//! With the default `parallel` feature, batched evaluations and experiment
//! trials fan out over rayon; disabling it falls back to sequential loops
//! with identical results.

pub use nalgebra;

pub mod approximator;
pub mod datasets;
pub mod error;
pub mod frame;
pub mod harness;
pub mod io;
pub mod kernel;
mod par;
pub mod polybasis;

pub use approximator::{
    approximate, approximate_batch, approximate_batch_sequential, approximate_detailed,
    batch_config, derive_seed, project_batch, project_point, ApproxConfig, Bandwidth, SampleSet,
};
pub use error::{MmlsError, Result};
pub use frame::{find_local_frame, frame_cost, project_to_frame, AffineFrame, FrameSearchConfig};
pub use kernel::{weight_eval, WeightFamily, WeightSpec};
pub use polybasis::{backus_gilbert_coeffs, monomial_basis, wls_fit, PolyModel, WlsProblem};
