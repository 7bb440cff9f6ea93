//! Local affine coordinate systems fitted to weighted neighborhoods.
//!
//! Around a query point `r` we look for a d-dimensional affine frame
//! `(q, U)` minimizing the weighted sum of squared distances from the
//! samples to the frame, under the constraint that `r - q` is orthogonal to
//! the frame. The minimizer doubles as a generalized projection of `r` onto
//! the sampled manifold and supplies the chart the (polynomial) regression
//! stage fits over.
//!
//! The search is a fixed-point iteration: project the samples onto the
//! current frame, fit a weighted linear map from chart coordinates back to
//! ambient space, re-orthonormalize its linear part to get the next basis,
//! and re-anchor the origin so the orthogonality constraint holds exactly.

use crate::approximator::SampleSet;
use crate::error::{MmlsError, Result};
use crate::kernel::{WeightFamily, WeightSpec};
use crate::polybasis::{wls_fit_with, WlsProblem, DEFAULT_RCOND};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// An affine d-dimensional coordinate system: origin plus an orthonormal
/// basis of the homogeneous part, stored as the columns of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrame {
    origin: DVector<f64>,
    basis: DMatrix<f64>,
}

impl AffineFrame {
    /// Accepts a frame after checking `U^T U = I` to 1e-12.
    pub fn new(origin: DVector<f64>, basis: DMatrix<f64>) -> Result<Self> {
        if origin.len() != basis.nrows() {
            return Err(MmlsError::DimensionMismatch(format!(
                "frame origin has dimension {}, basis rows {}",
                origin.len(),
                basis.nrows()
            )));
        }
        let gram = basis.transpose() * &basis;
        let dev = (&gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if dev > 1e-12 {
            return Err(MmlsError::Config(format!(
                "frame basis is not orthonormal (max deviation {dev:.3e})"
            )));
        }
        Ok(AffineFrame { origin, basis })
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }
    pub fn chart_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Chart coordinates of an ambient point: `U^T (p - q)`.
    pub fn chart_coords(&self, p: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (p - &self.origin)
    }

    /// Euclidean projection of `p` onto the frame, in ambient coordinates.
    pub fn project_ambient(&self, p: &DVector<f64>) -> DVector<f64> {
        let c = self.chart_coords(p);
        &self.origin + &self.basis * c
    }

    /// Distance from `p` to the frame.
    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        (p - self.project_ambient(p)).norm()
    }
}

/// How the basis is seeded before the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    /// Orthonormalized Gaussian columns from the given seed. Cheap, and the
    /// fixed point does not depend on the starting basis.
    RandomOrthonormal { seed: u64 },
    /// Principal directions of the spatially weighted covariance at the
    /// query. Deterministic; kept for reproducibility comparisons.
    WeightedPca,
}

/// Controls for the frame fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSearchConfig {
    pub init: InitMode,
    /// Convergence threshold on the origin step, as a fraction of the
    /// weight bandwidth `h`.
    pub tol_q: f64,
    pub max_iter: usize,
    /// Search radius: the converged origin must satisfy `|r - q| <= mu`.
    pub mu: f64,
}

impl Default for FrameSearchConfig {
    fn default() -> Self {
        FrameSearchConfig {
            init: InitMode::RandomOrthonormal { seed: 0 },
            tol_q: 1e-10,
            max_iter: 100,
            mu: f64::INFINITY,
        }
    }
}

impl FrameSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_q > 0.0) {
            return Err(MmlsError::Config(format!(
                "tol_q must be positive, got {}",
                self.tol_q
            )));
        }
        if self.max_iter == 0 {
            return Err(MmlsError::Config("max_iter must be at least 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(MmlsError::Config(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitMode::RandomOrthonormal { .. } = self.init {
            self.init = InitMode::RandomOrthonormal { seed };
        }
        self
    }
}

/// Convergence record of one frame search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameTrace {
    /// `|q_j - q_{j-1}|` per iteration; the last entry is below tolerance.
    pub step_norms: Vec<f64>,
    /// Positive-weight sample count at the converged origin.
    pub in_support: usize,
}

/// A converged frame plus its iteration diagnostics.
#[derive(Debug, Clone)]
pub struct FrameSolution {
    pub frame: AffineFrame,
    pub trace: FrameTrace,
    /// The weight in effect at convergence (the fit stage reuses it so both
    /// stages share the same weighting).
    pub weight: WeightSpec,
}

/// How the weight support follows the moving origin.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SupportPolicy {
    /// One spec throughout the iteration.
    Fixed(WeightSpec),
    /// Re-size the support every iteration so that roughly `target` samples
    /// stay inside it around the current origin: the support radius becomes
    /// `margin` times the distance to the origin's `target`-th nearest
    /// sample. Keeps the weighting local even when the query starts far
    /// from the data.
    AdaptiveCount {
        family: WeightFamily,
        h: f64,
        eps_reg: f64,
        target: usize,
        margin: f64,
    },
}

impl SupportPolicy {
    pub(crate) fn bandwidth(&self) -> f64 {
        match self {
            SupportPolicy::Fixed(spec) => spec.h,
            SupportPolicy::AdaptiveCount { h, .. } => *h,
        }
    }

    pub(crate) fn spec_at(&self, samples: &SampleSet, q: &DVector<f64>) -> Result<WeightSpec> {
        match *self {
            SupportPolicy::Fixed(spec) => Ok(spec),
            SupportPolicy::AdaptiveCount {
                family,
                h,
                eps_reg,
                target,
                margin,
            } => {
                let rho = samples.kth_nearest_distance(q, target);
                let radius = if rho > 0.0 { margin * rho } else { h };
                let spec = match family {
                    WeightFamily::Gaussian => WeightSpec::new(family, 1.0, radius / 2.0)?,
                    _ => WeightSpec::new(family, radius / h, h)?,
                };
                spec.with_eps_reg(eps_reg)
            }
        }
    }
}

/// Run the constrained frame search around `r` with a fixed weight.
///
/// Requires at least `d + 1` samples with positive weight around the
/// initial origin `q_0 = r` (and around every subsequent iterate).
pub fn find_local_frame(
    r: &DVector<f64>,
    samples: &SampleSet,
    weight: &WeightSpec,
    d: usize,
    cfg: &FrameSearchConfig,
) -> Result<FrameSolution> {
    weight.validate()?;
    find_local_frame_with(r, samples, SupportPolicy::Fixed(*weight), d, cfg)
}

pub(crate) fn find_local_frame_with(
    r: &DVector<f64>,
    samples: &SampleSet,
    policy: SupportPolicy,
    d: usize,
    cfg: &FrameSearchConfig,
) -> Result<FrameSolution> {
    cfg.validate()?;
    let n = samples.ambient_dim();
    if r.len() != n {
        return Err(MmlsError::DimensionMismatch(format!(
            "query has dimension {}, samples have {n}",
            r.len()
        )));
    }
    if d == 0 || d >= n {
        return Err(MmlsError::Config(format!(
            "intrinsic dimension d = {d} must satisfy 1 <= d < n = {n}"
        )));
    }

    let tol = cfg.tol_q * policy.bandwidth();
    let mut q = r.clone();
    let init_spec = policy.spec_at(samples, &q)?;
    let mut basis = match cfg.init {
        InitMode::RandomOrthonormal { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_orthonormal(n, d, &mut rng)?
        }
        InitMode::WeightedPca => weighted_pca_basis(samples, &q, &init_spec, d)?,
    };

    let mut step_norms = Vec::new();
    let mut last_support;
    let mut prev_move: Option<DVector<f64>> = None;
    let mut trust = f64::INFINITY;
    for iter in 0..cfg.max_iter {
        let weight = policy.spec_at(samples, &q)?;
        let (idx, w) = supported_weights(samples, &q, &weight, d + 1)?;
        last_support = idx.len();

        // Weighted degree-1 fit of the centered samples over the current chart.
        let mut x = DMatrix::zeros(idx.len(), d);
        let mut y = DMatrix::zeros(idx.len(), n);
        for (row, &i) in idx.iter().enumerate() {
            let centered = samples.point(i) - &q;
            let coords = basis.transpose() * &centered;
            for c in 0..d {
                x[(row, c)] = coords[c];
            }
            for c in 0..n {
                y[(row, c)] = centered[c];
            }
        }
        let problem = WlsProblem::new(x, y, DVector::from_vec(w))?;
        let linear = wls_fit_with(&problem, 1, DEFAULT_RCOND)?;

        // Temporary origin from the affine part; next basis from the linear
        // part's image directions.
        let q_tilde = &q + linear.coeffs.row(0).transpose();
        let mut directions = linear.coeffs.rows(1, d).transpose();
        orthonormalize_columns(&mut directions)?;
        basis = directions;

        // Re-anchor so that r - q is orthogonal to the frame. For queries
        // far from the data the anchor formula can overshoot (the feedback
        // grows with |r - q| times the curvature), so moves run under a
        // trust region: it halves whenever the direction reverses and
        // recovers on aligned steps. Near-manifold queries converge before
        // the cap ever binds, and no fixed point is altered.
        let q_next = &q_tilde + &basis * (basis.transpose() * (r - &q_tilde));
        let support_cap = match weight.support_radius() {
            s if s.is_finite() => s,
            _ => 2.0 * weight.h,
        };
        let cap = support_cap.min(trust);
        let mut delta = &q_next - &q;
        let raw_step = delta.norm();
        if raw_step > cap {
            delta *= cap / raw_step;
        }
        let step = delta.norm();
        let reversed = match &prev_move {
            Some(prev) => {
                let pn = prev.norm();
                pn > 0.0 && step > 0.0 && delta.dot(prev) / (step * pn) < 0.5
            }
            None => false,
        };
        trust = if reversed {
            (0.5 * step).max(0.5 * tol)
        } else {
            (trust * 1.3).min(support_cap)
        };
        step_norms.push(step);
        q += &delta;
        prev_move = Some(delta);

        // The origin can land on its fixed point while the basis is still
        // settling (exactly what happens when the query already lies on the
        // sampled surface), so never accept the very first iterate: the
        // second pass refits the basis over an aligned chart at full
        // precision.
        if step < tol && iter >= 1 {
            let dist = (r - &q).norm();
            if dist > cfg.mu {
                return Err(MmlsError::SearchRadiusExceeded { dist, mu: cfg.mu });
            }
            let frame = AffineFrame::new(q, basis)?;
            return Ok(FrameSolution {
                frame,
                trace: FrameTrace {
                    step_norms,
                    in_support: last_support,
                },
                weight,
            });
        }
    }

    let last_step = step_norms.last().copied().unwrap_or(f64::INFINITY);
    Err(MmlsError::NotConverged {
        iterations: cfg.max_iter,
        last_step,
        last_origin: q.iter().copied().collect(),
        trace: step_norms,
    })
}

/// Weighted frame cost: `sum_i dist(r_i, frame)^2 * theta(|r_i - q|)`.
pub fn frame_cost(frame: &AffineFrame, samples: &SampleSet, weight: &WeightSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..samples.len() {
        let p = samples.point(i);
        let w = weight.eval((p - frame.origin()).norm());
        if w > 0.0 {
            let dist = frame.distance_to(p);
            total += w * dist * dist;
        }
    }
    total
}

/// Chart coordinates of a set of ambient points.
pub fn project_to_frame(points: &[DVector<f64>], frame: &AffineFrame) -> Vec<DVector<f64>> {
    points.iter().map(|p| frame.chart_coords(p)).collect()
}

/// Indices and weights of samples with positive weight around `q`; errors
/// when fewer than `needed` remain.
fn supported_weights(
    samples: &SampleSet,
    q: &DVector<f64>,
    weight: &WeightSpec,
    needed: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut idx = Vec::new();
    let mut w = Vec::new();
    for i in 0..samples.len() {
        let wi = weight.eval((samples.point(i) - q).norm());
        if wi > 0.0 {
            idx.push(i);
            w.push(wi);
        }
    }
    if idx.len() < needed {
        return Err(MmlsError::NoSamplesInSupport {
            radius: weight.support_radius(),
            found: idx.len(),
            needed,
        });
    }
    Ok((idx, w))
}

/// Orthonormal basis from seeded Gaussian columns.
pub(crate) fn random_orthonormal(
    n: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng));
    orthonormalize_columns(&mut m)?;
    Ok(m)
}

/// First `d` principal directions of the spatially weighted covariance of
/// the samples around `q`.
fn weighted_pca_basis(
    samples: &SampleSet,
    q: &DVector<f64>,
    weight: &WeightSpec,
    d: usize,
) -> Result<DMatrix<f64>> {
    let (idx, w) = supported_weights(samples, q, weight, d + 1)?;
    let n = samples.ambient_dim();
    let w_total: f64 = w.iter().sum();
    let mut mean = DVector::zeros(n);
    for (&i, &wi) in idx.iter().zip(&w) {
        mean += samples.point(i) * wi;
    }
    mean /= w_total;

    let mut scaled = DMatrix::zeros(idx.len(), n);
    for (row, (&i, &wi)) in idx.iter().zip(&w).enumerate() {
        let centered = samples.point(i) - &mean;
        let sw = wi.sqrt();
        for c in 0..n {
            scaled[(row, c)] = sw * centered[c];
        }
    }
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let smax = svd.singular_values.max();
    if smax <= 0.0 || svd.singular_values[d - 1] / smax < 1e-14 {
        return Err(MmlsError::RankDeficient {
            rcond: if smax > 0.0 {
                svd.singular_values[d - 1] / smax
            } else {
                0.0
            },
            threshold: 1e-14,
        });
    }
    let mut basis = v_t.rows(0, d).transpose();
    fix_column_signs(&mut basis);
    Ok(basis)
}

/// Modified Gram-Schmidt with a reorthogonalization pass. Columns are
/// normalized in place; each column's largest-magnitude entry is made
/// positive so the output is deterministic.
fn orthonormalize_columns(m: &mut DMatrix<f64>) -> Result<()> {
    let d = m.ncols();
    let scale = (0..d).map(|k| m.column(k).norm()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(MmlsError::RankDeficient {
            rcond: 0.0,
            threshold: 1e-10,
        });
    }
    for k in 0..d {
        for _pass in 0..2 {
            for j in 0..k {
                let proj = m.column(j).dot(&m.column(k));
                let col_j = m.column(j).into_owned();
                let mut col_k = m.column_mut(k);
                col_k.axpy(-proj, &col_j, 1.0);
            }
        }
        let norm = m.column(k).norm();
        if norm < 1e-10 * scale {
            return Err(MmlsError::RankDeficient {
                rcond: norm / scale,
                threshold: 1e-10,
            });
        }
        m.column_mut(k).scale_mut(1.0 / norm);
    }
    fix_column_signs(m);
    Ok(())
}

fn fix_column_signs(m: &mut DMatrix<f64>) {
    for k in 0..m.ncols() {
        let col = m.column(k);
        let mut lead = 0usize;
        let mut best = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                lead = i;
            }
        }
        if m[(lead, k)] < 0.0 {
            m.column_mut(k).neg_mut();
        }
    }
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal matrices. Zero means identical subspaces.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let overlap = a.transpose() * b;
    let svd = overlap.svd(false, false);
    let smin = svd.singular_values.min().clamp(-1.0, 1.0);
    smin.acos()
}
