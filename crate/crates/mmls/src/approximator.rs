//! End-to-end function approximation over manifold-supported samples.
//!
//! Given samples `(r_i, psi_i)` with the points lying near an unknown
//! d-dimensional manifold, the estimate at a query `r` is produced in two
//! stages: fit a local affine frame around `r` (see [`crate::frame`]), then
//! fit a total-degree-`m` polynomial from the chart coordinates to the
//! values, weighted by the ambient distances `|r_i - q|`. The returned value
//! is the polynomial at the chart origin.
//!
//! All randomness flows from the seed in the frame configuration; identical
//! inputs and seeds give bitwise identical outputs.

use crate::datasets::{estimate_fill_distance, SamplingStats};
use crate::error::{MmlsError, Result};
use crate::frame::{find_local_frame_with, FrameSearchConfig, FrameSolution, InitMode, SupportPolicy};
use crate::kernel::{WeightFamily, WeightSpec};
use crate::polybasis::{basis_size, wls_fit_with, WlsProblem, DEFAULT_RCOND};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Immutable collection of ambient points paired with target values.
///
/// Construction validates shapes and finiteness; afterwards the set is
/// read-only, so concurrent queries need no synchronization. Sampling
/// statistics are computed once on first use and cached.
#[derive(Debug)]
pub struct SampleSet {
    points: Vec<DVector<f64>>,
    values: Vec<DVector<f64>>,
    stats: OnceLock<SamplingStats>,
}

impl Clone for SampleSet {
    fn clone(&self) -> Self {
        SampleSet {
            points: self.points.clone(),
            values: self.values.clone(),
            stats: OnceLock::new(),
        }
    }
}

impl SampleSet {
    pub fn new(points: Vec<DVector<f64>>, values: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(MmlsError::Config("sample set must contain at least one point".into()));
        }
        if points.len() != values.len() {
            return Err(MmlsError::DimensionMismatch(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let n = points[0].len();
        let n_out = values[0].len();
        if n == 0 || n_out == 0 {
            return Err(MmlsError::Config("points and values must be non-empty vectors".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(MmlsError::DimensionMismatch(format!(
                    "point {i} has dimension {}, expected {n}",
                    p.len()
                )));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(MmlsError::Config(format!("point {i} contains non-finite entries")));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if v.len() != n_out {
                return Err(MmlsError::DimensionMismatch(format!(
                    "value {i} has dimension {}, expected {n_out}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(MmlsError::Config(format!("value {i} contains non-finite entries")));
            }
        }
        Ok(SampleSet {
            points,
            values,
            stats: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn ambient_dim(&self) -> usize {
        self.points[0].len()
    }
    pub fn value_dim(&self) -> usize {
        self.values[0].len()
    }
    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }
    pub fn value(&self, i: usize) -> &DVector<f64> {
        &self.values[i]
    }
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }
    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// Fill-distance estimate and nearest-neighbor statistics, cached after
    /// the first call. Needs at least two points.
    pub fn sampling_stats(&self) -> Result<&SamplingStats> {
        if self.len() < 2 {
            return Err(MmlsError::Config(
                "sampling statistics require at least two points".into(),
            ));
        }
        Ok(self
            .stats
            .get_or_init(|| estimate_fill_distance(&self.points).expect("len checked above")))
    }

    /// Copy without the sample at `index` (for leave-one-out folds).
    pub fn without(&self, index: usize) -> Result<SampleSet> {
        if self.len() < 2 {
            return Err(MmlsError::Config("cannot drop the only sample".into()));
        }
        let points = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, p)| p.clone())
            .collect();
        let values = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, v)| v.clone())
            .collect();
        SampleSet::new(points, values)
    }

    /// Distance from `r` to its k-th nearest sample (k >= 1), brute force.
    pub(crate) fn kth_nearest_distance(&self, r: &DVector<f64>, k: usize) -> f64 {
        let k = k.clamp(1, self.len());
        let mut dists: Vec<f64> = self.points.iter().map(|p| (p - r).norm()).collect();
        let (_, kth, _) = dists.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        *kth
    }

    /// Index and distance of the nearest sample.
    pub fn nearest(&self, r: &DVector<f64>) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - r).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Bandwidth selection: fixed `(h, k)`, or derived from the data per query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `h` is the estimated fill distance; the support is sized per query so
    /// it holds about `support_factor * max(J, d+1)` samples, and grows by
    /// 1.5x (at most five times) when a solve reports trouble.
    Auto,
    Fixed { h: f64, k: f64 },
}

/// Everything `approximate` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    /// Intrinsic dimension of the sampled manifold.
    pub d: usize,
    /// Total degree of the local polynomial.
    pub m: usize,
    pub family: WeightFamily,
    pub bandwidth: Bandwidth,
    /// Regularizer for the singular weight family, as a fraction of `h`
    /// (squared internally).
    pub eps_reg_factor: f64,
    pub frame: FrameSearchConfig,
    /// Interpolate the samples exactly: singular weights plus the exact-hit
    /// rule at the sample points.
    pub interpolatory: bool,
    /// Target ratio of in-support points to the minimal solvable count.
    pub support_factor: f64,
    /// How far past the targeted neighbor the adaptive support reaches.
    /// With 1.0 the support holds exactly the targeted count (the outermost
    /// carrying vanishing weight); deeper margins trade a wider bias window
    /// for a steadier effective sample size.
    pub support_margin: f64,
    pub rcond_threshold: f64,
}

impl ApproxConfig {
    pub fn new(d: usize, m: usize) -> Self {
        ApproxConfig {
            d,
            m,
            family: WeightFamily::TruncatedExp,
            bandwidth: Bandwidth::Auto,
            eps_reg_factor: 1e-8,
            frame: FrameSearchConfig::default(),
            interpolatory: false,
            support_factor: 3.0,
            support_margin: SUPPORT_MARGIN,
            rcond_threshold: DEFAULT_RCOND,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.frame = self.frame.with_seed(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(MmlsError::Config("intrinsic dimension d must be >= 1".into()));
        }
        if !(self.support_factor >= 1.0) {
            return Err(MmlsError::Config(format!(
                "support_factor must be >= 1, got {}",
                self.support_factor
            )));
        }
        if !(self.support_margin >= 1.0) {
            return Err(MmlsError::Config(format!(
                "support_margin must be >= 1, got {}",
                self.support_margin
            )));
        }
        if !(self.eps_reg_factor > 0.0) {
            return Err(MmlsError::Config(format!(
                "eps_reg_factor must be positive, got {}",
                self.eps_reg_factor
            )));
        }
        if !(self.rcond_threshold > 0.0 && self.rcond_threshold < 1.0) {
            return Err(MmlsError::Config(format!(
                "rcond_threshold must lie in (0, 1), got {}",
                self.rcond_threshold
            )));
        }
        self.frame.validate()?;
        if let Bandwidth::Fixed { h, k } = self.bandwidth {
            WeightSpec::new(self.effective_family(), k, h)?;
        }
        Ok(())
    }

    /// The weight family actually used; interpolatory mode forces the
    /// singular family.
    pub fn effective_family(&self) -> WeightFamily {
        if self.interpolatory {
            WeightFamily::InterpolatorySingular
        } else {
            self.family
        }
    }

    /// Seed of the stochastic frame initialization, if any.
    pub fn seed(&self) -> Option<u64> {
        match self.frame.init {
            InitMode::RandomOrthonormal { seed } => Some(seed),
            InitMode::WeightedPca => None,
        }
    }

    /// Minimal positive-weight sample count for both stages to be solvable.
    pub fn min_support_count(&self) -> usize {
        basis_size(self.d, self.m).max(self.d + 1)
    }
}

/// How far past the target neighbor the adaptive support reaches. The
/// compactly supported weights decay steeply toward their edge, so the
/// targeted points must sit well inside the support to carry real weight;
/// too small a margin leaves an effectively near-interpolatory fit whose
/// stability constant can spike for unlucky constellations.
const SUPPORT_MARGIN: f64 = 1.4;

/// Per-query seed derivation used by the batch entry points (SplitMix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The configuration a batch run uses for query `index`: identical to `cfg`
/// except that a random frame initialization gets a per-query seed.
pub fn batch_config(cfg: &ApproxConfig, index: usize) -> ApproxConfig {
    match cfg.seed() {
        Some(base) => cfg.clone().with_seed(derive_seed(base, index as u64)),
        None => cfg.clone(),
    }
}

/// Everything a single query produced, for diagnostics and frame dumps.
#[derive(Debug, Clone)]
pub struct ApproxOutcome {
    pub value: DVector<f64>,
    /// Resolved weight actually used; absent when the exact-hit rule fired.
    pub weight: Option<WeightSpec>,
    pub frame: Option<FrameSolution>,
    /// Positive-weight sample count in the final fit.
    pub in_support: usize,
    /// Support enlargements performed before the solve succeeded.
    pub enlargements: usize,
}

enum TargetKind {
    Values,
    AmbientPoints,
}

/// Approximate the sampled function at `r`.
pub fn approximate(r: &DVector<f64>, samples: &SampleSet, cfg: &ApproxConfig) -> Result<DVector<f64>> {
    Ok(approximate_detailed(r, samples, cfg)?.value)
}

/// As [`approximate`], returning the frame and support diagnostics too.
pub fn approximate_detailed(
    r: &DVector<f64>,
    samples: &SampleSet,
    cfg: &ApproxConfig,
) -> Result<ApproxOutcome> {
    run_query(r, samples, cfg, TargetKind::Values)
}

/// Project `r` onto the approximating manifold: the ambient points
/// themselves become the regression targets and the polynomial's value at
/// the chart origin is the projection.
pub fn project_point(r: &DVector<f64>, samples: &SampleSet, cfg: &ApproxConfig) -> Result<DVector<f64>> {
    Ok(project_point_detailed(r, samples, cfg)?.value)
}

pub fn project_point_detailed(
    r: &DVector<f64>,
    samples: &SampleSet,
    cfg: &ApproxConfig,
) -> Result<ApproxOutcome> {
    run_query(r, samples, cfg, TargetKind::AmbientPoints)
}

fn run_query(
    r: &DVector<f64>,
    samples: &SampleSet,
    cfg: &ApproxConfig,
    target_kind: TargetKind,
) -> Result<ApproxOutcome> {
    cfg.validate()?;
    let n = samples.ambient_dim();
    if r.len() != n {
        return Err(MmlsError::DimensionMismatch(format!(
            "query has dimension {}, samples have {n}",
            r.len()
        )));
    }
    if cfg.d >= n {
        return Err(MmlsError::Config(format!(
            "intrinsic dimension d = {} must be below the ambient dimension {n}",
            cfg.d
        )));
    }

    let h_base = match cfg.bandwidth {
        Bandwidth::Fixed { h, .. } => h,
        Bandwidth::Auto => samples.sampling_stats()?.h_est,
    };

    if cfg.interpolatory {
        let (i, dist) = samples.nearest(r);
        if dist <= 1e-12 * h_base {
            let value = match target_kind {
                TargetKind::Values => samples.value(i).clone(),
                TargetKind::AmbientPoints => samples.point(i).clone(),
            };
            return Ok(ApproxOutcome {
                value,
                weight: None,
                frame: None,
                in_support: 1,
                enlargements: 0,
            });
        }
    }

    let family = cfg.effective_family();
    let eps_reg = sq(cfg.eps_reg_factor * h_base);
    let auto = matches!(cfg.bandwidth, Bandwidth::Auto);
    let target = ((cfg.support_factor * cfg.min_support_count() as f64).ceil() as usize)
        .clamp(1, samples.len());

    let max_attempts = if auto { 6 } else { 1 };
    let mut last_err = None;
    for attempt in 0..max_attempts {
        let grow = 1.5f64.powi(attempt as i32);
        let policy = match cfg.bandwidth {
            Bandwidth::Fixed { h, k } => {
                SupportPolicy::Fixed(WeightSpec::new(family, k, h)?.with_eps_reg(eps_reg)?)
            }
            Bandwidth::Auto => SupportPolicy::AdaptiveCount {
                family,
                h: h_base,
                eps_reg,
                target,
                margin: cfg.support_margin * grow,
            },
        };

        match fit_with_policy(r, samples, cfg, policy, &target_kind) {
            Ok(mut outcome) => {
                outcome.enlargements = attempt;
                return Ok(outcome);
            }
            Err(e) if auto && e.is_support_related() && attempt + 1 < max_attempts => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

fn sq(x: f64) -> f64 {
    x * x
}

fn fit_with_policy(
    r: &DVector<f64>,
    samples: &SampleSet,
    cfg: &ApproxConfig,
    policy: SupportPolicy,
    target: &TargetKind,
) -> Result<ApproxOutcome> {
    let sol = find_local_frame_with(r, samples, policy, cfg.d, &cfg.frame)?;
    let spec = sol.weight;
    let q = sol.frame.origin().clone();
    let basis = sol.frame.basis();

    let mut idx = Vec::new();
    let mut w = Vec::new();
    for i in 0..samples.len() {
        let wi = spec.eval((samples.point(i) - &q).norm());
        if wi > 0.0 {
            idx.push(i);
            w.push(wi);
        }
    }
    let j_size = basis_size(cfg.d, cfg.m);
    if idx.len() < j_size {
        return Err(MmlsError::InsufficientSamples {
            needed: j_size,
            found: idx.len(),
            degree: cfg.m,
        });
    }

    // Chart coordinates, normalized by the support radius so the monomial
    // columns stay well scaled at any h. The value at the origin is
    // unaffected by this scaling.
    let scale = match spec.support_radius() {
        s if s.is_finite() => s,
        _ => 2.0 * spec.h,
    };
    let n_out = match target {
        TargetKind::Values => samples.value_dim(),
        TargetKind::AmbientPoints => samples.ambient_dim(),
    };
    let mut x = DMatrix::zeros(idx.len(), cfg.d);
    let mut y = DMatrix::zeros(idx.len(), n_out);
    for (row, &i) in idx.iter().enumerate() {
        let coords = basis.transpose() * (samples.point(i) - &q);
        for c in 0..cfg.d {
            x[(row, c)] = coords[c] / scale;
        }
        match target {
            TargetKind::Values => {
                let v = samples.value(i);
                for c in 0..n_out {
                    y[(row, c)] = v[c];
                }
            }
            TargetKind::AmbientPoints => {
                let centered = samples.point(i) - &q;
                for c in 0..n_out {
                    y[(row, c)] = centered[c];
                }
            }
        }
    }

    // The value is read at the chart origin; if the in-support samples all
    // sit to one side of it, the read would be an extrapolation. The origin
    // may overhang the sample range by half its span per coordinate, which
    // keeps queries at the edge of the data valid while refusing queries
    // past the sampled region (an open manifold's ends, for instance).
    for c in 0..cfg.d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..idx.len() {
            lo = lo.min(x[(row, c)]);
            hi = hi.max(x[(row, c)]);
        }
        let span = hi - lo;
        let slack = 0.5 * span + 1e-9;
        if lo - slack > 0.0 || hi + slack < 0.0 {
            let offset = if lo > 0.0 { lo } else { -hi };
            return Err(MmlsError::OutsideSampledRegion {
                offset: offset * scale,
                limit: slack * scale,
            });
        }
    }

    let problem = WlsProblem::new(x, y, DVector::from_vec(w))?;
    let model = wls_fit_with(&problem, cfg.m, cfg.rcond_threshold)?;
    let at_origin = model.value_at_origin();
    let value = match target {
        TargetKind::Values => at_origin,
        TargetKind::AmbientPoints => at_origin + &q,
    };
    let in_support = idx.len();
    Ok(ApproxOutcome {
        value,
        weight: Some(spec),
        frame: Some(sol),
        in_support,
        enlargements: 0,
    })
}

/// Evaluate many queries; element `i` equals the scalar call with the
/// per-query configuration [`batch_config`]`(cfg, i)`, bitwise. Individual
/// failures are reported in place and do not abort the batch.
pub fn approximate_batch(
    queries: &[DVector<f64>],
    samples: &SampleSet,
    cfg: &ApproxConfig,
) -> Vec<Result<DVector<f64>>> {
    crate::par::indexed_map(queries.len(), |i| {
        approximate(&queries[i], samples, &batch_config(cfg, i))
    })
}

/// Sequential twin of [`approximate_batch`]; same results in the same order.
pub fn approximate_batch_sequential(
    queries: &[DVector<f64>],
    samples: &SampleSet,
    cfg: &ApproxConfig,
) -> Vec<Result<DVector<f64>>> {
    crate::par::indexed_map_sequential(queries.len(), |i| {
        approximate(&queries[i], samples, &batch_config(cfg, i))
    })
}

/// Batch form of [`project_point`].
pub fn project_batch(
    queries: &[DVector<f64>],
    samples: &SampleSet,
    cfg: &ApproxConfig,
) -> Vec<Result<DVector<f64>>> {
    crate::par::indexed_map(queries.len(), |i| {
        project_point(&queries[i], samples, &batch_config(cfg, i))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::random_orthonormal;
    use nalgebra::DMatrix;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(vec![], vec![]).is_err());
        assert!(SampleSet::new(vec![dv(&[1.0])], vec![]).is_err());
        assert!(SampleSet::new(vec![dv(&[1.0, f64::NAN])], vec![dv(&[0.0])]).is_err());
        assert!(SampleSet::new(vec![dv(&[1.0]), dv(&[1.0, 2.0])], vec![dv(&[0.0]); 2]).is_err());
    }

    /// Affine subspace data with a polynomial target in chart coordinates.
    struct AffineCase {
        set: SampleSet,
        origin: DVector<f64>,
        basis: DMatrix<f64>,
        coeffs: Vec<f64>,
        m: usize,
    }

    fn affine_poly_case(n: usize, d: usize, m: usize, count: usize, seed: u64) -> AffineCase {
        use crate::polybasis::{basis_size, monomial_basis};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let basis = random_orthonormal(n, d, &mut rng).unwrap();
        let coeffs: Vec<f64> = (0..basis_size(d, m))
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let mut points = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let c = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let phi = monomial_basis(&c, m);
            points.push(&origin + &basis * &c);
            values.push(dv(&[phi.dot(&DVector::from_row_slice(&coeffs))]));
        }
        AffineCase {
            set: SampleSet::new(points, values).unwrap(),
            origin,
            basis,
            coeffs,
            m,
        }
    }

    fn eval_truth(case: &AffineCase, chart: &DVector<f64>) -> f64 {
        use crate::polybasis::monomial_basis;
        monomial_basis(chart, case.m).dot(&DVector::from_row_slice(&case.coeffs))
    }

    #[test]
    fn exact_on_affine_data_with_polynomial_target() {
        for (d, m, seed) in [(1usize, 2usize, 4u64), (2, 1, 5), (2, 3, 6)] {
            let case = affine_poly_case(4, d, m, 220, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let chart = DVector::from_fn(d, |_, _| rng.random_range(-0.3..0.3));
            let mut normal = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            normal -= &case.basis * (case.basis.transpose() * &normal);
            normal /= normal.norm();
            let r = &case.origin + &case.basis * &chart + &normal * 0.05;
            let cfg = ApproxConfig::new(d, m).with_seed(11);
            let got = approximate(&r, &case.set, &cfg).unwrap();
            let want = eval_truth(&case, &chart);
            assert!(
                (got[0] - want).abs() <= 1e-6 * want.abs().max(1.0),
                "d={d} m={m}: got {} want {want}",
                got[0]
            );
        }
    }

    #[test]
    fn constant_function_reproduced_on_sphere() {
        use crate::datasets::{gen_sphere_grid, NoiseModel};
        let base = gen_sphere_grid(18, &NoiseModel::none(3)).unwrap();
        let constant = dv(&[4.25, -1.5]);
        let set = SampleSet::new(
            base.points().to_vec(),
            vec![constant.clone(); base.len()],
        )
        .unwrap();
        let cfg = ApproxConfig::new(2, 1).with_seed(8);
        let q = dv(&[0.3, -0.8, 0.52]);
        let q = &q / q.norm();
        let got = approximate(&q, &set, &cfg).unwrap();
        assert!((got - constant).amax() < 1e-10);
    }

    #[test]
    fn interpolatory_mode_returns_sample_values_bitwise() {
        let case = affine_poly_case(3, 1, 2, 120, 9);
        let mut cfg = ApproxConfig::new(1, 2).with_seed(5);
        cfg.interpolatory = true;
        for i in [0usize, 17, 63, 119] {
            let got = approximate(case.set.point(i), &case.set, &cfg).unwrap();
            assert_eq!(got, *case.set.value(i), "exact hit must be bitwise");
        }
        let proj = project_point(case.set.point(17), &case.set, &cfg).unwrap();
        assert_eq!(proj, *case.set.point(17));
    }

    #[test]
    fn projection_invariance_along_the_normal() {
        let case = affine_poly_case(4, 2, 2, 260, 13);
        let cfg = ApproxConfig {
            bandwidth: Bandwidth::Fixed { h: 0.35, k: 2.5 },
            ..ApproxConfig::new(2, 2).with_seed(21)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let chart = dv(&[0.1, -0.2]);
        let mut normal = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        normal -= &case.basis * (case.basis.transpose() * &normal);
        normal /= normal.norm();
        let foot = &case.origin + &case.basis * &chart;
        let r0 = &foot + &normal * 0.25;
        let r1 = &foot + &normal * 0.1;
        let a = approximate(&r0, &case.set, &cfg).unwrap();
        let b = approximate(&r1, &case.set, &cfg).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn rigid_motion_invariance() {
        let case = affine_poly_case(4, 2, 1, 200, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let rot = random_orthonormal(4, 4, &mut rng).unwrap();
        let shift = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let r = {
            let chart = dv(&[0.05, 0.12]);
            let mut normal = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            normal -= &case.basis * (case.basis.transpose() * &normal);
            normal /= normal.norm();
            &case.origin + &case.basis * &chart + &normal * 0.04
        };
        let moved = SampleSet::new(
            case.set.points().iter().map(|p| &rot * p + &shift).collect(),
            case.set.values().to_vec(),
        )
        .unwrap();
        let cfg = ApproxConfig::new(2, 1).with_seed(30);
        let a = approximate(&r, &case.set, &cfg).unwrap();
        let b = approximate(&(&rot * &r + &shift), &moved, &cfg).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn linear_in_the_target_values() {
        let case1 = affine_poly_case(3, 1, 1, 150, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let psi2: Vec<DVector<f64>> = (0..case1.set.len())
            .map(|_| dv(&[rng.random_range(-1.0..1.0)]))
            .collect();
        let (a, b) = (1.7, -0.6);
        let combined: Vec<DVector<f64>> = (0..case1.set.len())
            .map(|i| case1.set.value(i) * a + &psi2[i] * b)
            .collect();
        let set2 = SampleSet::new(case1.set.points().to_vec(), psi2).unwrap();
        let set3 = SampleSet::new(case1.set.points().to_vec(), combined).unwrap();
        let cfg = ApproxConfig::new(1, 1).with_seed(33);
        let r = case1.set.point(40) + dv(&[0.01, -0.02, 0.015]);
        let v1 = approximate(&r, &case1.set, &cfg).unwrap();
        let v2 = approximate(&r, &set2, &cfg).unwrap();
        let v3 = approximate(&r, &set3, &cfg).unwrap();
        assert!((v3 - (v1 * a + v2 * b)).amax() < 1e-10);
    }

    #[test]
    fn project_point_recovers_affine_projection() {
        let case = affine_poly_case(4, 2, 1, 200, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let chart = dv(&[0.2, -0.1]);
        let mut normal = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        normal -= &case.basis * (case.basis.transpose() * &normal);
        normal /= normal.norm();
        let foot = &case.origin + &case.basis * &chart;
        let r = &foot + &normal * 0.3;
        let cfg = ApproxConfig::new(2, 1).with_seed(43);
        let got = project_point(&r, &case.set, &cfg).unwrap();
        assert!((got - foot).norm() < 1e-8);
    }

    #[test]
    fn project_point_onto_circle_improves_with_density() {
        let mut last = f64::INFINITY;
        for &count in &[300usize, 600] {
            let points: Vec<DVector<f64>> = (0..count)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    dv(&[a.cos(), a.sin()])
                })
                .collect();
            let set = SampleSet::new(points, vec![dv(&[0.0]); count]).unwrap();
            let cfg = ApproxConfig::new(1, 2).with_seed(3);
            let got = project_point(&dv(&[1.05, 0.0]), &set, &cfg).unwrap();
            let err = (got - dv(&[1.0, 0.0])).norm();
            assert!(err < last / 2.0, "err {err} vs previous {last}");
            last = err;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn batch_matches_scalar_calls_bitwise() {
        use crate::datasets::{gen_helix, NoiseModel, SigmaField};
        let noise = NoiseModel {
            sigma_domain: SigmaField::Constant(0.0),
            sigma_target: 0.5,
            seed: 50,
        };
        let set = gen_helix(400, (-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI), &noise)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let queries: Vec<DVector<f64>> = (0..100)
            .map(|_| {
                let t: f64 = rng.random_range(-5.0..5.0);
                dv(&[t.sin() + 0.01, t.cos(), t])
            })
            .collect();
        let cfg = ApproxConfig::new(1, 1).with_seed(52);
        let batch = approximate_batch(&queries, &set, &cfg);
        for (i, q) in queries.iter().enumerate() {
            let scalar = approximate(q, &set, &batch_config(&cfg, i)).unwrap();
            assert_eq!(batch[i].as_ref().unwrap(), &scalar, "query {i}");
        }
        let seq = approximate_batch_sequential(&queries, &set, &cfg);
        for i in 0..queries.len() {
            assert_eq!(batch[i].as_ref().unwrap(), seq[i].as_ref().unwrap());
        }
    }

    #[test]
    fn batch_of_one_equals_scalar_and_permutation_permutes() {
        let case = affine_poly_case(3, 1, 1, 120, 61);
        let cfg = ApproxConfig::new(1, 1).with_seed(62);
        let q0 = case.set.point(5) + dv(&[0.01, 0.0, 0.0]);
        let q1 = case.set.point(50) + dv(&[0.0, 0.01, 0.0]);
        let single = approximate_batch(std::slice::from_ref(&q0), &case.set, &cfg);
        assert_eq!(
            single[0].as_ref().unwrap(),
            &approximate(&q0, &case.set, &batch_config(&cfg, 0)).unwrap()
        );
        // Statelessness: each query's result depends only on its own seed
        // slot, so swapping inputs swaps outputs of the same slots.
        let fwd = approximate_batch(&[q0.clone(), q1.clone()], &case.set, &cfg);
        let rev = approximate_batch(&[q1, q0], &case.set, &cfg);
        let v = |r: &Result<DVector<f64>>| r.as_ref().unwrap().clone();
        assert!((v(&fwd[0]) - v(&rev[1])).amax() < 1e-9);
        assert!((v(&fwd[1]) - v(&rev[0])).amax() < 1e-9);
    }

    #[test]
    fn far_query_with_fixed_bandwidth_fails_hard() {
        let case = affine_poly_case(3, 1, 1, 60, 71);
        let cfg = ApproxConfig {
            bandwidth: Bandwidth::Fixed { h: 0.05, k: 2.0 },
            ..ApproxConfig::new(1, 1).with_seed(72)
        };
        let r = &case.origin + dv(&[30.0, 30.0, 30.0]);
        match approximate(&r, &case.set, &cfg) {
            Err(MmlsError::NoSamplesInSupport { .. }) => {}
            other => panic!("expected NoSamplesInSupport, got {other:?}"),
        }
    }

    #[test]
    fn derive_seed_spreads_indices() {
        let s = derive_seed(12345, 0);
        let t = derive_seed(12345, 1);
        assert_ne!(s, t);
        assert_eq!(derive_seed(12345, 7), derive_seed(12345, 7));
    }

    #[test]
    fn value_varies_smoothly_along_a_straight_path() {
        // Statistical smoothness probe: second divided differences of the
        // estimate along a chord near a dense circle stay bounded and show
        // no isolated jump above ten times the typical level.
        let count = 600usize;
        let points: Vec<DVector<f64>> = (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                dv(&[a.cos(), a.sin()])
            })
            .collect();
        let values: Vec<DVector<f64>> = (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                dv(&[a.sin() + (2.0 * a).cos()])
            })
            .collect();
        let set = SampleSet::new(points, values).unwrap();
        let h = 2.0 * std::f64::consts::PI / count as f64;
        let cfg = ApproxConfig {
            bandwidth: Bandwidth::Fixed { h, k: 30.0 },
            ..ApproxConfig::new(1, 2).with_seed(5)
        };
        // Chord passing just outside the circle near angle 0.4.
        let center = dv(&[0.4f64.cos(), 0.4f64.sin()]) * 1.01;
        let dir = dv(&[-0.4f64.sin(), 0.4f64.cos()]);
        let n_steps = 80;
        let span = 0.12;
        let samples_along: Vec<f64> = (0..n_steps)
            .map(|j| {
                let s = span * (j as f64 / (n_steps - 1) as f64 - 0.5);
                approximate(&(&center + &dir * s), &set, &cfg).unwrap()[0]
            })
            .collect();
        let d2: Vec<f64> = samples_along
            .windows(3)
            .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
            .collect();
        let mean = d2.iter().sum::<f64>() / d2.len() as f64;
        let max = d2.iter().cloned().fold(0.0f64, f64::max);
        assert!(max.is_finite() && mean.is_finite());
        assert!(
            max <= 10.0 * (mean + 1e-12),
            "second differences spike: max {max:.3e} vs mean {mean:.3e}"
        );
    }
}
