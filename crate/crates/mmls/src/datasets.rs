//! Synthetic manifold samplers, noise models and fill-distance estimation.
//!
//! All generators are deterministic given their seed. Spherical coordinates
//! follow the physics convention: `theta` is the polar angle measured from
//! the +z axis in `[0, pi)`, `phi` the azimuth in `[0, 2*pi)`, so
//! `(phi, theta) = (0, pi/2)` maps to `(1, 0, 0)`.

use crate::approximator::SampleSet;
use crate::error::{MmlsError, Result};
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ambient noise scale, optionally dependent on the clean point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaField {
    Constant(f64),
    /// `sigma(p) = sqrt(base + p_z^2)` with `p_z` the third coordinate of
    /// the clean point.
    ZScaled { base: f64 },
}

impl SigmaField {
    pub fn sigma_at(&self, clean: &DVector<f64>) -> f64 {
        match *self {
            SigmaField::Constant(s) => s,
            SigmaField::ZScaled { base } => {
                let z = if clean.len() > 2 { clean[2] } else { 0.0 };
                (base + z * z).sqrt()
            }
        }
    }
}

/// Additive Gaussian noise for the generators: per-coordinate ambient noise
/// with std `sigma_domain(p)` and target noise with std `sigma_target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_domain: SigmaField,
    pub sigma_target: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none(seed: u64) -> Self {
        NoiseModel {
            sigma_domain: SigmaField::Constant(0.0),
            sigma_target: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dom_ok = match self.sigma_domain {
            SigmaField::Constant(s) => s.is_finite() && s >= 0.0,
            SigmaField::ZScaled { base } => base.is_finite() && base >= 0.0,
        };
        if !dom_ok {
            return Err(MmlsError::Config("domain noise scale must be finite and >= 0".into()));
        }
        if !(self.sigma_target.is_finite() && self.sigma_target >= 0.0) {
            return Err(MmlsError::Config("target noise scale must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Fill-distance estimate over a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingStats {
    /// Largest nearest-other-sample distance. A sample-to-sample proxy for
    /// the true fill distance of the underlying domain, which is not
    /// observable from the samples alone.
    pub h_est: f64,
    /// Mean nearest-neighbor distance.
    pub knn_mean: f64,
    pub n: usize,
}

/// `h_est = max_i min_{j != i} |r_i - r_j|`, plus the mean nearest-neighbor
/// distance. Quadratic scan; the sets this crate targets stay small.
pub fn estimate_fill_distance(points: &[DVector<f64>]) -> Result<SamplingStats> {
    if points.len() < 2 {
        return Err(MmlsError::Config(
            "fill-distance estimation requires at least two points".into(),
        ));
    }
    let mut max_nn = 0.0f64;
    let mut sum_nn = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let mut nn = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                nn = nn.min((p - q).norm());
            }
        }
        max_nn = max_nn.max(nn);
        sum_nn += nn;
    }
    Ok(SamplingStats {
        h_est: max_nn,
        knn_mean: sum_nn / points.len() as f64,
        n: points.len(),
    })
}

// ---------------------------------------------------------------------------
// Helix
// ---------------------------------------------------------------------------

/// Point on the unit helix `(sin t, cos t, t)`.
pub fn helix_point(t: f64) -> DVector<f64> {
    DVector::from_row_slice(&[t.sin(), t.cos(), t])
}

/// Equispaced helix samples over `t_range` (endpoints included) with target
/// `psi(x, y, z) = z` read off the clean point, then noise per the model.
pub fn gen_helix(n: usize, t_range: (f64, f64), noise: &NoiseModel) -> Result<SampleSet> {
    noise.validate()?;
    if n < 2 {
        return Err(MmlsError::Config("helix generator needs n >= 2".into()));
    }
    let (t0, t1) = t_range;
    if !(t1 > t0) {
        return Err(MmlsError::Config(format!("invalid t range [{t0}, {t1}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut points = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
        let clean = helix_point(t);
        let sd = noise.sigma_domain.sigma_at(&clean);
        let mut p = clean.clone();
        for c in 0..3 {
            let g: f64 = StandardNormal.sample(&mut rng);
            p[c] += sd * g;
        }
        let g: f64 = StandardNormal.sample(&mut rng);
        points.push(p);
        values.push(DVector::from_row_slice(&[t + noise.sigma_target * g]));
    }
    SampleSet::new(points, values)
}

// ---------------------------------------------------------------------------
// Sphere
// ---------------------------------------------------------------------------

/// Unit-sphere point for azimuth `phi` and polar angle `theta`.
pub fn sphere_point(phi: f64, theta: f64) -> DVector<f64> {
    DVector::from_row_slice(&[
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ])
}

/// Spherical angles `(phi, theta)` of a point on (or near) the unit sphere,
/// with `phi` in `[0, 2*pi)`.
pub fn sphere_angles(p: &DVector<f64>) -> (f64, f64) {
    let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    let theta = (p[2] / p.norm()).clamp(-1.0, 1.0).acos();
    (phi, theta)
}

/// `g x g` cell-centered grid over `(phi, theta)` on the unit sphere with
/// the angle pair as the (2-dimensional) target. Cell centering keeps the
/// poles out of the set, so no two grid points coincide.
pub fn gen_sphere_grid(g: usize, noise: &NoiseModel) -> Result<SampleSet> {
    noise.validate()?;
    if g < 2 {
        return Err(MmlsError::Config("sphere grid needs g >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut points = Vec::with_capacity(g * g);
    let mut values = Vec::with_capacity(g * g);
    for a in 0..g {
        for b in 0..g {
            let phi = 2.0 * PI * (a as f64 + 0.5) / g as f64;
            let theta = PI * (b as f64 + 0.5) / g as f64;
            let clean = sphere_point(phi, theta);
            let sd = noise.sigma_domain.sigma_at(&clean);
            let mut p = clean;
            for c in 0..3 {
                let gsn: f64 = StandardNormal.sample(&mut rng);
                p[c] += sd * gsn;
            }
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            points.push(p);
            values.push(DVector::from_row_slice(&[
                phi + noise.sigma_target * g1,
                theta + noise.sigma_target * g2,
            ]));
        }
    }
    SampleSet::new(points, values)
}

// ---------------------------------------------------------------------------
// Klein bottle
// ---------------------------------------------------------------------------

/// Klein bottle immersion in R^4 at parameters `(u, v)`.
pub fn klein_point(u: f64, v: f64) -> DVector<f64> {
    let r = 2.0 * v.cos() + 1.0;
    DVector::from_row_slice(&[
        r * u.cos(),
        r * u.sin(),
        2.0 * v.sin() * (u / 2.0).cos(),
        2.0 * v.sin() * (u / 2.0).sin(),
    ])
}

/// Benchmark target over the Klein bottle parameters.
pub fn klein_value(u: f64, v: f64) -> f64 {
    7.0 * (4.0 * u).sin()
        + 5.0 * (2.0 * v).cos().powi(2)
        + 6.0 * (-32.0 * ((u - PI).powi(2) + (v - PI).powi(2))).exp()
}

/// Uniform `(u, v)` draws on `[0, 2*pi)^2` mapped through the Klein
/// immersion, with Gaussian ambient noise of scale `sigma_r` and
/// heteroscedastic value noise whose base scale is solved from the target
/// signal-to-noise ratio (`snrdb`, decibels; `INFINITY` for clean values).
///
/// Returns the sample set together with the resolved base noise scale.
pub fn gen_klein(n: usize, sigma_r: f64, snrdb: f64, seed: u64) -> Result<(SampleSet, f64)> {
    if n < 1 {
        return Err(MmlsError::Config("klein generator needs n >= 1".into()));
    }
    if !(sigma_r >= 0.0) || !sigma_r.is_finite() {
        return Err(MmlsError::Config(format!("sigma_r must be finite and >= 0, got {sigma_r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let clean_values: Vec<f64> = params.iter().map(|&(u, v)| klein_value(u, v)).collect();

    let sigma0 = if snrdb.is_finite() {
        let mean = clean_values.iter().sum::<f64>() / n as f64;
        let var = clean_values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n as f64 - 1.0).max(1.0);
        (var / 10f64.powf(snrdb / 10.0)).sqrt()
    } else {
        0.0
    };

    let mut points = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (i, &(u, v)) in params.iter().enumerate() {
        let mut p = klein_point(u, v);
        for c in 0..4 {
            let g: f64 = StandardNormal.sample(&mut rng);
            p[c] += sigma_r * g;
        }
        let sigma_p = sigma0 * (1.0 + 0.1 * u.cos() + 0.1 * v.sin());
        let g: f64 = StandardNormal.sample(&mut rng);
        points.push(p);
        values.push(DVector::from_row_slice(&[clean_values[i] + sigma_p * g]));
    }
    Ok((SampleSet::new(points, values)?, sigma0))
}

// ---------------------------------------------------------------------------
// High-dimensional embedding
// ---------------------------------------------------------------------------

/// An isometric embedding of `n_from`-dimensional points into `n_to`
/// dimensions through a random matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct HighDimEmbedding {
    map: DMatrix<f64>,
}

impl HighDimEmbedding {
    pub fn new(n_from: usize, n_to: usize, seed: u64) -> Result<Self> {
        if n_to < n_from {
            return Err(MmlsError::Config(format!(
                "target dimension {n_to} below source dimension {n_from}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gaussian = DMatrix::from_fn(n_to, n_from, |_, _| StandardNormal.sample(&mut rng));
        let map = gaussian.qr().q();
        Ok(HighDimEmbedding { map })
    }

    pub fn embed_point(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.map * p
    }

    pub fn embed_set(&self, samples: &SampleSet) -> Result<SampleSet> {
        let points = samples.points().iter().map(|p| self.embed_point(p)).collect();
        SampleSet::new(points, samples.values().to_vec())
    }
}

/// Embed a sample set into `n_target` ambient dimensions; values unchanged.
pub fn embed_high_dim(samples: &SampleSet, n_target: usize, seed: u64) -> Result<SampleSet> {
    HighDimEmbedding::new(samples.ambient_dim(), n_target, seed)?.embed_set(samples)
}
