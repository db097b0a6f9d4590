//! Per-hypothesis inlier fraction and noise-scale estimation.
//!
//! The inlier/outlier boundary of a hypothesis is found by scanning candidate
//! boundaries `t` along its sorted residuals. Two scores are available: the
//! density disparity against the `β` points right after `t`, and a two-segment
//! split of the log-density profile. Both are discounted by how dispersed the
//! residuals before `t` are.

use serde::{Deserialize, Serialize};

use crate::density::SortedResidualProfile;
use crate::error::{Error, Result};

/// Boundary scoring used by the pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionEstimatorKind {
    /// [`DensitySplitEstimator`].
    #[default]
    DensitySplit,
    /// [`DensityDisparityEstimator`].
    DensityDisparity,
}

impl FractionEstimatorKind {
    pub fn estimator(self) -> &'static dyn FractionEstimator {
        match self {
            FractionEstimatorKind::DensitySplit => &DensitySplitEstimator,
            FractionEstimatorKind::DensityDisparity => &DensityDisparityEstimator,
        }
    }
}

/// Estimated inlier structure of one hypothesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleEstimate {
    /// Estimated inlier fraction in `(0, 1]`.
    pub f_hat: f64,
    /// Estimated inlier count `⌊f̂ n⌋`.
    pub t: usize,
    /// Sample standard deviation of the `t` smallest residuals.
    pub sigma_hat: f64,
}

/// Strategy for locating the inlier/outlier boundary of one hypothesis.
pub trait FractionEstimator: Send + Sync {
    /// `density` is the raw KRD row indexed by point; `profile` the sorted
    /// residuals of the same hypothesis. Returns `f̂`.
    fn estimate(
        &self,
        density: &[f64],
        profile: &SortedResidualProfile,
        eta: usize,
        beta: usize,
    ) -> Result<f64>;
}

/// Boundary scan scoring density disparity against residual dispersion.
#[derive(Clone, Copy, Debug, Default)]
pub struct DensityDisparityEstimator;

impl FractionEstimator for DensityDisparityEstimator {
    fn estimate(
        &self,
        density: &[f64],
        profile: &SortedResidualProfile,
        eta: usize,
        beta: usize,
    ) -> Result<f64> {
        let sorted: Vec<f64> = profile.order.iter().map(|&j| density[j]).collect();
        let t = disparity_boundary(&sorted, &profile.rho, eta, beta)?;
        Ok(t as f64 / profile.len() as f64)
    }
}

/// Relative margin a later candidate must beat the incumbent by; keeps the
/// smaller boundary on numerically flat scores.
const TIE_TOLERANCE: f64 = 1e-12;

/// Boundary `t* ∈ [max(β, η), n − β]` maximising
/// `[mean d(1..t) / mean d(t+1..t+β)] / (1 + std ρ(1..t) / mean ρ(1..t))`.
pub fn disparity_boundary(
    sorted_density: &[f64],
    rho: &[f64],
    eta: usize,
    beta: usize,
) -> Result<usize> {
    let n = rho.len();
    let beta = beta.max(1);
    if n < 2 * beta {
        return Err(Error::DatasetTooSmall {
            needed: 2 * beta,
            got: n,
        });
    }
    let lo = beta.max(eta).max(2).min(n - beta);
    let mut pd = vec![0.0; n + 1];
    for k in 0..n {
        pd[k + 1] = pd[k] + sorted_density[k];
    }
    // Welford running moments of rho(1..t); exact zero spread on flat heads.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &r) in rho[..lo - 1].iter().enumerate() {
        let delta = r - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (r - mean);
    }
    let mut best_t = lo;
    let mut best = f64::NEG_INFINITY;
    for t in lo..=n - beta {
        let tf = t as f64;
        let delta = rho[t - 1] - mean;
        mean += delta / tf;
        m2 += delta * (rho[t - 1] - mean);
        let inner = pd[t] / tf;
        let outer = (pd[t + beta] - pd[t]) / beta as f64;
        let disparity = if outer > 0.0 { inner / outer } else { f64::MAX };
        let var = (m2 / (tf - 1.0)).max(0.0);
        let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        let score = disparity / (1.0 + cv);
        if score > best * (1.0 + TIE_TOLERANCE) || best == f64::NEG_INFINITY {
            best = score;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Boundary scan that splits the sorted log-density profile into an inner
/// and an outer segment with maximal between-segment contrast
/// `t(n − t)/n² · (mean log d(1..t) − mean log d(t+1..n))²`, discounted by
/// the residual dispersion `1 + std ρ(1..t) / mean ρ(1..t)`.
///
/// Profiles without a sharp density drop split near their middle, so the
/// resulting inlier sets are wide and their noise scale large.
#[derive(Clone, Copy, Debug, Default)]
pub struct DensitySplitEstimator;

impl FractionEstimator for DensitySplitEstimator {
    fn estimate(
        &self,
        density: &[f64],
        profile: &SortedResidualProfile,
        eta: usize,
        beta: usize,
    ) -> Result<f64> {
        let sorted: Vec<f64> = profile.order.iter().map(|&j| density[j]).collect();
        let t = density_split_boundary(&sorted, &profile.rho, eta, beta)?;
        Ok(t as f64 / profile.len() as f64)
    }
}

/// Boundary `t* ∈ [max(β, η), n − β]` of [`DensitySplitEstimator`]; ties go
/// to the smaller boundary.
pub fn density_split_boundary(
    sorted_density: &[f64],
    rho: &[f64],
    eta: usize,
    beta: usize,
) -> Result<usize> {
    let n = rho.len();
    let beta = beta.max(1);
    if n < 2 * beta {
        return Err(Error::DatasetTooSmall {
            needed: 2 * beta,
            got: n,
        });
    }
    let lo = beta.max(eta).max(2).min(n - beta);
    let floor = sorted_density
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let logs: Vec<f64> = sorted_density
        .iter()
        .map(|&d| if d > 0.0 { d.ln() } else { floor.ln() })
        .collect();
    let mut pl = vec![0.0; n + 1];
    for k in 0..n {
        pl[k + 1] = pl[k] + logs[k];
    }
    let nf = n as f64;
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &r) in rho[..lo - 1].iter().enumerate() {
        let delta = r - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (r - mean);
    }
    let mut best_t = lo;
    let mut best = f64::NEG_INFINITY;
    for t in lo..=n - beta {
        let tf = t as f64;
        let delta = rho[t - 1] - mean;
        mean += delta / tf;
        m2 += delta * (rho[t - 1] - mean);
        let inner = pl[t] / tf;
        let outer = (pl[n] - pl[t]) / (nf - tf);
        let contrast = tf * (nf - tf) / (nf * nf) * (inner - outer).max(0.0).powi(2);
        let var = (m2 / (tf - 1.0)).max(0.0);
        let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        let score = contrast / (1.0 + cv);
        if best == f64::NEG_INFINITY || score > best + TIE_TOLERANCE * best.abs().max(1e-300) {
            best = score;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Fraction estimate from the density-disparity boundary scan.
pub fn estimate_inlier_fraction(
    density: &[f64],
    profile: &SortedResidualProfile,
    eta: usize,
    beta: usize,
) -> Result<f64> {
    DensityDisparityEstimator.estimate(density, profile, eta, beta)
}

/// Sample standard deviation (divisor `t − 1`) of the `t` smallest residuals.
pub fn estimate_noise_scale(rho: &[f64], t: usize) -> f64 {
    debug_assert!(t >= 2 && t <= rho.len());
    let head = &rho[..t];
    let mean = head.iter().sum::<f64>() / t as f64;
    let ss: f64 = head.iter().map(|r| (r - mean) * (r - mean)).sum();
    (ss / (t as f64 - 1.0)).sqrt()
}

/// Full per-hypothesis estimate: fraction, inlier count and noise scale.
pub fn estimate_scale(
    estimator: &dyn FractionEstimator,
    density: &[f64],
    profile: &SortedResidualProfile,
    eta: usize,
    beta: usize,
) -> Result<ScaleEstimate> {
    let n = profile.len();
    let f_hat = estimator.estimate(density, profile, eta, beta)?;
    let t = ((f_hat * n as f64 + 1e-9).floor() as usize).clamp(eta.max(2).min(n), n);
    Ok(ScaleEstimate {
        f_hat,
        t,
        sigma_hat: estimate_noise_scale(&profile.rho, t),
    })
}
