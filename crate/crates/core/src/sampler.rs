//! Self-terminating density-guided hypothesis generation (KDGS).
//!
//! Every point still in the unexplained set `ν` seeds one minimal sample per
//! round: the point itself, then the remaining members drawn without
//! replacement from a PMF combining KRD point correlation with weights taken
//! from the point's best potential hypotheses. A point leaves `ν` once its
//! explanation score stops growing by at least a fraction `α`.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{self, bandwidth_floor, krd_row_floored, SortedResidualProfile};
use crate::error::Error;
use crate::geometry::{Dataset, Hypothesis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Relative explanation-score growth needed to stay in `ν`.
    pub alpha: f64,
    /// Number of top KRD preferences compared by the point correlation.
    pub top_t: usize,
    /// Residual neighbourhood size; `None` derives it from the minimal sample size.
    pub beta: Option<usize>,
    pub max_outer_iterations: usize,
    pub max_degenerate_retries: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            top_t: density::DEFAULT_TOP_T,
            beta: None,
            max_outer_iterations: 100,
            max_degenerate_retries: 20,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn beta_for(&self, eta: usize) -> usize {
        self.beta.unwrap_or_else(|| default_beta(eta))
    }

    pub fn validate(&self, eta: usize) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("sampler alpha must be in (0, 1)".into()));
        }
        if self.top_t == 0 {
            return Err(Error::Config("sampler top_t must be positive".into()));
        }
        if self.beta_for(eta) < eta + 1 {
            return Err(Error::Config(format!("beta must be at least {}", eta + 1)));
        }
        Ok(())
    }
}

/// `β = 2η`, raised to at least 15 for models with `η < 5`.
pub fn default_beta(eta: usize) -> usize {
    if eta < 5 {
        (2 * eta).max(15)
    } else {
        2 * eta
    }
}

/// Hypotheses with aligned residual rows, raw KRD rows and sorted profiles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HypothesisStore {
    pub hypotheses: Vec<Hypothesis>,
    pub residuals: Vec<Vec<f64>>,
    pub densities: Vec<Vec<f64>>,
    pub profiles: Vec<SortedResidualProfile>,
}

impl HypothesisStore {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Fits `mss` rows for every hypothesis in parallel, keeping input order.
    pub fn from_hypotheses(
        dataset: &Dataset,
        hypotheses: Vec<Hypothesis>,
        floor_rank: usize,
    ) -> Self {
        let mut store = Self::default();
        store.extend(dataset, hypotheses, floor_rank);
        store
    }

    /// Appends hypotheses; KRD bandwidths are floored at the `floor_rank`-th
    /// smallest residual of each row.
    pub fn extend(&mut self, dataset: &Dataset, hypotheses: Vec<Hypothesis>, floor_rank: usize) {
        let rows: Vec<(Vec<f64>, SortedResidualProfile, Vec<f64>)> = hypotheses
            .par_iter()
            .map(|h| {
                let r = h.residual_vector(dataset);
                let (profile, d) = krd_row_floored(&r, floor_rank);
                (r, profile, d)
            })
            .collect();
        for (h, (r, p, d)) in hypotheses.into_iter().zip(rows) {
            self.hypotheses.push(h);
            self.residuals.push(r);
            self.profiles.push(p);
            self.densities.push(d);
        }
    }

    /// Keeps only the listed rows, in the given order.
    pub fn retain_indices(&self, keep: &[usize]) -> Self {
        Self {
            hypotheses: keep.iter().map(|&i| self.hypotheses[i].clone()).collect(),
            residuals: keep.iter().map(|&i| self.residuals[i].clone()).collect(),
            densities: keep.iter().map(|&i| self.densities[i].clone()).collect(),
            profiles: keep.iter().map(|&i| self.profiles[i].clone()).collect(),
        }
    }
}

/// Normalises a raw KRD row to unit sum and scales it by the gap between the
/// mean of its β largest and β smallest normalised densities (clamped at 0).
pub fn scale_density_row(raw: &[f64], beta: usize) -> Vec<f64> {
    let n = raw.len();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() || n == 0 {
        return vec![0.0; n];
    }
    let normalized: Vec<f64> = raw.iter().map(|d| d / sum).collect();
    let mut sorted = normalized.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let b = beta.clamp(1, n);
    let top = sorted[..b].iter().sum::<f64>() / b as f64;
    let bottom = sorted[n - b..].iter().sum::<f64>() / b as f64;
    let pi = (top - bottom).max(0.0);
    normalized.into_iter().map(|d| d * pi).collect()
}

/// [`scale_density_row`] applied to every row.
pub fn scale_density_profiles(raw: &[Vec<f64>], beta: usize) -> Vec<Vec<f64>> {
    raw.par_iter().map(|r| scale_density_row(r, beta)).collect()
}

/// `ρ_i^β`: the β-th smallest residual of a profile.
pub fn beta_residual(profile: &SortedResidualProfile, beta: usize) -> f64 {
    profile.rho[beta.clamp(1, profile.len()) - 1]
}

/// Mean of the β smallest residuals of a profile.
pub fn top_beta_mean_residual(profile: &SortedResidualProfile, beta: usize) -> f64 {
    let b = beta.clamp(1, profile.len());
    profile.rho[..b].iter().sum::<f64>() / b as f64
}

/// Hypotheses whose β-residual neighbourhood contains point `j`.
pub fn potential_good_set(j: usize, residuals: &[Vec<f64>], beta_residuals: &[f64]) -> Vec<usize> {
    residuals
        .iter()
        .zip(beta_residuals)
        .enumerate()
        .filter(|(_, (row, &bound))| row[j] <= bound)
        .map(|(i, _)| i)
        .collect()
}

/// The two hypotheses a point's conditional weights are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuidingPair {
    /// Highest scaled density at the point.
    pub by_density: usize,
    /// Smallest mean top-β residual.
    pub by_residual: usize,
}

pub fn guiding_pair(
    j: usize,
    theta: &[usize],
    scaled: &[Vec<f64>],
    top_beta_means: &[f64],
) -> Option<GuidingPair> {
    let by_density = theta
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, i| match best {
            Some(k) if scaled[k][j] >= scaled[i][j] => Some(k),
            _ => Some(i),
        })?;
    let by_residual = theta
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, i| match best {
            Some(k) if top_beta_means[k] <= top_beta_means[i] => Some(k),
            _ => Some(i),
        })?;
    Some(GuidingPair {
        by_density,
        by_residual,
    })
}

/// Sampling weights `sʲ` over all points for seed point `j`.
///
/// Product of the normalised scaled density row of the density-guided
/// hypothesis and the normalised inverse residuals `max(r)/r` of the
/// residual-guided one. Empty `θ` gives uniform weights.
///
/// Residuals are floored at the residual-guided hypothesis's `ρ^β`. Its own
/// minimal-sample points have residual zero, and an unfloored reciprocal puts
/// nearly all the mass on them, so every draw would just reuse that sample.
pub fn conditional_weights(
    j: usize,
    theta: &[usize],
    scaled: &[Vec<f64>],
    residuals: &[Vec<f64>],
    top_beta_means: &[f64],
    beta_residuals: &[f64],
) -> Vec<f64> {
    let n = residuals
        .first()
        .map_or(0, Vec::len)
        .max(scaled.first().map_or(0, Vec::len));
    let Some(pair) = guiding_pair(j, theta, scaled, top_beta_means) else {
        return vec![1.0 / n as f64; n];
    };
    let dens = &scaled[pair.by_density];
    let d_sum: f64 = dens.iter().sum();
    let res = &residuals[pair.by_residual];
    let r_max = res.iter().copied().fold(0.0_f64, f64::max);
    let floor = bandwidth_floor(r_max).max(beta_residuals[pair.by_residual]);
    let inv: Vec<f64> = res.iter().map(|&r| r_max / r.max(floor)).collect();
    let inv_sum: f64 = inv.iter().sum();
    (0..n)
        .map(|k| {
            let a = if d_sum > 0.0 {
                dens[k] / d_sum
            } else {
                1.0 / n as f64
            };
            let b = if r_max > 0.0 && inv_sum.is_finite() {
                inv[k] / inv_sum
            } else {
                1.0 / n as f64
            };
            a * b
        })
        .collect()
}

/// Minimal sample seeded by `j`: `j` first, then `η − 1` sequential draws
/// without replacement from `c ⊙ s` (uniform over the rest when the
/// remaining mass is zero).
pub fn sample_mss<R: Rng + ?Sized>(
    j: usize,
    correlation: &[f64],
    weights: &[f64],
    eta: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = correlation.len();
    let mut pmf: Vec<f64> = correlation
        .iter()
        .zip(weights)
        .map(|(c, s)| {
            let w = c * s;
            if w.is_finite() && w > 0.0 {
                w
            } else {
                0.0
            }
        })
        .collect();
    let mut mss = Vec::with_capacity(eta);
    mss.push(j);
    pmf[j] = 0.0;
    while mss.len() < eta.min(n) {
        let next = match WeightedIndex::new(&pmf) {
            Ok(dist) => dist.sample(rng),
            Err(_) => {
                let rest: Vec<usize> = (0..n).filter(|k| !mss.contains(k)).collect();
                rest[rng.random_range(0..rest.len())]
            }
        };
        mss.push(next);
        pmf[next] = 0.0;
    }
    mss
}

/// Recomputes rows and columns `rows` of the point-correlation matrix `c`
/// from the top-`t` KRD preferences `top`; other entries are left as they are.
pub fn refresh_correlation_rows(c: &mut [Vec<f64>], top: &[Vec<usize>], rows: &[usize], t: usize) {
    let n = top.len();
    let fresh: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&j| {
            (0..n)
                .map(|k| density::point_correlation(&top[j], &top[k], t))
                .collect()
        })
        .collect();
    for (&j, row) in rows.iter().zip(fresh) {
        for (k, &v) in row.iter().enumerate() {
            c[j][k] = v;
            c[k][j] = v;
        }
    }
}

/// Output of [`run_kdgs`].
#[derive(Clone, Debug)]
pub struct KdgsOutput {
    /// Hypotheses that are some point's top-1 KRD preference.
    pub store: HypothesisStore,
    /// Total hypotheses generated before retention.
    pub generated: usize,
    /// Every generated hypothesis, in generation order.
    pub all_hypotheses: Vec<Hypothesis>,
    pub iterations: usize,
    /// The outer loop stopped on the iteration cap with `ν` nonempty.
    pub budget_exceeded: bool,
    /// `|ν|` before the first round and after every round.
    pub nu_history: Vec<usize>,
    /// Explanation scores after every round.
    pub tau_history: Vec<Vec<f64>>,
    /// `|θʲ|` of every point at termination.
    pub final_theta_sizes: Vec<usize>,
}

/// Mutable state of one KDGS run.
struct Kdgs<'a> {
    dataset: &'a Dataset,
    eta: usize,
    beta: usize,
    config: &'a SamplerConfig,
    rng: ChaCha8Rng,
    store: HypothesisStore,
    seen: HashSet<Vec<usize>>,
    scaled: Vec<Vec<f64>>,
    beta_residuals: Vec<f64>,
    top_beta_means: Vec<f64>,
    correlation: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    nu: Vec<usize>,
    tau_prev: Vec<f64>,
    tau_curr: Vec<f64>,
    theta_sizes: Vec<usize>,
}

impl<'a> Kdgs<'a> {
    fn new(dataset: &'a Dataset, config: &'a SamplerConfig) -> Self {
        let n = dataset.len();
        let eta = dataset.kind().minimal_sample_size();
        Self {
            dataset,
            eta,
            beta: config.beta_for(eta),
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            store: HypothesisStore::default(),
            seen: HashSet::new(),
            scaled: Vec::new(),
            beta_residuals: Vec::new(),
            top_beta_means: Vec::new(),
            correlation: vec![vec![1.0; n]; n],
            weights: vec![vec![1.0; n]; n],
            nu: (0..n).collect(),
            tau_prev: vec![0.0; n],
            tau_curr: vec![0.0; n],
            theta_sizes: vec![0; n],
        }
    }

    /// One hypothesis per point in `ν`; duplicates of earlier samples are dropped.
    fn generate_batch(&mut self) -> usize {
        let mut fresh = Vec::new();
        for &j in &self.nu {
            let mut attempt = 0;
            let hypothesis = loop {
                let mss = sample_mss(
                    j,
                    &self.correlation[j],
                    &self.weights[j],
                    self.eta,
                    &mut self.rng,
                );
                match Hypothesis::fit(self.dataset, &mss) {
                    Ok(h) => break Some(h),
                    Err(_) if attempt < self.config.max_degenerate_retries => attempt += 1,
                    Err(_) => break None,
                }
            };
            if let Some(h) = hypothesis {
                let mut key = h.mss.clone();
                key.sort_unstable();
                if self.seen.insert(key) {
                    fresh.push(h);
                }
            }
        }
        let added = fresh.len();
        let start = self.store.len();
        self.store.extend(self.dataset, fresh, self.beta);
        let beta = self.beta;
        let new_scaled = scale_density_profiles(&self.store.densities[start..], beta);
        self.scaled.extend(new_scaled);
        for p in &self.store.profiles[start..] {
            self.beta_residuals.push(beta_residual(p, beta));
            self.top_beta_means.push(top_beta_mean_residual(p, beta));
        }
        added
    }

    /// Explanation scores, sampling weights, the next `ν`, and correlation refresh.
    fn update(&mut self) {
        let n = self.dataset.len();
        let per_point: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|j| {
                let theta = potential_good_set(j, &self.store.residuals, &self.beta_residuals);
                let tau = if theta.is_empty() {
                    0.0
                } else {
                    theta.iter().map(|&i| self.scaled[i][j]).sum::<f64>() / theta.len() as f64
                };
                (tau, theta.len())
            })
            .collect();
        for (j, (tau, size)) in per_point.into_iter().enumerate() {
            self.tau_curr[j] = tau;
            self.theta_sizes[j] = size;
        }

        let alpha = self.config.alpha;
        self.nu = (0..n)
            .filter(|&j| {
                self.tau_curr[j] == 0.0
                    || self.tau_curr[j] - self.tau_prev[j] >= alpha * self.tau_curr[j]
            })
            .collect();

        // Sampling weights are only consumed for points that seed the next
        // round. Without any hypothesis the initial uniform weights stay.
        if self.store.is_empty() {
            self.tau_prev.clone_from(&self.tau_curr);
            return;
        }
        let new_weights: Vec<Vec<f64>> = self
            .nu
            .par_iter()
            .map(|&j| {
                let theta = potential_good_set(j, &self.store.residuals, &self.beta_residuals);
                conditional_weights(
                    j,
                    &theta,
                    &self.scaled,
                    &self.store.residuals,
                    &self.top_beta_means,
                    &self.beta_residuals,
                )
            })
            .collect();
        for (&j, w) in self.nu.iter().zip(new_weights) {
            self.weights[j] = w;
        }

        self.refresh_correlation();
        self.tau_prev.clone_from(&self.tau_curr);
    }

    /// Recomputes correlation rows and columns of every point in `ν` from the
    /// current top-T KRD preferences; other entries stay frozen.
    fn refresh_correlation(&mut self) {
        if self.nu.is_empty() {
            return;
        }
        let n = self.dataset.len();
        let t = self.config.top_t.min(self.store.len());
        if t == 0 {
            return;
        }
        let top: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|j| density::top_preferences(&self.scaled, j, t))
            .collect();
        refresh_correlation_rows(&mut self.correlation, &top, &self.nu, t);
    }

    fn retained(&self) -> Vec<usize> {
        let n = self.dataset.len();
        let mut keep: Vec<usize> = (0..n)
            .into_par_iter()
            .filter_map(|j| {
                density::top_preferences(&self.scaled, j, 1)
                    .first()
                    .copied()
            })
            .collect();
        keep.sort_unstable();
        keep.dedup();
        keep
    }
}

/// Runs KDGS to termination (or the iteration cap) and keeps the hypotheses
/// that are the top-1 KRD preference of at least one point.
pub fn run_kdgs(dataset: &Dataset, config: &SamplerConfig) -> KdgsOutput {
    let mut state = Kdgs::new(dataset, config);
    let mut nu_history = vec![state.nu.len()];
    let mut tau_history = Vec::new();
    let mut iterations = 0;
    while !state.nu.is_empty() && iterations < config.max_outer_iterations {
        iterations += 1;
        state.generate_batch();
        state.update();
        nu_history.push(state.nu.len());
        tau_history.push(state.tau_curr.clone());
    }
    let keep = state.retained();
    KdgsOutput {
        store: state.store.retain_indices(&keep),
        generated: state.store.len(),
        all_hypotheses: state.store.hypotheses,
        iterations,
        budget_exceeded: !state.nu.is_empty(),
        nu_history,
        tau_history,
        final_theta_sizes: state.theta_sizes,
    }
}
