//! End-to-end fitting: sampling, scale estimation, model selection and
//! point-to-model assignment.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::density::SortedResidualProfile;
use crate::error::{Error, Result};
use crate::geometry::{Dataset, Hypothesis};
use crate::sampler::{run_kdgs, HypothesisStore, KdgsOutput, SamplerConfig};
use crate::scale::{estimate_noise_scale, estimate_scale, FractionEstimatorKind, ScaleEstimate};
use crate::selection::{
    assemble_q, build_penalty, build_similarity, goodness_score, greedy_select, prune_explained,
    qp_select, solve_box_qp, suppress_correlated, InlierLists, QpOptions,
};

/// Model-selection strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Greedy,
    Optimal,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Greedy => "greedy",
            Variant::Optimal => "optimal",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" | "g" => Ok(Variant::Greedy),
            "optimal" | "o" => Ok(Variant::Optimal),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    pub variant: Variant,
    pub fraction_estimator: FractionEstimatorKind,
    /// Footrule correlation at which two hypotheses count as the same structure.
    pub delta: f64,
    /// Weight of the quadratic penalty in the relaxed selection problem.
    pub lambda: f64,
    /// Relaxed selection value at which a hypothesis is selected.
    pub pi: f64,
    pub qp_max_iterations: usize,
    pub qp_tolerance: f64,
    /// Hypotheses with goodness below this fraction of the best goodness are
    /// not offered to model selection.
    pub min_relative_goodness: f64,
    /// After thresholding the relaxed solution, drop hypotheses similar (at
    /// `delta`) to a selected hypothesis with a larger relaxed value.
    pub qp_suppress_correlated: bool,
    /// A selected hypothesis is dropped when at least this fraction of its
    /// core inliers already belongs to the cores of larger selections
    /// (1 disables the check).
    pub max_shared_inliers: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            variant: Variant::Greedy,
            fraction_estimator: FractionEstimatorKind::default(),
            delta: 0.3,
            lambda: 1.0,
            pi: 1e-3,
            qp_max_iterations: 10_000,
            qp_tolerance: 1e-6,
            min_relative_goodness: 0.1,
            qp_suppress_correlated: true,
            max_shared_inliers: 0.4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, eta: usize) -> Result<()> {
        self.sampler.validate(eta)?;
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config("delta must be in [0, 1]".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::Config("pi must be in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.min_relative_goodness) {
            return Err(Error::Config(
                "min_relative_goodness must be in [0, 1)".into(),
            ));
        }
        if !(self.max_shared_inliers > 0.0 && self.max_shared_inliers <= 1.0) {
            return Err(Error::Config("max_shared_inliers must be in (0, 1]".into()));
        }
        if !(self.qp_tolerance > 0.0) {
            return Err(Error::Config("qp_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Per-hypothesis quantities used by selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub scale: ScaleEstimate,
    pub goodness: f64,
    /// The goodness window ran past the last point.
    pub truncated: bool,
    /// The `t` points with the smallest residuals.
    pub estimated_inliers: Vec<usize>,
}

/// One selected structure.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedModel {
    pub hypothesis: Hypothesis,
    /// Points assigned to this structure (disjoint across structures).
    pub inliers: Vec<usize>,
    /// Estimated inlier set before assignment.
    pub estimated_inliers: Vec<usize>,
    pub sigma_hat: f64,
    pub inlier_fraction: f64,
    pub goodness: f64,
    /// Sorted residuals and the raw KRD along them.
    pub sorted_residuals: Vec<f64>,
    pub sorted_density: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub objective: f64,
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub sampler_iterations: usize,
    pub sampler_budget_exceeded: bool,
    pub hypotheses_generated: usize,
    pub hypotheses_retained: usize,
    /// Retained hypotheses that passed the goodness floor.
    pub hypotheses_offered: usize,
    pub nu_history: Vec<usize>,
    pub tau_history: Vec<Vec<f64>>,
    pub truncated_goodness: usize,
    pub solver: Option<SolverStats>,
    pub sampling_seconds: f64,
    pub selection_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub variant: Variant,
    pub selected: Vec<SelectedModel>,
    /// `0` for outliers, `k` for the k-th selected structure (1-based).
    pub labels: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn num_structures(&self) -> usize {
        self.selected.len()
    }
}

/// Scale, goodness and estimated inliers for every retained hypothesis.
pub fn evaluate_candidates(
    store: &HypothesisStore,
    estimator: FractionEstimatorKind,
    eta: usize,
    beta: usize,
) -> Result<Vec<Candidate>> {
    let estimator = estimator.estimator();
    use rayon::prelude::*;
    (0..store.len())
        .into_par_iter()
        .map(|i| {
            let profile = &store.profiles[i];
            let density = &store.densities[i];
            let scale = estimate_scale(estimator, density, profile, eta, beta)?;
            let sorted: Vec<f64> = profile.order.iter().map(|&j| density[j]).collect();
            let g = goodness_score(&sorted, scale.t, scale.sigma_hat, beta);
            Ok(Candidate {
                scale,
                goodness: g.value,
                truncated: g.truncated,
                estimated_inliers: profile.order[..scale.t].to_vec(),
            })
        })
        .collect()
}

/// Residuals at or below this multiple of the dataset scale are treated as
/// rounding noise.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-9;

/// Candidate for a hypothesis that passes through every point to working
/// precision. The boundary scan always leaves at least β points outside, so
/// such a hypothesis instead keeps all points as inliers.
pub fn exact_fit_candidate(
    profile: &SortedResidualProfile,
    density: &[f64],
    beta: usize,
) -> Candidate {
    let n = profile.len();
    let sigma_hat = estimate_noise_scale(&profile.rho, n);
    let sorted: Vec<f64> = profile.order.iter().map(|&j| density[j]).collect();
    let g = goodness_score(&sorted, n, sigma_hat, beta);
    Candidate {
        scale: ScaleEstimate {
            f_hat: 1.0,
            t: n,
            sigma_hat,
        },
        goodness: g.value,
        truncated: g.truncated,
        estimated_inliers: profile.order.clone(),
    }
}

/// Hard assignment of points to selected structures.
///
/// `inlier_sets[k]` and `densities[k]` belong to the k-th selected
/// hypothesis. A point inside at least one set gets the label (k + 1) of the
/// set holding it with the largest raw density there, ties to the smaller k.
/// Every other point is an outlier (label 0).
pub fn assign_points(n: usize, inlier_sets: &[Vec<usize>], densities: &[&[f64]]) -> Vec<usize> {
    assert_eq!(inlier_sets.len(), densities.len());
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    for (k, set) in inlier_sets.iter().enumerate() {
        for &j in set {
            let d = densities[k][j];
            match best[j] {
                Some((_, bd)) if bd >= d => {}
                _ => best[j] = Some((k, d)),
            }
        }
    }
    best.into_iter()
        .map(|b| b.map_or(0, |(k, _)| k + 1))
        .collect()
}

/// Runs the whole pipeline with the configured variant.
pub fn run_dgsac(dataset: &Dataset, config: &PipelineConfig) -> Result<FitResult> {
    let eta = dataset.kind().minimal_sample_size();
    config.validate(eta)?;
    let beta = config.sampler.beta_for(eta);
    if dataset.len() < 2 * beta {
        return Err(Error::DatasetTooSmall {
            needed: 2 * beta,
            got: dataset.len(),
        });
    }
    let start = Instant::now();
    let sampled = run_kdgs(dataset, &config.sampler);
    let sampling_seconds = start.elapsed().as_secs_f64();
    let mut result = select_from_sample(dataset, &sampled, config)?;
    let d = &mut result.diagnostics;
    d.sampling_seconds = sampling_seconds;
    d.total_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Half-width, in units of σ̂, of the residual band holding a hypothesis's
/// core inliers.
pub const CORE_BAND: f64 = 2.5;

/// Points within `CORE_BAND · σ̂` of a hypothesis.
pub fn core_inliers(residuals: &[f64], sigma_hat: f64) -> Vec<usize> {
    let band = CORE_BAND * sigma_hat;
    residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= band)
        .map(|(j, _)| j)
        .collect()
}

/// Selection and assignment on the output of a finished KDGS run.
pub fn select_from_sample(
    dataset: &Dataset,
    sampled: &KdgsOutput,
    config: &PipelineConfig,
) -> Result<FitResult> {
    let t0 = Instant::now();
    let eta = dataset.kind().minimal_sample_size();
    let beta = config.sampler.beta_for(eta);
    let store = &sampled.store;
    let mut candidates = evaluate_candidates(store, config.fraction_estimator, eta, beta)?;
    let exact = EXACT_FIT_TOLERANCE * dataset.scale();
    for (i, c) in candidates.iter_mut().enumerate() {
        let profile = &store.profiles[i];
        if profile.rho.last().is_some_and(|&r| r <= exact) {
            *c = exact_fit_candidate(profile, &store.densities[i], beta);
        }
    }
    let g_best = candidates.iter().map(|c| c.goodness).fold(0.0, f64::max);
    let floor = config.min_relative_goodness * g_best;
    // Indices (into the store) offered to selection.
    let offered: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].goodness >= floor)
        .collect();
    let g: Vec<f64> = offered.iter().map(|&i| candidates[i].goodness).collect();

    let lists = InlierLists::new(
        offered
            .iter()
            .map(|&i| store.profiles[i].order.clone())
            .collect(),
        offered.iter().map(|&i| candidates[i].scale.t).collect(),
    );
    let similarity = build_similarity(&lists, config.delta);

    let (chosen, solver) = match config.variant {
        Variant::Greedy => (greedy_select(&g, &similarity.b), None),
        Variant::Optimal if g.is_empty() => (Vec::new(), None),
        Variant::Optimal => {
            let penalty = build_penalty(&similarity.z, &g);
            let q = assemble_q(&similarity.z, &penalty, &g);
            let opts = QpOptions {
                max_iterations: config.qp_max_iterations,
                tolerance: config.qp_tolerance,
                record_trace: false,
            };
            let y0 = vec![0.5; g.len()];
            let sol = solve_box_qp(&g, &q, config.lambda, &y0, &opts)?;
            let stats = SolverStats {
                objective: sol.objective,
                stationarity_residual: sol.stationarity_residual,
                iterations: sol.iterations,
                converged: sol.converged,
            };
            let mut picked = qp_select(&sol.y, config.pi);
            picked.sort_by(|&i, &k| sol.y[k].total_cmp(&sol.y[i]).then(i.cmp(&k)));
            if config.qp_suppress_correlated {
                picked = suppress_correlated(&picked, &sol.y, &similarity.b);
            }
            (picked, Some(stats))
        }
    };

    // Larger structures explain their points first; a selection whose core
    // is mostly explained already is dropped.
    let mut ranked = chosen;
    ranked.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[offered[a]], &candidates[offered[b]]);
        cb.scale
            .t
            .cmp(&ca.scale.t)
            .then(cb.goodness.total_cmp(&ca.goodness))
            .then(a.cmp(&b))
    });
    let cores: Vec<Vec<usize>> = offered
        .iter()
        .map(|&i| core_inliers(&store.residuals[i], candidates[i].scale.sigma_hat))
        .collect();
    let chosen = prune_explained(&ranked, &cores, dataset.len(), config.max_shared_inliers);
    let chosen: Vec<usize> = chosen.into_iter().map(|k| offered[k]).collect();
    let sets: Vec<Vec<usize>> = chosen
        .iter()
        .map(|&i| candidates[i].estimated_inliers.clone())
        .collect();
    let dens: Vec<&[f64]> = chosen
        .iter()
        .map(|&i| store.densities[i].as_slice())
        .collect();
    let labels = assign_points(dataset.len(), &sets, &dens);

    let mut assigned = vec![Vec::new(); chosen.len()];
    for (j, &l) in labels.iter().enumerate() {
        if l > 0 {
            assigned[l - 1].push(j);
        }
    }
    let selected = chosen
        .iter()
        .zip(assigned)
        .map(|(&i, inliers)| {
            let profile = &store.profiles[i];
            let c = &candidates[i];
            SelectedModel {
                hypothesis: store.hypotheses[i].clone(),
                inliers,
                estimated_inliers: c.estimated_inliers.clone(),
                sigma_hat: c.scale.sigma_hat,
                inlier_fraction: c.scale.f_hat,
                goodness: c.goodness,
                sorted_residuals: profile.rho.clone(),
                sorted_density: profile
                    .order
                    .iter()
                    .map(|&j| store.densities[i][j])
                    .collect(),
            }
        })
        .collect();

    let diagnostics = Diagnostics {
        sampler_iterations: sampled.iterations,
        sampler_budget_exceeded: sampled.budget_exceeded,
        hypotheses_generated: sampled.generated,
        hypotheses_retained: store.len(),
        hypotheses_offered: offered.len(),
        nu_history: sampled.nu_history.clone(),
        tau_history: sampled.tau_history.clone(),
        truncated_goodness: candidates.iter().filter(|c| c.truncated).count(),
        solver,
        sampling_seconds: 0.0,
        selection_seconds: t0.elapsed().as_secs_f64(),
        total_seconds: t0.elapsed().as_secs_f64(),
    };
    Ok(FitResult {
        variant: config.variant,
        selected,
        labels,
        diagnostics,
    })
}
