//! Hypothesis-sampler benchmark against ground truth.
//!
//! KDGS runs to termination first. Its wall-clock time becomes the budget for
//! the baselines, which keep generating hypotheses until it is spent:
//! uniform minimal samples, and a residual-preference guided sampler in the
//! style of Multi-GS.
//!
//! Quality is measured against ground truth. `#HM` is the share of hypotheses
//! whose minimal sample lies entirely on one true structure. `#HI` is the
//! share whose estimated inlier set overlaps the true inliers of its
//! best-matching structure by at least 80%, with overlap
//! `|est ∩ true| / max(|est|, |true|)`. The one-sided coverage
//! `|est ∩ true| / |true|` is reported beside it; it also counts hypotheses
//! whose estimated set is simply large, which most structure-less hypotheses
//! have, so on its own it barely separates samplers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::krd_row_floored;
use crate::error::{Error, Result};
use crate::geometry::{Dataset, Hypothesis, ModelKind};
use crate::sampler::{run_kdgs, SamplerConfig};
use crate::scale::{estimate_scale, FractionEstimatorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Kdgs,
    ResidualPreference,
    Uniform,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 3] = [
        SamplerMethod::Kdgs,
        SamplerMethod::ResidualPreference,
        SamplerMethod::Uniform,
    ];

    fn stream(self) -> u64 {
        match self {
            SamplerMethod::Kdgs => 1,
            SamplerMethod::ResidualPreference => 2,
            SamplerMethod::Uniform => 3,
        }
    }
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMethod::Kdgs => "kdgs",
            SamplerMethod::ResidualPreference => "residual-preference",
            SamplerMethod::Uniform => "uniform",
        })
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kdgs" => Ok(SamplerMethod::Kdgs),
            "residual-preference" | "multigs" | "multi-gs" => Ok(SamplerMethod::ResidualPreference),
            "uniform" | "random" => Ok(SamplerMethod::Uniform),
            other => Err(Error::Config(format!("unknown sampler method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchOptions {
    /// KDGS settings; its `seed` is replaced by each trial's seed.
    pub sampler: SamplerConfig,
    pub fraction_estimator: FractionEstimatorKind,
    /// Root seed from which every trial seed is derived.
    pub seed: u64,
    /// `#HI` is measured on a uniform subsample of at most this many
    /// hypotheses per method and trial.
    pub max_hi_evaluations: usize,
    /// Minimum overlap for an `#HI` hit.
    pub overlap_threshold: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            fraction_estimator: FractionEstimatorKind::default(),
            seed: 0,
            max_hi_evaluations: 1000,
            overlap_threshold: 0.8,
        }
    }
}

/// Result of one method in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: SamplerMethod,
    /// Number of hypotheses generated (`#H`).
    pub hypotheses: usize,
    /// Percentage with an all-inlier single-structure minimal sample (`#HM`).
    pub hm_percent: f64,
    /// Percentage of the evaluated subsample meeting the overlap criterion (`#HI`).
    pub hi_percent: f64,
    /// Percentage of the evaluated subsample covering at least the threshold
    /// fraction of some structure's true inliers, regardless of size.
    pub hi_coverage_percent: f64,
    /// Size of the subsample `#HI` was measured on.
    pub hi_evaluated: usize,
    pub seconds: f64,
    /// `#HM` hits per true structure (structure `k` at position `k − 1`).
    pub structure_hm: Vec<usize>,
    /// `#HI` hits in the evaluated subsample per best-matching structure.
    pub structure_hi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTrial {
    pub seed: u64,
    /// KDGS wall-clock time, which the baselines were given.
    pub budget_seconds: f64,
    pub methods: Vec<MethodStats>,
}

/// Means over trials for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: SamplerMethod,
    pub hypotheses: f64,
    pub hm_percent: f64,
    pub hi_percent: f64,
    pub hi_coverage_percent: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerBenchReport {
    pub model: ModelKind,
    pub n: usize,
    pub structures: usize,
    pub options: BenchOptions,
    pub summary: Vec<MethodSummary>,
    pub trials: Vec<BenchTrial>,
}

impl SamplerBenchReport {
    pub fn summary_for(&self, method: SamplerMethod) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Seeds of `trials` consecutive trials derived from `root`.
pub fn trial_seeds(root: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Minimal sample lies on a single true structure (label > 0).
pub fn is_all_inlier_mss(mss: &[usize], labels: &[usize]) -> Option<usize> {
    let first = labels[*mss.first()?];
    (first > 0 && mss.iter().all(|&j| labels[j] == first)).then_some(first)
}

/// Overlap of an estimated inlier set with its best-matching true structure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    /// Structure maximising `|est ∩ true| / max(|est|, |true|)` and that value
    /// (0 and 0.0 when nothing overlaps).
    pub structure: usize,
    pub overlap: f64,
    /// Largest `|est ∩ true| / |true|` over structures.
    pub coverage: f64,
}

/// Compares `estimated` against every structure in `labels` (1..=structures),
/// ties to the smaller structure id.
pub fn best_overlap(estimated: &[usize], labels: &[usize], structures: usize) -> Overlap {
    let mut sizes = vec![0usize; structures + 1];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut hits = vec![0usize; structures + 1];
    for &j in estimated {
        hits[labels[j]] += 1;
    }
    let mut best = Overlap {
        structure: 0,
        overlap: 0.0,
        coverage: 0.0,
    };
    for k in 1..=structures {
        if sizes[k] == 0 {
            continue;
        }
        let overlap = hits[k] as f64 / sizes[k].max(estimated.len()) as f64;
        if overlap > best.overlap {
            best.structure = k;
            best.overlap = overlap;
        }
        best.coverage = best.coverage.max(hits[k] as f64 / sizes[k] as f64);
    }
    best
}

/// Runs every requested method for `trials` trials.
pub fn sampler_benchmark(
    dataset: &Dataset,
    methods: &[SamplerMethod],
    trials: usize,
    options: &BenchOptions,
) -> Result<SamplerBenchReport> {
    let labels = dataset.gt_labels().ok_or(Error::MissingGroundTruth)?;
    let eta = dataset.kind().minimal_sample_size();
    options.sampler.validate(eta)?;
    if !(options.overlap_threshold > 0.0 && options.overlap_threshold <= 1.0) {
        return Err(Error::Config("overlap_threshold must be in (0, 1]".into()));
    }
    if options.max_hi_evaluations == 0 {
        return Err(Error::Config("max_hi_evaluations must be positive".into()));
    }
    let beta = options.sampler.beta_for(eta);
    if dataset.len() < 2 * beta {
        return Err(Error::DatasetTooSmall {
            needed: 2 * beta,
            got: dataset.len(),
        });
    }
    let structures = labels.iter().copied().max().unwrap_or(0);

    let mut runs = Vec::with_capacity(trials);
    for seed in trial_seeds(options.seed, trials) {
        let sampler = SamplerConfig {
            seed,
            ..options.sampler.clone()
        };
        let start = Instant::now();
        let kdgs = run_kdgs(dataset, &sampler);
        let budget = start.elapsed();

        let mut stats = Vec::with_capacity(methods.len());
        for &method in methods {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(method.stream());
            let (hypotheses, seconds) = match method {
                SamplerMethod::Kdgs => (kdgs.all_hypotheses.clone(), budget.as_secs_f64()),
                SamplerMethod::Uniform => {
                    let start = Instant::now();
                    let h = uniform_sampler(dataset, budget, &mut rng);
                    (h, start.elapsed().as_secs_f64())
                }
                SamplerMethod::ResidualPreference => {
                    let start = Instant::now();
                    let h = residual_preference_sampler(dataset, budget, &mut rng);
                    (h, start.elapsed().as_secs_f64())
                }
            };
            stats.push(score(
                dataset,
                labels,
                structures,
                method,
                &hypotheses,
                seconds,
                options,
                beta,
                &mut rng,
            )?);
        }
        runs.push(BenchTrial {
            seed,
            budget_seconds: budget.as_secs_f64(),
            methods: stats,
        });
    }

    let summary = methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let mean = |f: fn(&MethodStats) -> f64| {
                runs.iter().map(|t| f(&t.methods[m])).sum::<f64>() / runs.len().max(1) as f64
            };
            MethodSummary {
                method,
                hypotheses: mean(|s| s.hypotheses as f64),
                hm_percent: mean(|s| s.hm_percent),
                hi_percent: mean(|s| s.hi_percent),
                hi_coverage_percent: mean(|s| s.hi_coverage_percent),
                seconds: mean(|s| s.seconds),
            }
        })
        .collect();

    Ok(SamplerBenchReport {
        model: dataset.kind(),
        n: dataset.len(),
        structures,
        options: options.clone(),
        summary,
        trials: runs,
    })
}

fn percent(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * hits as f64 / total as f64
    }
}

#[allow(clippy::too_many_arguments)]
fn score(
    dataset: &Dataset,
    labels: &[usize],
    structures: usize,
    method: SamplerMethod,
    hypotheses: &[Hypothesis],
    seconds: f64,
    options: &BenchOptions,
    beta: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MethodStats> {
    let mut structure_hm = vec![0; structures];
    for h in hypotheses {
        if let Some(k) = is_all_inlier_mss(&h.mss, labels) {
            structure_hm[k - 1] += 1;
        }
    }
    let hm = structure_hm.iter().sum();

    let eta = dataset.kind().minimal_sample_size();
    let estimator = options.fraction_estimator.estimator();
    let evaluated: Vec<usize> = if hypotheses.len() <= options.max_hi_evaluations {
        (0..hypotheses.len()).collect()
    } else {
        let mut picked = sample(rng, hypotheses.len(), options.max_hi_evaluations).into_vec();
        picked.sort_unstable();
        picked
    };
    let overlaps: Vec<Overlap> = evaluated
        .par_iter()
        .map(|&i| {
            let residuals = hypotheses[i].residual_vector(dataset);
            let (profile, density) = krd_row_floored(&residuals, beta);
            let scale = estimate_scale(estimator, &density, &profile, eta, beta)?;
            Ok(best_overlap(&profile.order[..scale.t], labels, structures))
        })
        .collect::<Result<_>>()?;
    let threshold = options.overlap_threshold;
    let mut structure_hi = vec![0; structures];
    let mut covered = 0;
    for o in &overlaps {
        if o.structure > 0 && o.overlap >= threshold {
            structure_hi[o.structure - 1] += 1;
        }
        if o.coverage >= threshold {
            covered += 1;
        }
    }
    let hi = structure_hi.iter().sum();

    Ok(MethodStats {
        method,
        hypotheses: hypotheses.len(),
        hm_percent: percent(hm, hypotheses.len()),
        hi_percent: percent(hi, evaluated.len()),
        hi_coverage_percent: percent(covered, evaluated.len()),
        hi_evaluated: evaluated.len(),
        seconds,
        structure_hm,
        structure_hi,
    })
}

/// Hypotheses from uniformly drawn minimal samples until `budget` elapses.
pub fn uniform_sampler<R: Rng + ?Sized>(
    dataset: &Dataset,
    budget: Duration,
    rng: &mut R,
) -> Vec<Hypothesis> {
    let eta = dataset.kind().minimal_sample_size();
    let start = Instant::now();
    let mut out = Vec::new();
    while start.elapsed() < budget {
        let mss = sample(rng, dataset.len(), eta).into_vec();
        if let Ok(h) = Hypothesis::fit(dataset, &mss) {
            out.push(h);
        }
    }
    out
}

/// Hypotheses generated before the first preference update.
const WARMUP: usize = 10;

/// Guided sampling from residual-preference correlation until `budget`
/// elapses.
///
/// A point's preference is the set of the `T = ⌊0.1 m⌋` hypotheses (out of
/// the `m` generated so far) with the smallest residual to it; two points
/// correlate by the size of the intersection of their preferences over `T`.
/// The first member of a minimal sample is uniform and each further member is
/// drawn with weight equal to the product of its correlations with the members
/// already drawn. Preferences are refreshed each time `m` grows by 10% (and at
/// least 10 hypotheses), and a refresh that would overrun the budget is
/// skipped.
pub fn residual_preference_sampler<R: Rng + ?Sized>(
    dataset: &Dataset,
    budget: Duration,
    rng: &mut R,
) -> Vec<Hypothesis> {
    let n = dataset.len();
    let eta = dataset.kind().minimal_sample_size();
    let start = Instant::now();
    let mut out: Vec<Hypothesis> = Vec::new();
    // Residuals of every hypothesis, hypothesis-major; single precision is
    // plenty for ranking.
    let mut residuals: Vec<Vec<f32>> = Vec::new();
    let mut prefs: Option<Preferences> = None;
    let mut next_update = WARMUP;
    let mut last_update_cost: Option<(Duration, usize)> = None;
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();

    while start.elapsed() < budget {
        if out.len() >= next_update {
            let m = out.len();
            let predicted = last_update_cost
                .map(|(d, m0)| d.mul_f64(m as f64 / m0 as f64))
                .unwrap_or_default();
            if start.elapsed() + predicted < budget {
                let t0 = Instant::now();
                prefs = Some(Preferences::build(&residuals, n));
                rows.clear();
                last_update_cost = Some((t0.elapsed(), m));
            }
            next_update = (m + WARMUP).max(m + m / 10);
        }
        let mss = match &prefs {
            None => sample(rng, n, eta).into_vec(),
            Some(p) => {
                let mut mss = vec![rng.random_range(0..n)];
                while mss.len() < eta {
                    let mut w = vec![1.0; n];
                    for &s in &mss {
                        let row = rows.entry(s).or_insert_with(|| p.correlation_row(s));
                        for (wk, c) in w.iter_mut().zip(row.iter()) {
                            *wk *= c;
                        }
                    }
                    for &s in &mss {
                        w[s] = 0.0;
                    }
                    let next = match WeightedIndex::new(&w) {
                        Ok(dist) => dist.sample(rng),
                        Err(_) => loop {
                            let k = rng.random_range(0..n);
                            if !mss.contains(&k) {
                                break k;
                            }
                        },
                    };
                    mss.push(next);
                }
                mss
            }
        };
        if let Ok(h) = Hypothesis::fit(dataset, &mss) {
            residuals.push(
                h.residual_vector(dataset)
                    .iter()
                    .map(|&r| r as f32)
                    .collect(),
            );
            out.push(h);
        }
    }
    out
}

/// Top-`T` residual preferences of every point as bitsets over hypotheses.
struct Preferences {
    words: usize,
    bits: Vec<Vec<u64>>,
    t: usize,
}

impl Preferences {
    fn build(residuals: &[Vec<f32>], n: usize) -> Self {
        let m = residuals.len();
        let t = (m / 10).max(1);
        let words = m.div_ceil(64);
        let mut column: Vec<(f32, usize)> = Vec::with_capacity(m);
        let bits = (0..n)
            .map(|j| {
                column.clear();
                column.extend(residuals.iter().enumerate().map(|(i, r)| (r[j], i)));
                column
                    .select_nth_unstable_by(t - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut set = vec![0u64; words];
                for &(_, i) in &column[..t] {
                    set[i / 64] |= 1 << (i % 64);
                }
                set
            })
            .collect();
        Self { words, bits, t }
    }

    /// Correlation of point `s` with every point.
    fn correlation_row(&self, s: usize) -> Vec<f64> {
        let a = &self.bits[s];
        self.bits
            .iter()
            .map(|b| {
                let shared: u32 = (0..self.words).map(|w| (a[w] & b[w]).count_ones()).sum();
                shared as f64 / self.t as f64
            })
            .collect()
    }
}
