//! Invariant checks and independent oracles shared by the property tests and
//! the acceptance suite. Every check returns `Err` with a description of the
//! first counterexample.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgsac::bench::{residual_preference_sampler, uniform_sampler};
use dgsac::density::{
    epanechnikov, kernel_residual_density_sorted, krd_row, krd_row_floored, point_correlation,
    top_preferences,
};
use dgsac::eval::classification_accuracy;
use dgsac::geometry::synthetic::{generate_synthetic, BoundingBox, Structure, SyntheticSpec};
use dgsac::geometry::twoview::{fit_fundamental, fit_homography};
use dgsac::geometry::{fit_minimal, DataPoint, Dataset, Hypothesis, ModelKind};
use dgsac::io::{format_dataset, parse_dataset};
use dgsac::pipeline::{evaluate_candidates, run_dgsac, PipelineConfig, Variant};
use dgsac::sampler::{
    refresh_correlation_rows, run_kdgs, sample_mss, scale_density_row, SamplerConfig,
};
use dgsac::scale::{estimate_inlier_fraction, estimate_noise_scale, FractionEstimatorKind};
use dgsac::selection::{
    assemble_q, build_penalty, build_similarity, greedy_select, qp_select, solve_box_qp,
    spearman_footrule, suppress_correlated, InlierLists, QpOptions,
};

pub type Check = fn() -> Result<(), String>;

/// Runs `test` on `cases` deterministic draws from `strategy`.
pub fn check<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

// ---------------------------------------------------------------------------
// Data helpers

fn random_points(kind: ModelKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<DataPoint> {
    (0..n)
        .map(|_| {
            DataPoint::new(
                (0..kind.point_dim())
                    .map(|_| rng.random_range(-10.0..10.0))
                    .collect(),
            )
        })
        .collect()
}

/// Two crossing segments, 30 inliers each, 30% outliers.
pub fn two_lines(seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        structures: vec![
            Structure::Segment {
                from: [-1.0, -0.8],
                to: [1.0, 0.6],
                inliers: 30,
            },
            Structure::Segment {
                from: [-0.9, 0.9],
                to: [0.8, -1.0],
                inliers: 30,
            },
        ],
        sigma: 0.005,
        outlier_fraction: 0.3,
        bbox: BoundingBox::square(1.0),
        seed,
    })
    .expect("valid spec")
}

/// Correspondences seen by two calibrated cameras `[I | 0]` and `[R | t]`.
fn two_view_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    let r = Rotation3::from_euler_angles(
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
    );
    let t = Vector3::new(
        rng.random_range(0.5..1.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.2..0.2),
    );
    (0..n)
        .map(|_| {
            let x = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(3.0..6.0),
            );
            let y = r * x + t;
            [x[0] / x[2], x[1] / x[2], y[0] / y[2], y[1] / y[2]]
        })
        .collect()
}

fn triangle_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// Four correspondences with no nearly collinear triple in either view.
fn well_conditioned_quad(rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    loop {
        let quad: Vec<[f64; 4]> = (0..4)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let ok = [0usize, 2].iter().all(|&off| {
            let p: Vec<[f64; 2]> = quad.iter().map(|c| [c[off], c[off + 1]]).collect();
            (0..4).all(|skip| {
                let t: Vec<&[f64; 2]> = (0..4).filter(|&k| k != skip).map(|k| &p[k]).collect();
                triangle_area(t[0], t[1], t[2]) > 0.1
            })
        });
        if ok {
            return quad;
        }
    }
}

// ---------------------------------------------------------------------------
// geometry-models

pub fn residuals_are_nonnegative_and_finite() -> Result<(), String> {
    check(200, (0..5usize, any::<u64>()), |(k, seed)| {
        let kind = ModelKind::ALL[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Dataset::new(kind, random_points(kind, 30, &mut rng), None).unwrap();
        let eta = kind.minimal_sample_size();
        let mss = rand::seq::index::sample(&mut rng, data.len(), eta).into_vec();
        let Ok(h) = Hypothesis::fit(&data, &mss) else {
            return Ok(());
        };
        for r in h.residual_vector(&data) {
            prop_assert!(r >= 0.0 && r.is_finite(), "residual {r} for {kind}");
        }
        Ok(())
    })
}

pub fn minimal_fit_passes_through_its_sample() -> Result<(), String> {
    check(200, (0..5usize, any::<u64>()), |(k, seed)| {
        let kind = ModelKind::ALL[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<DataPoint> = match kind {
            ModelKind::Homography => well_conditioned_quad(&mut rng)
                .into_iter()
                .map(|c| DataPoint::new(c.to_vec()))
                .collect(),
            ModelKind::Fundamental => two_view_points(8, &mut rng)
                .into_iter()
                .map(|c| DataPoint::new(c.to_vec()))
                .collect(),
            _ => random_points(kind, kind.minimal_sample_size(), &mut rng),
        };
        let coords: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
        let Ok(model) = fit_minimal(kind, &coords) else {
            return Ok(());
        };
        let scale = coords
            .iter()
            .flat_map(|c| c.iter())
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        for p in &points {
            let r = model.residual(p.coords());
            prop_assert!(r <= 1e-9 * scale, "{kind}: residual {r} on own sample");
        }
        Ok(())
    })
}

pub fn two_view_fits_agree_with_and_without_normalization() -> Result<(), String> {
    check(100, (any::<bool>(), any::<u64>()), |(homography, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sample, probes): (Vec<[f64; 4]>, Vec<[f64; 4]>) = if homography {
            let probes = (0..20)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect();
            (well_conditioned_quad(&mut rng), probes)
        } else {
            let mut all = two_view_points(28, &mut rng);
            // Off-geometry probes, so residuals are well above rounding level.
            let probes = all
                .split_off(8)
                .into_iter()
                .map(|c| c.map(|v| v + rng.random_range(-0.05..0.05)))
                .collect();
            (all, probes)
        };
        let coords: Vec<&[f64]> = sample.iter().map(|c| c.as_slice()).collect();
        let fit = |normalize| {
            if homography {
                fit_homography(&coords, normalize)
            } else {
                fit_fundamental(&coords, normalize)
            }
        };
        let (Ok(a), Ok(b)) = (fit(true), fit(false)) else {
            return Ok(());
        };
        for p in &probes {
            let (ra, rb) = (a.residual(p), b.residual(p));
            prop_assert!(
                (ra - rb).abs() <= 1e-6 * ra.abs().max(rb.abs()).max(1e-9),
                "normalized {ra} vs direct {rb}"
            );
        }
        Ok(())
    })
}

pub fn synthetic_label_counts_match() -> Result<(), String> {
    check(
        100,
        (
            prop::collection::vec(4usize..40, 1..5),
            0.0f64..0.8,
            any::<u64>(),
        ),
        |(counts, outliers, seed)| {
            let structures = counts
                .iter()
                .enumerate()
                .map(|(k, &inliers)| Structure::Circle {
                    center: [0.1 * k as f64, 0.0],
                    radius: 0.5,
                    inliers,
                })
                .collect();
            let spec = SyntheticSpec {
                structures,
                sigma: 0.01,
                outlier_fraction: outliers,
                bbox: BoundingBox::square(1.0),
                seed,
            };
            let data = generate_synthetic(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let labels = data.gt_labels().unwrap();
            for (k, &c) in counts.iter().enumerate() {
                prop_assert_eq!(labels.iter().filter(|&&l| l == k + 1).count(), c);
            }
            prop_assert_eq!(
                labels.iter().filter(|&&l| l == 0).count(),
                spec.outlier_count()
            );
            Ok(())
        },
    )
}

// ---------------------------------------------------------------------------
// density-core

/// Direct double loop over the kernel residual density definition, with
/// bandwidth `max(ρⱼ, max(1e-12, 1e-9 · max ρ))`.
pub fn krd_oracle(residuals: &[f64]) -> Vec<f64> {
    let n = residuals.len();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let floor = (1e-9 * max).max(1e-12);
    residuals
        .iter()
        .map(|&rj| {
            let b = rj.max(floor);
            let mut s = 0.0;
            for &rk in residuals {
                let u = (rj - rk) / b;
                if u.abs() <= 1.0 {
                    s += 0.75 * (1.0 - u * u) / b;
                }
            }
            s / n as f64
        })
        .collect()
}

pub fn kernel_quadrature() -> Result<(), String> {
    // Composite Simpson over [-1, 1] and random subintervals against the
    // antiderivative 0.75 (u − u³/3).
    let simpson = |a: f64, b: f64| {
        let steps = 2000;
        let h = (b - a) / steps as f64;
        let mut s = epanechnikov(a) + epanechnikov(b);
        for k in 1..steps {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * epanechnikov(a + k as f64 * h);
        }
        s * h / 3.0
    };
    let whole = simpson(-1.0, 1.0);
    ensure((whole - 1.0).abs() <= 1e-6, || {
        format!("∫K over [-1, 1] = {whole}")
    })?;
    check(100, (-1.0f64..1.0, -1.0f64..1.0), |(a, b)| {
        let (a, b) = (a.min(b), a.max(b));
        let exact = |u: f64| 0.75 * (u - u * u * u / 3.0);
        let q = simpson(a, b);
        prop_assert!((q - (exact(b) - exact(a))).abs() <= 1e-9, "[{a}, {b}]: {q}");
        Ok(())
    })
}

pub fn krd_matches_oracle() -> Result<(), String> {
    check(
        300,
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 1..40),
        |residuals| {
            let (profile, d) = krd_row(&residuals);
            let oracle = krd_oracle(&residuals);
            for j in 0..residuals.len() {
                prop_assert!(
                    close(d[j], oracle[j], 1e-12),
                    "point {j}: {} vs {}",
                    d[j],
                    oracle[j]
                );
            }
            let sorted = kernel_residual_density_sorted(&profile.rho);
            for (pos, &j) in profile.order.iter().enumerate() {
                prop_assert_eq!(sorted[pos], d[j]);
            }
            Ok(())
        },
    )
}

/// KRD of 100 random 20-point profiles against the oracle within 1e-12.
pub fn krd_oracle_equivalence() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let residuals: Vec<f64> = (0..20)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    scale * rng.random::<f64>()
                }
            })
            .collect();
        let (_, d) = krd_row(&residuals);
        for (a, b) in d.iter().zip(krd_oracle(&residuals)) {
            worst = worst.max((a - b).abs() / 1f64.max(b.abs()));
        }
    }
    ensure(worst <= 1e-12, || format!("worst relative error {worst:e}"))
}

pub fn krd_is_permutation_invariant() -> Result<(), String> {
    check(
        300,
        (prop::collection::vec(0.0f64..3.0, 1..50), any::<u64>()),
        |(residuals, seed)| {
            let mut perm: Vec<usize> = (0..residuals.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<f64> = perm.iter().map(|&i| residuals[i]).collect();
            let (_, d) = krd_row(&residuals);
            let (_, ds) = krd_row(&shuffled);
            for (pos, &i) in perm.iter().enumerate() {
                prop_assert_eq!(ds[pos].to_bits(), d[i].to_bits());
            }
            let (_, f) = krd_row_floored(&residuals, residuals.len().min(5));
            let (_, fs) = krd_row_floored(&shuffled, residuals.len().min(5));
            for (pos, &i) in perm.iter().enumerate() {
                prop_assert_eq!(fs[pos].to_bits(), f[i].to_bits());
            }
            Ok(())
        },
    )
}

pub fn near_zero_cluster_is_denser() -> Result<(), String> {
    check(
        300,
        (
            prop::collection::vec(0.0f64..1e-3, 1..20),
            prop::collection::vec(0.0f64..0.5, 1..20),
            1.0f64..10.0,
        ),
        |(near, far, offset)| {
            let far: Vec<f64> = far.iter().map(|w| offset * (1.0 + w)).collect();
            let all: Vec<f64> = near.iter().chain(&far).copied().collect();
            let (_, d) = krd_row(&all);
            let min_near = d[..near.len()]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let max_far = d[near.len()..].iter().copied().fold(0.0, f64::max);
            prop_assert!(min_near > max_far, "{min_near} <= {max_far}");
            Ok(())
        },
    )
}

pub fn point_correlation_is_symmetric_with_unit_self() -> Result<(), String> {
    check(300, (1usize..8, any::<u64>()), |(t, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<usize> = (0..2 * t + 2).collect();
        pool.shuffle(&mut rng);
        let a = pool[..t].to_vec();
        pool.shuffle(&mut rng);
        let b = pool[..t].to_vec();
        let ab = point_correlation(&a, &b, t);
        prop_assert_eq!(ab, point_correlation(&b, &a, t));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(point_correlation(&a, &a, t), 1.0);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// kdgs-sampler

pub fn correlation_matrix_stays_symmetric() -> Result<(), String> {
    check(
        100,
        (2usize..25, 1usize..6, any::<u64>()),
        |(n, t, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = vec![vec![1.0; n]; n];
            for _round in 0..4 {
                let m = rng.random_range(t..t + 10);
                let rows: Vec<Vec<f64>> = (0..m)
                    .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                    .collect();
                let top: Vec<Vec<usize>> = (0..n).map(|j| top_preferences(&rows, j, t)).collect();
                let nu: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
                refresh_correlation_rows(&mut c, &top, &nu, t);
                for j in 0..n {
                    prop_assert_eq!(c[j][j], 1.0);
                    for k in 0..n {
                        prop_assert_eq!(c[j][k], c[k][j]);
                        prop_assert!((0.0..=1.0).contains(&c[j][k]));
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn minimal_sample_starts_with_seed_point() -> Result<(), String> {
    check(
        300,
        (3usize..30, 2usize..9, any::<u64>()),
        |(n, eta, seed)| {
            let eta = eta.min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = rng.random_range(0..n);
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random()
                    }
                })
                .collect();
            let mss = sample_mss(j, &c, &s, eta, &mut rng);
            prop_assert_eq!(mss[0], j);
            prop_assert_eq!(mss.len(), eta);
            let distinct: BTreeSet<usize> = mss.iter().copied().collect();
            prop_assert_eq!(distinct.len(), eta);
            Ok(())
        },
    )
}

pub fn sampling_follows_the_pmf() -> Result<(), String> {
    // Second member of a two-point sample is drawn with probability ∝ c ⊙ s.
    let c = [1.0, 0.5, 1.0, 0.25, 1.0];
    let s = [0.3, 0.2, 0.0, 0.4, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 40_000;
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[sample_mss(2, &c, &s, 2, &mut rng)[1]] += 1;
    }
    let w: Vec<f64> = (0..5)
        .map(|k| if k == 2 { 0.0 } else { c[k] * s[k] })
        .collect();
    let total: f64 = w.iter().sum();
    for k in 0..5 {
        let p = w[k] / total;
        let freq = counts[k] as f64 / draws as f64;
        // Five standard errors.
        let tol = 5.0 * (p * (1.0 - p) / draws as f64).sqrt() + 1e-12;
        ensure((freq - p).abs() <= tol, || {
            format!("point {k}: frequency {freq} vs probability {p}")
        })?;
    }
    Ok(())
}

pub fn retained_hypotheses_are_top_preferences() -> Result<(), String> {
    check(6, any::<u64>(), |seed| {
        let data = two_lines(seed);
        let config = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        let beta = config.beta_for(2);
        let out = run_kdgs(&data, &config);
        let scaled: Vec<Vec<f64>> = out
            .all_hypotheses
            .iter()
            .map(|h| scale_density_row(&krd_row_floored(&h.residual_vector(&data), beta).1, beta))
            .collect();
        let mut top: BTreeSet<usize> = BTreeSet::new();
        for j in 0..data.len() {
            let best = (0..scaled.len())
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if scaled[b][j] >= scaled[i][j] => Some(b),
                    _ => Some(i),
                })
                .unwrap();
            top.insert(best);
        }
        let expected: Vec<&Vec<usize>> = top.iter().map(|&i| &out.all_hypotheses[i].mss).collect();
        let got: Vec<&Vec<usize>> = out.store.hypotheses.iter().map(|h| &h.mss).collect();
        prop_assert_eq!(got, expected);
        Ok(())
    })
}

pub fn sampler_is_deterministic() -> Result<(), String> {
    check(4, any::<u64>(), |seed| {
        let data = two_lines(seed ^ 0x5eed);
        let config = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        let a = run_kdgs(&data, &config);
        let b = run_kdgs(&data, &config);
        prop_assert_eq!(&a.all_hypotheses, &b.all_hypotheses);
        prop_assert_eq!(&a.store.hypotheses, &b.store.hypotheses);
        prop_assert_eq!(&a.store.residuals, &b.store.residuals);
        prop_assert_eq!(&a.store.densities, &b.store.densities);
        prop_assert_eq!(&a.nu_history, &b.nu_history);
        Ok(())
    })
}

pub fn termination_leaves_every_point_explained() -> Result<(), String> {
    check(6, any::<u64>(), |seed| {
        let data = two_lines(seed);
        let out = run_kdgs(
            &data,
            &SamplerConfig {
                seed,
                ..SamplerConfig::default()
            },
        );
        if out.budget_exceeded {
            return Ok(());
        }
        prop_assert_eq!(out.nu_history.last().copied(), Some(0));
        let last = out.tau_history.len() - 1;
        for j in 0..data.len() {
            let flat = last > 0 && out.tau_history[last][j] == out.tau_history[last - 1][j];
            prop_assert!(
                out.final_theta_sizes[j] > 0 || flat,
                "point {j} has no potential hypothesis"
            );
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// scale-estimation

pub fn sigma_hat_is_scale_equivariant() -> Result<(), String> {
    check(
        300,
        (prop::collection::vec(0.0f64..2.0, 2..60), 1e-3f64..1e3),
        |(mut rho, c)| {
            rho.sort_by(f64::total_cmp);
            let t = rho.len() / 2 + 1;
            let s = estimate_noise_scale(&rho, t);
            let scaled: Vec<f64> = rho.iter().map(|r| c * r).collect();
            let sc = estimate_noise_scale(&scaled, t);
            prop_assert!(close(sc, c * s, 1e-9), "{sc} vs {}", c * s);
            Ok(())
        },
    )
}

pub fn fraction_is_rescaling_invariant() -> Result<(), String> {
    // Power-of-two factors keep every intermediate quantity exactly scaled.
    check(
        200,
        (prop::collection::vec(0.0f64..2.0, 40..80), -10i32..10),
        |(residuals, k)| {
            let c = 2f64.powi(k);
            let scaled: Vec<f64> = residuals.iter().map(|r| c * r).collect();
            let f = |r: &[f64]| {
                let (p, d) = krd_row(r);
                estimate_inlier_fraction(&d, &p, 2, 15)
            };
            prop_assert_eq!(f(&residuals).unwrap(), f(&scaled).unwrap());
            Ok(())
        },
    )
}

/// σ̂ of the best hypothesis on a single noisy line lies within a factor of
/// two of `1.4826 · median |r|` over the true inliers, on 10 seeds.
pub fn sigma_hat_matches_robust_oracle() -> Result<(), String> {
    for seed in 0..10u64 {
        let spec = SyntheticSpec {
            structures: vec![Structure::Segment {
                from: [-1.0, -0.5],
                to: [1.0, 0.5],
                inliers: 100,
            }],
            sigma: 0.01,
            outlier_fraction: 0.5,
            bbox: BoundingBox::square(1.0),
            seed,
        };
        let data = generate_synthetic(&spec).unwrap();
        let config = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        let beta = config.beta_for(2);
        let out = run_kdgs(&data, &config);
        let cands = evaluate_candidates(&out.store, FractionEstimatorKind::default(), 2, beta)
            .map_err(|e| e.to_string())?;
        let best = (0..cands.len())
            .max_by(|&a, &b| cands[a].goodness.total_cmp(&cands[b].goodness))
            .ok_or("no hypotheses")?;
        let labels = data.gt_labels().unwrap();
        let mut r: Vec<f64> = out.store.residuals[best]
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(r, _)| *r)
            .collect();
        r.sort_by(f64::total_cmp);
        let oracle = 1.4826 * r[r.len() / 2];
        let sigma = cands[best].scale.sigma_hat;
        ensure(sigma >= 0.5 * oracle && sigma <= 2.0 * oracle, || {
            format!("seed {seed}: sigma_hat {sigma} vs oracle {oracle}")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model-selection

fn random_similarity(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let mut b = vec![vec![false; m]; m];
    for i in 0..m {
        b[i][i] = true;
        for k in i + 1..m {
            let v = rng.random_bool(0.3);
            b[i][k] = v;
            b[k][i] = v;
        }
    }
    b
}

pub fn greedy_selection_invariants() -> Result<(), String> {
    check(300, (1usize..12, any::<u64>()), |(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(0..5) as f64).collect();
        let b = random_similarity(m, &mut rng);
        let sel = greedy_select(&g, &b);
        prop_assert!(!sel.is_empty() && sel.len() <= m);
        for (a, &i) in sel.iter().enumerate() {
            for &k in &sel[..a] {
                prop_assert!(!b[k][i], "{i} selected after similar {k}");
                prop_assert!(g[k] >= g[i]);
            }
        }
        for i in 0..m {
            prop_assert!(
                sel.iter().any(|&k| k == i || b[k][i]),
                "{i} discarded without cause"
            );
        }
        Ok(())
    })
}

fn random_lists(m: usize, n: usize, rng: &mut ChaCha8Rng) -> InlierLists {
    let orders = (0..m)
        .map(|_| {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(rng);
            o
        })
        .collect();
    let counts = (0..m).map(|_| rng.random_range(1..=n)).collect();
    InlierLists::new(orders, counts)
}

pub fn footrule_correlation_is_bounded() -> Result<(), String> {
    check(
        200,
        (1usize..10, 2usize..30, any::<u64>()),
        |(m, n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sim = build_similarity(&random_lists(m, n, &mut rng), 0.5);
            for i in 0..m {
                prop_assert_eq!(sim.z[i][i], 1.0);
                for k in 0..m {
                    prop_assert!((0.0..=1.0).contains(&sim.z[i][k]));
                    prop_assert_eq!(sim.z[i][k], sim.z[k][i]);
                    prop_assert_eq!(sim.b[i][k], sim.z[i][k] >= 0.5);
                }
            }
            Ok(())
        },
    )
}

fn random_psd(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    (0..m).map(|l| a[i][l] * a[k][l]).sum::<f64>() + if i == k { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

fn qp_objective(g: &[f64], q: &[Vec<f64>], lambda: f64, y: &[f64]) -> f64 {
    let m = g.len();
    let mut f = 0.0;
    for i in 0..m {
        f += g[i] * y[i];
        for k in 0..m {
            f -= lambda * y[i] * q[i][k] * y[k];
        }
    }
    f
}

pub fn qp_iterates_stay_feasible_and_improve() -> Result<(), String> {
    check(200, (1usize..10, any::<u64>()), |(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
        // Indefinite matrices too: the solver only needs a monotone ascent.
        let q: Vec<Vec<f64>> = if rng.random_bool(0.5) {
            random_psd(m, &mut rng)
        } else {
            let mut q = vec![vec![0.0; m]; m];
            for i in 0..m {
                for k in i..m {
                    let v = rng.random_range(-1.0..1.0);
                    q[i][k] = v;
                    q[k][i] = v;
                }
            }
            q
        };
        let y0: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let opts = QpOptions {
            record_trace: true,
            ..QpOptions::default()
        };
        let sol = solve_box_qp(&g, &q, 1.0, &y0, &opts).unwrap();
        prop_assert!(sol.y.iter().all(|v| (0.0..=1.0).contains(v)));
        for w in sol.trace.windows(2) {
            prop_assert!(w[1] >= w[0], "objective decreased {} -> {}", w[0], w[1]);
        }
        prop_assert!(close(
            sol.objective,
            qp_objective(&g, &q, 1.0, &sol.y),
            1e-9
        ));
        Ok(())
    })
}

pub fn penalty_scales_quadratically_with_goodness() -> Result<(), String> {
    check(
        200,
        (1usize..10, 0.01f64..100.0, any::<u64>()),
        |(m, c, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut z = vec![vec![1.0; m]; m];
            for i in 0..m {
                for k in i + 1..m {
                    let v = rng.random::<f64>();
                    z[i][k] = v;
                    z[k][i] = v;
                }
            }
            let g: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
            let gc: Vec<f64> = g.iter().map(|v| c * v).collect();
            let p = build_penalty(&z, &g);
            let pc = build_penalty(&z, &gc);
            prop_assert_eq!(&p.root, &pc.root);
            for i in 0..m {
                prop_assert!(
                    close(pc.diag[i], c * c * p.diag[i], 1e-12),
                    "{} vs {}",
                    pc.diag[i],
                    c * c * p.diag[i]
                );
            }
            Ok(())
        },
    )
}

/// Groups of hypotheses that correlate strongly within a group (z in
/// [0.9, 1)) and below `cross` across groups; returns
/// `(group of each hypothesis, z, g)`.
fn separated_instance(rng: &mut ChaCha8Rng, cross: f64) -> (Vec<usize>, Vec<Vec<f64>>, Vec<f64>) {
    let groups = rng.random_range(2..5);
    let group: Vec<usize> = (0..groups)
        .flat_map(|k| std::iter::repeat_n(k, rng.random_range(1..5)))
        .collect();
    let m = group.len();
    let mut z = vec![vec![1.0; m]; m];
    for i in 0..m {
        for k in i + 1..m {
            let v = if group[i] == group[k] {
                rng.random_range(0.9..1.0)
            } else if cross > 0.0 {
                rng.random_range(0.0..cross)
            } else {
                0.0
            };
            z[i][k] = v;
            z[k][i] = v;
        }
    }
    let g = (0..m).map(|_| rng.random_range(1.0..10.0)).collect();
    (group, z, g)
}

/// Both selectors pick exactly one hypothesis per group, the QP along the
/// same path as the optimal pipeline variant.
fn selectors_cover_groups(cross: f64) -> Result<(), String> {
    let config = PipelineConfig::default();
    check(300, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (group, z, g) = separated_instance(&mut rng, cross);
        let groups = group.iter().max().unwrap() + 1;
        let b: Vec<Vec<bool>> = z
            .iter()
            .map(|row| row.iter().map(|&v| v >= config.delta).collect())
            .collect();
        let per_group = |sel: &[usize]| {
            let mut c = vec![0; groups];
            for &i in sel {
                c[group[i]] += 1;
            }
            c
        };
        let greedy = greedy_select(&g, &b);
        prop_assert_eq!(per_group(&greedy), vec![1; groups]);

        let penalty = build_penalty(&z, &g);
        let q = assemble_q(&z, &penalty, &g);
        let opts = QpOptions {
            max_iterations: config.qp_max_iterations,
            tolerance: config.qp_tolerance,
            record_trace: false,
        };
        let sol = solve_box_qp(&g, &q, config.lambda, &vec![0.5; g.len()], &opts).unwrap();
        let picked = suppress_correlated(&qp_select(&sol.y, config.pi), &sol.y, &b);
        prop_assert_eq!(
            per_group(&picked),
            vec![1; groups],
            "g = {:?}, y = {:?}",
            g,
            sol.y
        );
        Ok(())
    })
}

/// Cross-group correlation anywhere below the similarity threshold.
pub fn greedy_and_qp_cover_separated_groups() -> Result<(), String> {
    selectors_cover_groups(PipelineConfig::default().delta)
}

/// Structures with disjoint inlier lists, whose footrule correlation is 0.
pub fn greedy_and_qp_cover_disjoint_groups() -> Result<(), String> {
    selectors_cover_groups(0.0)
}

// ---------------------------------------------------------------------------
// pipeline-assign

pub fn fit_result_invariants() -> Result<(), String> {
    check(6, (any::<u64>(), any::<bool>()), |(seed, optimal)| {
        let data = two_lines(seed);
        let mut config = PipelineConfig {
            variant: if optimal {
                Variant::Optimal
            } else {
                Variant::Greedy
            },
            ..PipelineConfig::default()
        };
        config.sampler.seed = seed;
        let fit = run_dgsac(&data, &config).unwrap();
        let n = data.len();
        let k = fit.selected.len();
        prop_assert_eq!(fit.labels.len(), n);
        prop_assert!(k <= fit.diagnostics.hypotheses_retained);
        prop_assert!(fit.diagnostics.hypotheses_retained <= n);
        let mut owner = vec![0usize; n];
        for (s, model) in fit.selected.iter().enumerate() {
            for &j in &model.inliers {
                prop_assert_eq!(owner[j], 0, "point {} in two structures", j);
                owner[j] = s + 1;
                prop_assert!(model.estimated_inliers.contains(&j));
            }
        }
        prop_assert_eq!(&owner, &fit.labels);
        prop_assert!(fit.labels.iter().all(|&l| l <= k));

        let again = run_dgsac(&data, &config).unwrap();
        prop_assert_eq!(&again.labels, &fit.labels);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// cli-harness

pub fn accuracy_ignores_structure_ids() -> Result<(), String> {
    check(
        300,
        (1usize..60, 1usize..6, any::<u64>()),
        |(n, k, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt: Vec<usize> = (0..n).map(|_| rng.random_range(0..=k)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..=k)).collect();
            let mut ids: Vec<usize> = (1..=k).collect();
            ids.shuffle(&mut rng);
            let renamed: Vec<usize> = pred
                .iter()
                .map(|&l| if l == 0 { 0 } else { ids[l - 1] })
                .collect();
            let a = classification_accuracy(&pred, &gt);
            prop_assert!(close(a, classification_accuracy(&renamed, &gt), 1e-12));
            prop_assert!((0.0..=100.0).contains(&a));
            Ok(())
        },
    )
}

pub fn dataset_text_round_trip_is_bit_exact() -> Result<(), String> {
    let coord = prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ];
    check(
        300,
        (
            0..5usize,
            prop::collection::vec(prop::collection::vec(coord, 4), 9..30),
            any::<bool>(),
        ),
        |(k, rows, labelled)| {
            let kind = ModelKind::ALL[k];
            let dim = kind.point_dim();
            let points: Vec<DataPoint> = rows
                .iter()
                .map(|r| DataPoint::new(r[..dim].to_vec()))
                .collect();
            let labels = labelled.then(|| (0..points.len()).map(|j| j % 3).collect());
            let data = Dataset::new(kind, points, labels).unwrap();
            let back = parse_dataset(&format_dataset(&data), kind).unwrap();
            for (a, b) in data.points().iter().zip(back.points()) {
                for (x, y) in a.coords().iter().zip(b.coords()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(data.gt_labels(), back.gt_labels());
            Ok(())
        },
    )
}

pub fn baselines_respect_the_budget() -> Result<(), String> {
    let data = two_lines(1);
    let budget = Duration::from_millis(200);
    for method in ["uniform", "residual-preference"] {
        for seed in 0..2u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = Instant::now();
            let hypotheses = if method == "uniform" {
                uniform_sampler(&data, budget, &mut rng)
            } else {
                residual_preference_sampler(&data, budget, &mut rng)
            };
            let used = start.elapsed().as_secs_f64();
            let generated = hypotheses.len();
            let b = budget.as_secs_f64();
            ensure(generated > 0 && (used - b).abs() <= 0.05 * b, || {
                format!("{method}: {used:.4}s for a {b:.3}s budget ({generated} hypotheses)")
            })?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracle suite

/// Footrule distance from explicit 1-based rank maps, missing elements at
/// rank `t + 1`.
pub fn footrule_oracle(a: &[usize], b: &[usize]) -> f64 {
    let t = a.len();
    let rank = |l: &[usize], x: usize| l.iter().position(|&y| y == x).map_or(t + 1, |p| p + 1);
    let union: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    union
        .into_iter()
        .map(|x| rank(a, x).abs_diff(rank(b, x)))
        .sum::<usize>() as f64
}

fn ordered_lists(universe: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|l: Vec<usize>| {
                (0..universe)
                    .filter(|x| !l.contains(x))
                    .map(|x| {
                        let mut n = l.clone();
                        n.push(x);
                        n
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

/// Every pair of ordered top-`t` lists for `t ≤ 4`. A pair uses at most `2t`
/// distinct elements, so lists over `2t` symbols cover every overlap pattern.
pub fn footrule_exhaustive() -> Result<(), String> {
    let mut pairs = 0usize;
    for t in 1..=4 {
        let lists = ordered_lists(2 * t, t);
        for a in &lists {
            for b in &lists {
                let (sf, z) = spearman_footrule(a, b);
                let oracle = footrule_oracle(a, b);
                let z_oracle = 1.0 - oracle / (t * (t + 1)) as f64;
                ensure(sf == oracle && (z - z_oracle).abs() <= 1e-15, || {
                    format!("{a:?} vs {b:?}: ({sf}, {z}) against ({oracle}, {z_oracle})")
                })?;
                pairs += 1;
            }
        }
    }
    ensure(pairs > 0, || "no pairs".into())
}

/// Exact maximiser by enumerating every face of the box: each coordinate is
/// pinned at 0, pinned at 1, or free, and the free block solves its
/// stationarity equations. The optimum lies on one of these faces.
fn qp_face_max(g: &[f64], q: &[Vec<f64>], lambda: f64) -> f64 {
    let m = g.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0u8; m];
        let mut rem = code;
        for s in state.iter_mut() {
            *s = (rem % 3) as u8;
            rem /= 3;
        }
        let mut y: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { 1.0 } else { 0.0 })
            .collect();
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        if !free.is_empty() {
            let k = free.len();
            let a = DMatrix::from_fn(k, k, |r, c| {
                lambda * (q[free[r]][free[c]] + q[free[c]][free[r]])
            });
            let rhs = DVector::from_fn(k, |r, _| {
                let i = free[r];
                g[i] - (0..m)
                    .filter(|l| state[*l] != 2)
                    .map(|l| lambda * (q[i][l] + q[l][i]) * y[l])
                    .sum::<f64>()
            });
            let Some(sol) = a.lu().solve(&rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                y[i] = sol[r];
            }
            if y.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
                continue;
            }
        }
        best = best.max(qp_objective(g, q, lambda, &y));
    }
    best
}

/// Best objective over the uniform grid with spacing `1 / steps`.
fn qp_grid_max(g: &[f64], q: &[Vec<f64>], lambda: f64, steps: usize) -> f64 {
    let m = g.len();
    let mut best = f64::NEG_INFINITY;
    let mut y = vec![0.0; m];
    for idx in 0..(steps + 1).pow(m as u32) {
        let mut rem = idx;
        for v in y.iter_mut() {
            *v = (rem % (steps + 1)) as f64 / steps as f64;
            rem /= steps + 1;
        }
        best = best.max(qp_objective(g, q, lambda, &y));
    }
    best
}

/// Box QP on random concave instances with `m ≤ 3`: within 1e-6 of exact
/// face enumeration, and never below the best point of a fine grid.
pub fn qp_matches_exact_and_grid() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for case in 0..60 {
        let m = 1 + case % 3;
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..4.0)).collect();
        let q = random_psd(m, &mut rng);
        let lambda = rng.random_range(0.2..2.0);
        let opts = QpOptions {
            tolerance: 1e-10,
            max_iterations: 100_000,
            ..QpOptions::default()
        };
        let sol = solve_box_qp(&g, &q, lambda, &vec![0.5; m], &opts).map_err(|e| e.to_string())?;
        let exact = qp_face_max(&g, &q, lambda);
        ensure((sol.objective - exact).abs() <= 1e-6, || {
            format!("case {case}: solver {} vs exact {exact}", sol.objective)
        })?;
        let steps = if m < 3 { 1000 } else { 100 };
        let grid = qp_grid_max(&g, &q, lambda, steps);
        ensure(sol.objective >= grid - 1e-9, || {
            format!("case {case}: solver {} below grid {grid}", sol.objective)
        })?;
    }
    Ok(())
}

/// Hand-written greedy trace: walk hypotheses by decreasing goodness (ties
/// to the smaller index), keeping one unless a kept one already covers it.
pub fn greedy_trace(g: &[f64], b: &[Vec<bool>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &k| g[k].total_cmp(&g[i]).then(i.cmp(&k)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&k| b[k][i]) {
            kept.push(i);
        }
    }
    kept
}

/// Greedy selection against manual traces on 20 random instances, m ≤ 8.
pub fn greedy_matches_manual_traces() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..20 {
        let m = rng.random_range(1..=8);
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(0..4) as f64).collect();
        let b = random_similarity(m, &mut rng);
        let got = greedy_select(&g, &b);
        let want = greedy_trace(&g, &b);
        ensure(got == want, || {
            format!("case {case}: {got:?} vs trace {want:?}")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// Every invariant, by name.
pub const INVARIANTS: &[(&str, Check)] = &[
    (
        "residuals nonnegative and finite",
        residuals_are_nonnegative_and_finite,
    ),
    (
        "minimal fit passes through its sample",
        minimal_fit_passes_through_its_sample,
    ),
    (
        "two-view normalization invariance",
        two_view_fits_agree_with_and_without_normalization,
    ),
    ("synthetic label counts", synthetic_label_counts_match),
    ("kernel quadrature", kernel_quadrature),
    ("KRD matches oracle", krd_matches_oracle),
    ("KRD permutation invariance", krd_is_permutation_invariant),
    ("near-zero cluster is denser", near_zero_cluster_is_denser),
    (
        "point correlation symmetry and self",
        point_correlation_is_symmetric_with_unit_self,
    ),
    (
        "correlation matrix symmetry and bounds",
        correlation_matrix_stays_symmetric,
    ),
    (
        "minimal sample starts with seed point",
        minimal_sample_starts_with_seed_point,
    ),
    (
        "sampling frequencies follow the PMF",
        sampling_follows_the_pmf,
    ),
    (
        "retained hypotheses are top preferences",
        retained_hypotheses_are_top_preferences,
    ),
    ("sampler determinism", sampler_is_deterministic),
    (
        "termination leaves points explained",
        termination_leaves_every_point_explained,
    ),
    (
        "sigma_hat scale equivariance",
        sigma_hat_is_scale_equivariant,
    ),
    (
        "fraction rescaling invariance",
        fraction_is_rescaling_invariant,
    ),
    (
        "sigma_hat vs robust oracle",
        sigma_hat_matches_robust_oracle,
    ),
    ("greedy selection invariants", greedy_selection_invariants),
    (
        "footrule correlation bounds",
        footrule_correlation_is_bounded,
    ),
    (
        "QP box feasibility and monotone objective",
        qp_iterates_stay_feasible_and_improve,
    ),
    (
        "penalty scales with goodness squared",
        penalty_scales_quadratically_with_goodness,
    ),
    (
        "greedy and QP cover separated groups",
        greedy_and_qp_cover_separated_groups,
    ),
    (
        "greedy and QP cover disjoint groups",
        greedy_and_qp_cover_disjoint_groups,
    ),
    (
        "FitResult disjointness and determinism",
        fit_result_invariants,
    ),
    (
        "accuracy ignores structure ids",
        accuracy_ignores_structure_ids,
    ),
    (
        "dataset text round trip",
        dataset_text_round_trip_is_bit_exact,
    ),
    ("baselines respect the budget", baselines_respect_the_budget),
];

pub const ORACLES: &[(&str, Check)] = &[
    (
        "KRD vs brute force on 100 random 20-point profiles",
        krd_oracle_equivalence,
    ),
    (
        "Spearman footrule vs exhaustive enumeration, t <= 4",
        footrule_exhaustive,
    ),
    (
        "box QP vs face enumeration and grid search, m <= 3",
        qp_matches_exact_and_grid,
    ),
    (
        "greedy vs manual traces on 20 instances, m <= 8",
        greedy_matches_manual_traces,
    ),
];
