//! Compares KDGS with the uniform and residual-preference baselines on a
//! synthetic preset under equal wall-clock budgets.
//!
//! Usage: `sampler_bench [star5|circle5] [TRIALS] [SEED]`

use dgsac::bench::{sampler_benchmark, BenchOptions, SamplerMethod};
use dgsac::geometry::synthetic::{generate_synthetic, SyntheticSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map_or("star5", String::as_str);
    let trials = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = match preset {
        "circle5" => SyntheticSpec::circle5(seed),
        _ => SyntheticSpec::star5(seed),
    };
    let data = generate_synthetic(&spec).expect("valid preset");
    let options = BenchOptions {
        seed,
        ..BenchOptions::default()
    };
    let report = sampler_benchmark(&data, &SamplerMethod::ALL, trials, &options).expect("bench");
    for trial in &report.trials {
        for m in &trial.methods {
            println!(
                "seed={} {:<20} #H={:6} #HM={:6.2}% #HI={:6.2}% time={:.3}s (budget {:.3}s) hi/structure={:?}",
                trial.seed,
                m.method,
                m.hypotheses,
                m.hm_percent,
                m.hi_percent,
                m.seconds,
                trial.budget_seconds,
                m.structure_hi
            );
        }
    }
    for s in &report.summary {
        println!(
            "SUMMARY {preset} {:<20} #H={:8.1} #HM={:6.2}% #HI={:6.2}% coverage={:6.2}% time={:.3}s",
            s.method, s.hypotheses, s.hm_percent, s.hi_percent, s.hi_coverage_percent, s.seconds
        );
    }
}
