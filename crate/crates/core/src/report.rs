//! Run and benchmark reports as TOML documents, and plot-data export.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::bench::{BenchOptions, SamplerBenchReport};
use crate::error::{Error, Result};
use crate::eval::classification_accuracy;
use crate::geometry::synthetic::SyntheticSpec;
use crate::geometry::{Dataset, ModelKind};
use crate::pipeline::{FitResult, PipelineConfig, SolverStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub model: ModelKind,
    pub n: usize,
    /// Number of true structures, when ground truth is known.
    pub structures: Option<usize>,
    pub outlier_percent: Option<f64>,
}

impl DatasetSummary {
    pub fn of(dataset: &Dataset) -> Self {
        Self {
            model: dataset.kind(),
            n: dataset.len(),
            structures: dataset.num_structures(),
            outlier_percent: dataset.outlier_fraction().map(|f| 100.0 * f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Point label of this structure (1-based).
    pub label: usize,
    pub params: Vec<f64>,
    pub mss: Vec<usize>,
    pub assigned: usize,
    pub estimated_inliers: usize,
    pub sigma_hat: f64,
    pub inlier_fraction: f64,
    pub goodness: f64,
    pub sorted_residuals: Vec<f64>,
    pub sorted_density: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sampling_seconds: f64,
    pub selection_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub sampler_iterations: usize,
    pub sampler_budget_exceeded: bool,
    pub hypotheses_generated: usize,
    pub hypotheses_retained: usize,
    pub hypotheses_offered: usize,
    pub truncated_goodness: usize,
    pub solver: Option<SolverStats>,
    /// `|ν|` before the first sampler round and after each round.
    pub nu_history: Vec<usize>,
    /// Explanation score of every point after each round.
    pub tau_history: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    /// Classification accuracy in percent, when ground truth is known.
    pub ca_percent: Option<f64>,
    pub timings: Timings,
    pub diagnostics: RunDiagnostics,
    pub structures: Vec<StructureReport>,
    /// Label of every point (0 = outlier).
    pub labels: Vec<usize>,
}

impl RunReport {
    pub fn new(config: &PipelineConfig, dataset: &Dataset, fit: &FitResult) -> Self {
        let d = &fit.diagnostics;
        Self {
            config: config.clone(),
            dataset: DatasetSummary::of(dataset),
            ca_percent: dataset
                .gt_labels()
                .map(|gt| classification_accuracy(&fit.labels, gt)),
            timings: Timings {
                sampling_seconds: d.sampling_seconds,
                selection_seconds: d.selection_seconds,
                total_seconds: d.total_seconds,
            },
            diagnostics: RunDiagnostics {
                sampler_iterations: d.sampler_iterations,
                sampler_budget_exceeded: d.sampler_budget_exceeded,
                hypotheses_generated: d.hypotheses_generated,
                hypotheses_retained: d.hypotheses_retained,
                hypotheses_offered: d.hypotheses_offered,
                truncated_goodness: d.truncated_goodness,
                solver: d.solver.clone(),
                nu_history: d.nu_history.clone(),
                tau_history: d.tau_history.clone(),
            },
            structures: fit
                .selected
                .iter()
                .enumerate()
                .map(|(k, s)| StructureReport {
                    label: k + 1,
                    params: s.hypothesis.params(),
                    mss: s.hypothesis.mss.clone(),
                    assigned: s.inliers.len(),
                    estimated_inliers: s.estimated_inliers.len(),
                    sigma_hat: s.sigma_hat,
                    inlier_fraction: s.inlier_fraction,
                    goodness: s.goodness,
                    sorted_residuals: s.sorted_residuals.clone(),
                    sorted_density: s.sorted_density.clone(),
                })
                .collect(),
            labels: fit.labels.clone(),
        }
    }
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(format!("cannot serialize report: {e}")))
}

fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })
}

/// TOML (de)serialization shared by the report types.
pub trait TomlDocument: Serialize + DeserializeOwned {
    fn to_toml_string(&self) -> Result<String> {
        to_toml(self)
    }

    fn from_toml_str(text: &str) -> Result<Self> {
        from_toml(text)
    }

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

impl TomlDocument for RunReport {}
impl TomlDocument for SamplerBenchReport {}
impl TomlDocument for PipelineConfig {}
impl TomlDocument for BenchOptions {}
impl TomlDocument for SyntheticSpec {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlotKind {
    /// Sorted residuals against raw KRD, one file per selected structure.
    DensityProfile,
    NuVsIteration,
    /// Long format: one row per (iteration, point).
    TauVsIteration,
    /// Point coordinates and assigned label.
    LabeledScatter,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::DensityProfile,
        PlotKind::NuVsIteration,
        PlotKind::TauVsIteration,
        PlotKind::LabeledScatter,
    ];
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::DensityProfile => "density-profile",
            PlotKind::NuVsIteration => "nu-vs-iteration",
            PlotKind::TauVsIteration => "tau-vs-iteration",
            PlotKind::LabeledScatter => "labeled-scatter",
        })
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown plot kind `{s}`")))
    }
}

fn coordinate_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Line | ModelKind::Circle => &["x", "y"],
        ModelKind::Plane => &["x", "y", "z"],
        ModelKind::Homography | ModelKind::Fundamental => &["x1", "y1", "x2", "y2"],
    }
}

/// Writes the plot data of `kind` into `out_dir` and returns the files
/// written. Every file is whitespace-separated numeric columns under a single
/// `# `-prefixed header line. `dataset` is only needed for the labelled
/// scatter.
pub fn emit_plot_data(
    report: &RunReport,
    dataset: Option<&Dataset>,
    kind: PlotKind,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let files: Vec<(String, String)> = match kind {
        PlotKind::DensityProfile => {
            if report.structures.is_empty() {
                return Err(Error::UnavailableDiagnostic(
                    "the run selected no structures".into(),
                ));
            }
            report
                .structures
                .iter()
                .map(|s| {
                    let mut text = String::from("# rank residual density\n");
                    for (i, (r, d)) in s.sorted_residuals.iter().zip(&s.sorted_density).enumerate()
                    {
                        let _ = writeln!(text, "{} {r:?} {d:?}", i + 1);
                    }
                    (format!("density_profile_{}.dat", s.label), text)
                })
                .collect()
        }
        PlotKind::NuVsIteration => {
            let nu = &report.diagnostics.nu_history;
            if nu.is_empty() {
                return Err(Error::UnavailableDiagnostic("no ν history recorded".into()));
            }
            let mut text = String::from("# iteration nu\n");
            for (i, v) in nu.iter().enumerate() {
                let _ = writeln!(text, "{i} {v}");
            }
            vec![("nu_vs_iteration.dat".into(), text)]
        }
        PlotKind::TauVsIteration => {
            let tau = &report.diagnostics.tau_history;
            if tau.is_empty() {
                return Err(Error::UnavailableDiagnostic("no τ history recorded".into()));
            }
            let mut text = String::from("# iteration point tau\n");
            for (i, row) in tau.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let _ = writeln!(text, "{} {j} {v:?}", i + 1);
                }
            }
            vec![("tau_vs_iteration.dat".into(), text)]
        }
        PlotKind::LabeledScatter => {
            let data = dataset.ok_or_else(|| {
                Error::UnavailableDiagnostic("labelled scatter needs the dataset".into())
            })?;
            if data.len() != report.labels.len() || data.kind() != report.dataset.model {
                return Err(Error::UnavailableDiagnostic(
                    "dataset does not match the report".into(),
                ));
            }
            let mut text = format!("# {} label\n", coordinate_names(data.kind()).join(" "));
            for (p, l) in data.points().iter().zip(&report.labels) {
                for v in p.coords() {
                    let _ = write!(text, "{v:?} ");
                }
                let _ = writeln!(text, "{l}");
            }
            vec![("labeled_scatter.dat".into(), text)]
        }
    };
    std::fs::create_dir_all(out_dir)?;
    files
        .into_iter()
        .map(|(name, text)| {
            let path = out_dir.join(name);
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}
