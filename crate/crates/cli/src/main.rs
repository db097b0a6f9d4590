//! `dgsac` command-line front end.
//!
//! Exit codes: 0 success, 2 input/parse/configuration error, 3 the fit
//! selected no structure, 4 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dgsac::bench::{sampler_benchmark, BenchOptions, SamplerMethod};
use dgsac::eval::classification_accuracy;
use dgsac::geometry::synthetic::{generate_synthetic, SyntheticSpec};
use dgsac::io::{load_dataset, save_dataset};
use dgsac::pipeline::{run_dgsac, PipelineConfig, Variant};
use dgsac::report::{emit_plot_data, PlotKind, RunReport, TomlDocument};
use dgsac::{Error, ModelKind};

#[derive(Parser, Debug)]
#[command(
    name = "dgsac",
    version,
    about = "Multi-structure robust model fitting"
)]
struct Cli {
    /// Root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with pipeline settings (`bench` reads benchmark settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with ground-truth labels.
    Generate {
        /// Built-in layout; ignored when `--spec` is given.
        #[arg(value_enum, default_value = "star5")]
        preset: Preset,
        /// TOML synthetic dataset description.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output file name inside `--out`.
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit a dataset and write `report.toml`.
    Fit { data: PathBuf },
    /// Score a run report against the ground truth of its dataset.
    Eval { report: PathBuf, data: PathBuf },
    /// Compare hypothesis samplers under equal time budgets; writes `bench.toml`.
    Bench {
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Comma-separated subset of kdgs, residual-preference, uniform.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "kdgs,residual-preference,uniform"
        )]
        methods: Vec<String>,
    },
    /// Export plot data from a run report.
    PlotData {
        report: PathBuf,
        #[arg(long, value_enum)]
        kind: Vec<PlotArg>,
        /// Dataset file, needed for the labelled scatter.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Star5,
    Circle5,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Greedy,
    Optimal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Line,
    Circle,
    Plane,
    Homography,
    Fundamental,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlotArg {
    DensityProfile,
    NuVsIteration,
    TauVsIteration,
    LabeledScatter,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Greedy => Variant::Greedy,
            VariantArg::Optimal => Variant::Optimal,
        }
    }
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Line => ModelKind::Line,
            ModelArg::Circle => ModelKind::Circle,
            ModelArg::Plane => ModelKind::Plane,
            ModelArg::Homography => ModelKind::Homography,
            ModelArg::Fundamental => ModelKind::Fundamental,
        }
    }
}

impl From<PlotArg> for PlotKind {
    fn from(p: PlotArg) -> Self {
        match p {
            PlotArg::DensityProfile => PlotKind::DensityProfile,
            PlotArg::NuVsIteration => PlotKind::NuVsIteration,
            PlotArg::TauVsIteration => PlotKind::TauVsIteration,
            PlotArg::LabeledScatter => PlotKind::LabeledScatter,
        }
    }
}

/// Command failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DegenerateMss | Error::NonFiniteObjective => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn with_path(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

fn require_model(cli: &Cli) -> Result<ModelKind, Failure> {
    cli.model
        .map(ModelKind::from)
        .ok_or_else(|| Failure::usage("--model is required for this command"))
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(with_path(path))?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = cli.variant {
        config.variant = v.into();
    }
    if let Some(seed) = cli.seed {
        config.sampler.seed = seed;
    }
    Ok(config)
}

fn generate(
    cli: &Cli,
    preset: Preset,
    spec: Option<&Path>,
    name: Option<&str>,
) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let (spec, stem) = match spec {
        Some(path) => {
            let mut spec = SyntheticSpec::load(path).map_err(with_path(path))?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let stem = path
                .file_stem()
                .map_or("synthetic".into(), |s| s.to_string_lossy().into_owned());
            (spec, stem)
        }
        None => match preset {
            Preset::Star5 => (SyntheticSpec::star5(seed), "star5".to_string()),
            Preset::Circle5 => (SyntheticSpec::circle5(seed), "circle5".to_string()),
        },
    };
    let data = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli
        .out
        .join(name.map_or_else(|| format!("{stem}-seed{}.txt", spec.seed), str::to_string));
    save_dataset(&data, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn fit(cli: &Cli, data_path: &Path) -> Result<(), Failure> {
    let model = require_model(cli)?;
    let config = pipeline_config(cli)?;
    let data = load_dataset(data_path, model).map_err(with_path(data_path))?;
    let fit = run_dgsac(&data, &config)?;
    let report = RunReport::new(&config, &data, &fit);
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli.out.join("report.toml");
    report.save(&path)?;
    println!(
        "{} structures, {} sampler iterations, {} hypotheses, {:.3}s",
        fit.num_structures(),
        fit.diagnostics.sampler_iterations,
        fit.diagnostics.hypotheses_generated,
        fit.diagnostics.total_seconds
    );
    for s in &report.structures {
        println!(
            "  structure {}: {} points, sigma {:.3e}, goodness {:.3e}",
            s.label, s.assigned, s.sigma_hat, s.goodness
        );
    }
    if let Some(ca) = report.ca_percent {
        println!("classification accuracy {ca:.2}%");
    }
    println!("report written to {}", path.display());
    if fit.selected.is_empty() {
        return Err(Failure {
            code: 3,
            message: "no structure was selected".into(),
        });
    }
    Ok(())
}

fn eval(report_path: &Path, data_path: &Path) -> Result<(), Failure> {
    let report = RunReport::load(report_path).map_err(with_path(report_path))?;
    let data = load_dataset(data_path, report.dataset.model).map_err(with_path(data_path))?;
    let gt = data.gt_labels().ok_or(Error::MissingGroundTruth)?;
    if gt.len() != report.labels.len() {
        return Err(Failure::usage(format!(
            "report has {} labels but the dataset has {} points",
            report.labels.len(),
            gt.len()
        )));
    }
    let ca = classification_accuracy(&report.labels, gt);
    println!("classification accuracy {ca:.2}%");
    println!(
        "structures: {} selected, {} true",
        report.structures.len(),
        data.num_structures().unwrap_or(0)
    );
    Ok(())
}

fn bench(cli: &Cli, data_path: &Path, trials: usize, methods: &[String]) -> Result<(), Failure> {
    let model = require_model(cli)?;
    let mut options = match &cli.config {
        Some(path) => BenchOptions::load(path).map_err(with_path(path))?,
        None => BenchOptions::default(),
    };
    if let Some(seed) = cli.seed {
        options.seed = seed;
    }
    let methods = methods
        .iter()
        .map(|m| m.parse::<SamplerMethod>())
        .collect::<Result<Vec<_>, _>>()?;
    let data = load_dataset(data_path, model).map_err(with_path(data_path))?;
    let report = sampler_benchmark(&data, &methods, trials, &options)?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli.out.join("bench.toml");
    report.save(&path)?;
    println!(
        "{:<20} {:>10} {:>8} {:>8} {:>8}",
        "method", "#H", "#HM%", "#HI%", "time(s)"
    );
    for s in &report.summary {
        println!(
            "{:<20} {:>10.1} {:>8.2} {:>8.2} {:>8.3}",
            s.method.to_string(),
            s.hypotheses,
            s.hm_percent,
            s.hi_percent,
            s.seconds
        );
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn plot_data(
    cli: &Cli,
    report_path: &Path,
    kinds: &[PlotArg],
    data: Option<&Path>,
) -> Result<(), Failure> {
    let report = RunReport::load(report_path).map_err(with_path(report_path))?;
    let dataset = data
        .map(|p| load_dataset(p, report.dataset.model).map_err(with_path(p)))
        .transpose()?;
    let kinds: Vec<PlotKind> = if kinds.is_empty() {
        PlotKind::ALL.to_vec()
    } else {
        kinds.iter().map(|&k| k.into()).collect()
    };
    for kind in kinds {
        for path in emit_plot_data(&report, dataset.as_ref(), kind, &cli.out)? {
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Generate { preset, spec, name } => {
            generate(cli, *preset, spec.as_deref(), name.as_deref())
        }
        Command::Fit { data } => fit(cli, data),
        Command::Eval { report, data } => eval(report, data),
        Command::Bench {
            data,
            trials,
            methods,
        } => bench(cli, data, *trials, methods),
        Command::PlotData { report, kind, data } => plot_data(cli, report, kind, data.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(4),
    }
}
