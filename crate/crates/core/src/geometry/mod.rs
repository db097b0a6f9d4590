//! Geometric model kinds: minimal-sample fitting and per-point residuals.
//!
//! Every model kind exposes the same three operations: the minimal sample
//! size, an exact fit to a minimal sample, and a nonnegative residual. The
//! rest of the crate only ever touches models through [`Hypothesis`].

mod planar;
pub mod synthetic;
pub mod twoview;

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound returned by residual functions when a projection degenerates
/// (e.g. a point mapped to infinity by a homography).
pub const RESIDUAL_CAP: f64 = 1e100;

/// Relative singular-value threshold below which a minimal system counts as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(alias = "line2d")]
    Line,
    #[serde(alias = "circle2d")]
    Circle,
    #[serde(alias = "plane3d")]
    Plane,
    Homography,
    Fundamental,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Line,
        ModelKind::Circle,
        ModelKind::Plane,
        ModelKind::Homography,
        ModelKind::Fundamental,
    ];

    /// Size of a minimal sample set (η).
    pub fn minimal_sample_size(self) -> usize {
        match self {
            ModelKind::Line => 2,
            ModelKind::Circle | ModelKind::Plane => 3,
            ModelKind::Homography => 4,
            ModelKind::Fundamental => 8,
        }
    }

    /// Coordinates per data point.
    pub fn point_dim(self) -> usize {
        match self {
            ModelKind::Line | ModelKind::Circle => 2,
            ModelKind::Plane => 3,
            ModelKind::Homography | ModelKind::Fundamental => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Line => "line",
            ModelKind::Circle => "circle",
            ModelKind::Plane => "plane",
            ModelKind::Homography => "homography",
            ModelKind::Fundamental => "fundamental",
        }
    }
}

/// Free-function form of [`ModelKind::minimal_sample_size`].
pub fn minimal_sample_size(kind: ModelKind) -> usize {
    kind.minimal_sample_size()
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "line" | "line2d" => Ok(ModelKind::Line),
            "circle" | "circle2d" => Ok(ModelKind::Circle),
            "plane" | "plane3d" => Ok(ModelKind::Plane),
            "homography" => Ok(ModelKind::Homography),
            "fundamental" => Ok(ModelKind::Fundamental),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// A single abstract data point: a 2D/3D point or a two-view correspondence
/// `(x, y, x', y')`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    coords: Vec<f64>,
}

impl DataPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for DataPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self::new(coords)
    }
}

/// Points of a single model kind with optional ground truth
/// (0 = gross outlier, `k > 0` = structure `k`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    kind: ModelKind,
    points: Vec<DataPoint>,
    gt_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        kind: ModelKind,
        points: Vec<DataPoint>,
        gt_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let dim = kind.point_dim();
        let eta = kind.minimal_sample_size();
        if points.len() < eta + 1 {
            return Err(Error::InvalidDataset(format!(
                "{} points is too few for a {kind} model (need at least {})",
                points.len(),
                eta + 1
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if p.coords().iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        if let Some(labels) = &gt_labels {
            if labels.len() != points.len() {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {} points",
                    labels.len(),
                    points.len()
                )));
            }
        }
        Ok(Self {
            kind,
            points,
            gt_labels,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &DataPoint {
        &self.points[j]
    }

    pub fn gt_labels(&self) -> Option<&[usize]> {
        self.gt_labels.as_deref()
    }

    /// Number of ground-truth structures (largest label), if labels exist.
    pub fn num_structures(&self) -> Option<usize> {
        self.gt_labels
            .as_ref()
            .map(|l| l.iter().copied().max().unwrap_or(0))
    }

    /// Fraction of points labelled as gross outliers, if labels exist.
    pub fn outlier_fraction(&self) -> Option<f64> {
        self.gt_labels
            .as_ref()
            .map(|l| l.iter().filter(|&&x| x == 0).count() as f64 / l.len() as f64)
    }

    /// Largest absolute coordinate, used to express tolerances relative to the
    /// data extent.
    pub fn scale(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.coords().iter())
            .fold(0.0_f64, |acc, c| acc.max(c.abs()))
            .max(1.0)
    }
}

/// Fitted model parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// `a x + b y + c = 0` with `a² + b² = 1`.
    Line {
        a: f64,
        b: f64,
        c: f64,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// `n · x + d = 0` with a unit normal.
    Plane {
        normal: [f64; 3],
        d: f64,
    },
    /// Unit Frobenius norm; the inverse is cached for the backward transfer.
    Homography {
        h: Matrix3<f64>,
        h_inv: Matrix3<f64>,
    },
    /// Rank 2, unit Frobenius norm.
    Fundamental {
        f: Matrix3<f64>,
    },
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Line { .. } => ModelKind::Line,
            Model::Circle { .. } => ModelKind::Circle,
            Model::Plane { .. } => ModelKind::Plane,
            Model::Homography { .. } => ModelKind::Homography,
            Model::Fundamental { .. } => ModelKind::Fundamental,
        }
    }

    /// Flat parameter vector (matrices row-major).
    pub fn params(&self) -> Vec<f64> {
        match self {
            Model::Line { a, b, c } => vec![*a, *b, *c],
            Model::Circle { cx, cy, r } => vec![*cx, *cy, *r],
            Model::Plane { normal, d } => vec![normal[0], normal[1], normal[2], *d],
            Model::Homography { h, .. } => row_major(h),
            Model::Fundamental { f } => row_major(f),
        }
    }

    /// Residual of a single point; always finite and nonnegative.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let r = match self {
            Model::Line { a, b, c } => (a * x[0] + b * x[1] + c).abs(),
            Model::Circle { cx, cy, r } => ((x[0] - cx).hypot(x[1] - cy) - r).abs(),
            Model::Plane { normal, d } => {
                (normal[0] * x[0] + normal[1] * x[1] + normal[2] * x[2] + d).abs()
            }
            Model::Homography { h, h_inv } => twoview::symmetric_transfer_error(h, h_inv, x),
            Model::Fundamental { f } => twoview::sampson_distance(f, x),
        };
        if r.is_finite() {
            r.min(RESIDUAL_CAP)
        } else {
            RESIDUAL_CAP
        }
    }
}

fn row_major(m: &Matrix3<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            v.push(m[(r, c)]);
        }
    }
    v
}

/// A model hypothesis together with the minimal sample it was fitted to.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub model: Model,
    pub mss: Vec<usize>,
}

impl Hypothesis {
    /// Fits the dataset's model kind to the points indexed by `mss`.
    pub fn fit(dataset: &Dataset, mss: &[usize]) -> Result<Self> {
        let pts: Vec<&[f64]> = mss.iter().map(|&j| dataset.point(j).coords()).collect();
        let model = fit_minimal(dataset.kind(), &pts)?;
        Ok(Self {
            model,
            mss: mss.to_vec(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn params(&self) -> Vec<f64> {
        self.model.params()
    }

    pub fn residual(&self, x: &DataPoint) -> f64 {
        self.model.residual(x.coords())
    }

    /// Residuals of every dataset point, in point order.
    pub fn residual_vector(&self, dataset: &Dataset) -> Vec<f64> {
        residual_vector(&self.model, dataset)
    }
}

/// Exact fit of `kind` to exactly η points.
pub fn fit_minimal(kind: ModelKind, points: &[&[f64]]) -> Result<Model> {
    let eta = kind.minimal_sample_size();
    if points.len() != eta {
        return Err(Error::DimensionMismatch {
            expected: eta,
            got: points.len(),
        });
    }
    let dim = kind.point_dim();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    match kind {
        ModelKind::Line => planar::fit_line(points[0], points[1]),
        ModelKind::Circle => planar::fit_circle(points[0], points[1], points[2]),
        ModelKind::Plane => planar::fit_plane(points[0], points[1], points[2]),
        ModelKind::Homography => twoview::fit_homography(points, true),
        ModelKind::Fundamental => twoview::fit_fundamental(points, true),
    }
}

/// Residual of `x` under `model`.
pub fn residual(model: &Model, x: &DataPoint) -> f64 {
    model.residual(x.coords())
}

/// Residuals of every point of `dataset` under `model`, in point order.
pub fn residual_vector(model: &Model, dataset: &Dataset) -> Vec<f64> {
    dataset
        .points()
        .iter()
        .map(|p| model.residual(p.coords()))
        .collect()
}

/// `true` when the smallest singular value is negligible against the largest.
pub(crate) fn rank_deficient(singular_values: &[f64]) -> bool {
    let max = singular_values.iter().copied().fold(0.0_f64, f64::max);
    let min = singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    !(max > 0.0) || !min.is_finite() || min < RANK_TOLERANCE * max
}
