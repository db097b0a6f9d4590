//! Seeded synthetic multi-structure datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataPoint, Dataset, ModelKind};
use crate::error::{Error, Result};

/// One ground-truth structure and how many inliers to draw from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Structure {
    /// Points uniform along a 2D segment.
    Segment {
        from: [f64; 2],
        to: [f64; 2],
        inliers: usize,
    },
    /// Points uniform in angle on a circle.
    Circle {
        center: [f64; 2],
        radius: f64,
        inliers: usize,
    },
    /// Points `origin + a·u + b·v` with `a, b` uniform in `[0, 1]`.
    PlanePatch {
        origin: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
        inliers: usize,
    },
    /// Source points uniform in the bounding box, mapped by a row-major 3×3
    /// homography.
    Homography { matrix: [f64; 9], inliers: usize },
}

impl Structure {
    pub fn kind(&self) -> ModelKind {
        match self {
            Structure::Segment { .. } => ModelKind::Line,
            Structure::Circle { .. } => ModelKind::Circle,
            Structure::PlanePatch { .. } => ModelKind::Plane,
            Structure::Homography { .. } => ModelKind::Homography,
        }
    }

    pub fn inliers(&self) -> usize {
        match self {
            Structure::Segment { inliers, .. }
            | Structure::Circle { inliers, .. }
            | Structure::PlanePatch { inliers, .. }
            | Structure::Homography { inliers, .. } => *inliers,
        }
    }
}

/// Axis-aligned box; 2D for planar and two-view kinds (both views share it),
/// 3D for planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn square(half_width: f64) -> Self {
        Self {
            min: vec![-half_width; 2],
            max: vec![half_width; 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub structures: Vec<Structure>,
    /// Standard deviation of the isotropic Gaussian noise on every inlier coordinate.
    pub sigma: f64,
    /// Fraction of the final dataset that is gross outliers, in `[0, 1)`.
    pub outlier_fraction: f64,
    pub bbox: BoundingBox,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Five segments crossing at the origin, 50 inliers each, σ = 0.0075,
    /// 50% outliers in `[-1, 1]²` (500 points).
    pub fn star5(seed: u64) -> Self {
        let structures = (0..5)
            .map(|k| {
                let angle = k as f64 * std::f64::consts::PI / 5.0;
                let (s, c) = angle.sin_cos();
                Structure::Segment {
                    from: [-c, -s],
                    to: [c, s],
                    inliers: 50,
                }
            })
            .collect();
        Self {
            structures,
            sigma: 0.0075,
            outlier_fraction: 0.5,
            bbox: BoundingBox::square(1.0),
            seed,
        }
    }

    /// Five overlapping circles, 50 inliers each, σ = 0.0075, 50% outliers in
    /// `[-1, 1]²` (500 points).
    pub fn circle5(seed: u64) -> Self {
        let circles = [
            ([-0.5, 0.3], 0.35),
            ([0.2, 0.45], 0.4),
            ([0.5, -0.3], 0.35),
            ([-0.3, -0.4], 0.3),
            ([0.0, 0.0], 0.25),
        ];
        let structures = circles
            .iter()
            .map(|&(center, radius)| Structure::Circle {
                center,
                radius,
                inliers: 50,
            })
            .collect();
        Self {
            structures,
            sigma: 0.0075,
            outlier_fraction: 0.5,
            bbox: BoundingBox::square(1.0),
            seed,
        }
    }

    pub fn kind(&self) -> Result<ModelKind> {
        let first = self
            .structures
            .first()
            .ok_or_else(|| Error::InvalidSpec("no structures".into()))?
            .kind();
        if self.structures.iter().any(|s| s.kind() != first) {
            return Err(Error::InvalidSpec("structures mix model kinds".into()));
        }
        Ok(first)
    }

    fn validate(&self) -> Result<ModelKind> {
        let kind = self.kind()?;
        let eta = kind.minimal_sample_size();
        if let Some(s) = self.structures.iter().find(|s| s.inliers() < eta + 1) {
            return Err(Error::InvalidSpec(format!(
                "structure with {} inliers; a {kind} needs at least {}",
                s.inliers(),
                eta + 1
            )));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidSpec(
                "outlier_fraction must be in [0, 1)".into(),
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidSpec(
                "sigma must be finite and nonnegative".into(),
            ));
        }
        let box_dim = if kind == ModelKind::Plane { 3 } else { 2 };
        if self.bbox.min.len() != box_dim || self.bbox.max.len() != box_dim {
            return Err(Error::InvalidSpec(format!(
                "bounding box must be {box_dim}-dimensional"
            )));
        }
        if self
            .bbox
            .min
            .iter()
            .zip(&self.bbox.max)
            .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::InvalidSpec(
                "bounding box must have min < max".into(),
            ));
        }
        Ok(kind)
    }

    pub fn outlier_count(&self) -> usize {
        let inliers: usize = self.structures.iter().map(Structure::inliers).sum();
        (inliers as f64 * self.outlier_fraction / (1.0 - self.outlier_fraction)).round() as usize
    }
}

/// Draws the dataset described by `spec`. Inliers come first, structure by
/// structure (labels `1..=κ`), followed by the outliers (label 0).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let kind = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise =
        Normal::new(0.0, spec.sigma.max(0.0)).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let lo = &spec.bbox.min;
    let hi = &spec.bbox.max;

    for (idx, s) in spec.structures.iter().enumerate() {
        for _ in 0..s.inliers() {
            let mut p = match s {
                Structure::Segment { from, to, .. } => {
                    let t: f64 = rng.random();
                    vec![
                        from[0] + t * (to[0] - from[0]),
                        from[1] + t * (to[1] - from[1]),
                    ]
                }
                Structure::Circle { center, radius, .. } => {
                    let a = rng.random::<f64>() * std::f64::consts::TAU;
                    vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                }
                Structure::PlanePatch { origin, u, v, .. } => {
                    let (a, b): (f64, f64) = (rng.random(), rng.random());
                    (0..3).map(|k| origin[k] + a * u[k] + b * v[k]).collect()
                }
                Structure::Homography { matrix: h, .. } => {
                    let x = rng.random_range(lo[0]..hi[0]);
                    let y = rng.random_range(lo[1]..hi[1]);
                    let w = h[6] * x + h[7] * y + h[8];
                    let u = (h[0] * x + h[1] * y + h[2]) / w;
                    let v = (h[3] * x + h[4] * y + h[5]) / w;
                    vec![x, y, u, v]
                }
            };
            for c in p.iter_mut() {
                *c += noise.sample(&mut rng);
            }
            points.push(DataPoint::new(p));
            labels.push(idx + 1);
        }
    }

    let dim = kind.point_dim();
    for _ in 0..spec.outlier_count() {
        let p: Vec<f64> = (0..dim)
            .map(|k| {
                let axis = k % lo.len();
                rng.random_range(lo[axis]..hi[axis])
            })
            .collect();
        points.push(DataPoint::new(p));
        labels.push(0);
    }

    Dataset::new(kind, points, Some(labels))
}
