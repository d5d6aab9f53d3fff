//! Seeded synthetic datasets with ground-truth labels.
//!
//! Shape geometry is fixed by the constants below; they are echoed in
//! [`GeneratorMeta`] so every generated file records how it was made.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Label given to uniform background points.
pub const NOISE_LABEL: i64 = -1;

/// Half-distance between the two 2D blobs along the first axis.
pub const TWO_BLOBS_OFFSET: f64 = 3.0;
pub const TWO_BLOBS_SD: f64 = 1.0;

pub const BROKEN_CIRCLE_RADIUS: f64 = 1.0;
pub const BROKEN_CIRCLE_ARCS: usize = 5;
/// Fraction of each arc's 72° sector that carries points; the rest is gap.
pub const BROKEN_CIRCLE_ARC_FRACTION: f64 = 0.5;
pub const BROKEN_CIRCLE_JITTER: f64 = 0.05;

pub const CRESCENT_RADIUS: f64 = 1.0;
/// Crescent centers sit at `(±c, ±c)`.
pub const CRESCENT_OFFSET: f64 = 1.5;
pub const CRESCENT_JITTER: f64 = 0.1;

/// Blob centers are the tetrahedron vertices `(±1, ±1, ±1)` (even sign count) times this.
pub const BLOBS3D_SCALE: f64 = 2.5;
pub const BLOBS3D_SD: f64 = 0.5;

/// Relative growth of the cluster bounding box used for uniform noise.
pub const NOISE_BOX_INFLATION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    TwoBlobs,
    BrokenCircle,
    FourCrescents,
    Blobs3d,
    GaussPair,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::TwoBlobs,
        Shape::BrokenCircle,
        Shape::FourCrescents,
        Shape::Blobs3d,
        Shape::GaussPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::TwoBlobs => "two-blobs",
            Shape::BrokenCircle => "broken-circle",
            Shape::FourCrescents => "four-crescents",
            Shape::Blobs3d => "blobs3d",
            Shape::GaussPair => "gauss-pair",
        }
    }

    pub fn components(self) -> usize {
        match self {
            Shape::TwoBlobs | Shape::GaussPair => 2,
            Shape::BrokenCircle => BROKEN_CIRCLE_ARCS,
            Shape::FourCrescents | Shape::Blobs3d => 4,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-pair-d" => Ok(Shape::GaussPair),
            _ => Shape::ALL
                .into_iter()
                .find(|sh| sh.name() == s)
                .ok_or_else(|| {
                    let names: Vec<&str> = Shape::ALL.iter().map(|s| s.name()).collect();
                    Error::invalid(format!(
                        "unknown shape '{s}' (expected one of {})",
                        names.join(", ")
                    ))
                }),
        }
    }
}

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// Points in the clusters (noise excluded).
    pub n: usize,
    /// Uniform background points appended after the clusters.
    pub noise_n: usize,
    /// Gauss-pair means are `∓mu · (1, …, 1)`.
    pub mu: f64,
    /// Gauss-pair dimension; other shapes have a fixed dimension.
    pub d: usize,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(shape: Shape, n: usize) -> Self {
        Self {
            shape,
            n,
            noise_n: 0,
            mu: 0.0,
            d: 2,
            seed: 0,
        }
    }

    pub fn gauss_pair(d: usize, n: usize, mu: f64) -> Self {
        Self {
            d,
            mu,
            ..Self::new(Shape::GaussPair, n)
        }
    }

    pub fn with_noise(mut self, noise_n: usize) -> Self {
        self.noise_n = noise_n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Dimension of the generated points.
    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::GaussPair => self.d,
            Shape::Blobs3d => 3,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.shape == Shape::GaussPair && self.d == 0 {
            return Err(Error::invalid("gauss-pair dimension must be at least 1"));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        Ok(())
    }
}

/// Geometry constants in force when a dataset was generated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorMeta {
    pub dim: usize,
    pub components: usize,
    pub component_sizes: Vec<usize>,
    pub jitter: f64,
    pub noise_box_inflation: f64,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointSet<f64>,
    /// Component id per point, [`NOISE_LABEL`] for background noise.
    pub labels: Vec<i64>,
    pub meta: GeneratorMeta,
}

/// Splits `n` as evenly as possible over `k` components, earlier ones first.
pub fn component_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| n / k + usize::from(j < n % k)).collect()
}

fn normal(rng: &mut impl RngCore) -> f64 {
    rng.sample(StandardNormal)
}

fn two_blob_centers() -> Vec<Vec<f64>> {
    vec![vec![-TWO_BLOBS_OFFSET, 0.0], vec![TWO_BLOBS_OFFSET, 0.0]]
}

fn gauss_pair_centers(d: usize, mu: f64) -> Vec<Vec<f64>> {
    vec![vec![-mu; d], vec![mu; d]]
}

fn tetrahedron_centers() -> Vec<Vec<f64>> {
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
    .iter()
    .map(|v| v.iter().map(|c| c * BLOBS3D_SCALE).collect())
    .collect()
}

fn crescent_centers() -> Vec<Vec<f64>> {
    let c = CRESCENT_OFFSET;
    vec![vec![-c, c], vec![c, c], vec![c, -c], vec![-c, -c]]
}

fn arc_center_angle(k: usize) -> f64 {
    PI / 2.0 + 2.0 * PI * k as f64 / BROKEN_CIRCLE_ARCS as f64
}

/// Draws a dataset with a caller-supplied generator.
pub fn generate_with_rng(spec: &ShapeSpec, rng: &mut impl RngCore) -> Result<Dataset> {
    spec.validate()?;
    let dim = spec.dim();
    let sizes = component_sizes(spec.n, spec.shape.components());
    let mut coords: Vec<f64> = Vec::with_capacity((spec.n + spec.noise_n) * dim);
    let mut labels: Vec<i64> = Vec::with_capacity(spec.n + spec.noise_n);

    let (centers, jitter) = match spec.shape {
        Shape::TwoBlobs => (two_blob_centers(), TWO_BLOBS_SD),
        Shape::GaussPair => (gauss_pair_centers(dim, spec.mu), 1.0),
        Shape::Blobs3d => (tetrahedron_centers(), BLOBS3D_SD),
        Shape::BrokenCircle => (
            (0..BROKEN_CIRCLE_ARCS)
                .map(|k| {
                    let a = arc_center_angle(k);
                    vec![
                        BROKEN_CIRCLE_RADIUS * a.cos(),
                        BROKEN_CIRCLE_RADIUS * a.sin(),
                    ]
                })
                .collect(),
            BROKEN_CIRCLE_JITTER,
        ),
        Shape::FourCrescents => (crescent_centers(), CRESCENT_JITTER),
    };

    for (k, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            match spec.shape {
                Shape::TwoBlobs | Shape::GaussPair | Shape::Blobs3d => {
                    for c in &centers[k] {
                        coords.push(c + jitter * normal(rng));
                    }
                }
                Shape::BrokenCircle => {
                    let half = PI / BROKEN_CIRCLE_ARCS as f64 * BROKEN_CIRCLE_ARC_FRACTION;
                    let a = arc_center_angle(k) + rng.random_range(-half..half);
                    coords.push(BROKEN_CIRCLE_RADIUS * a.cos() + jitter * normal(rng));
                    coords.push(BROKEN_CIRCLE_RADIUS * a.sin() + jitter * normal(rng));
                }
                Shape::FourCrescents => {
                    // Half annulus opening toward the origin's diagonal, rotated per crescent.
                    let start = PI / 4.0 + PI / 2.0 * k as f64;
                    let a = start + rng.random_range(0.0..PI);
                    coords.push(centers[k][0] + CRESCENT_RADIUS * a.cos() + jitter * normal(rng));
                    coords.push(centers[k][1] + CRESCENT_RADIUS * a.sin() + jitter * normal(rng));
                }
            }
            labels.push(k as i64);
        }
    }

    if spec.noise_n > 0 {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in coords.chunks_exact(dim) {
            for (k, &x) in row.iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        for k in 0..dim {
            let pad = (hi[k] - lo[k]) * NOISE_BOX_INFLATION / 2.0;
            lo[k] -= pad;
            hi[k] += pad;
        }
        for _ in 0..spec.noise_n {
            for k in 0..dim {
                let u: f64 = rng.random();
                coords.push(lo[k] + u * (hi[k] - lo[k]));
            }
            labels.push(NOISE_LABEL);
        }
    }

    Ok(Dataset {
        points: PointSet::new(coords, dim)?,
        labels,
        meta: GeneratorMeta {
            dim,
            components: sizes.len(),
            component_sizes: sizes,
            jitter,
            noise_box_inflation: NOISE_BOX_INFLATION,
            centers,
        },
    })
}

/// Draws a dataset; identical specs give bit-identical output.
pub fn generate(spec: &ShapeSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with_rng(spec, &mut rng)
}

fn analytic_centers(spec: &ShapeSpec) -> Result<(Vec<Vec<f64>>, f64)> {
    match spec.shape {
        Shape::GaussPair => Ok((gauss_pair_centers(spec.dim(), spec.mu), 1.0)),
        Shape::TwoBlobs => Ok((two_blob_centers(), TWO_BLOBS_SD)),
        other => Err(Error::Unsupported(format!(
            "no closed-form density for shape '{other}'"
        ))),
    }
}

fn check_query(spec: &ShapeSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, shape has {}",
            x.len(),
            spec.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query has a non-finite coordinate"));
    }
    Ok(())
}

fn component_terms(centers: &[Vec<f64>], sd: f64, x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let norm = (2.0 * PI * sd * sd).powf(-d / 2.0) / centers.len() as f64;
    centers
        .iter()
        .map(|c| {
            let sq: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            norm * (-sq / (2.0 * sd * sd)).exp()
        })
        .collect()
}

/// Exact mixture density (equal weights, isotropic components). Only the
/// Gaussian-mixture shapes have one.
pub fn true_density(spec: &ShapeSpec, x: &[f64]) -> Result<f64> {
    let (centers, sd) = analytic_centers(spec)?;
    check_query(spec, x)?;
    Ok(component_terms(&centers, sd, x).iter().sum())
}

/// Gradient of [`true_density`].
pub fn true_density_gradient(spec: &ShapeSpec, x: &[f64]) -> Result<Vec<f64>> {
    let (centers, sd) = analytic_centers(spec)?;
    check_query(spec, x)?;
    let terms = component_terms(&centers, sd, x);
    let mut g = vec![0.0; x.len()];
    for (c, t) in centers.iter().zip(terms) {
        for (k, gk) in g.iter_mut().enumerate() {
            *gk -= t * (x[k] - c[k]) / (sd * sd);
        }
    }
    Ok(g)
}
