use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::model::{linspace, Field};
use crate::tensor::DenseTensor;

/// Truncation threshold applied to ground-truth distances.
pub const DEFAULT_TRUNCATION: f64 = 0.1;

/// Analytic shapes with exact signed distances (negative inside).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    /// Ring in the `x`-`y` plane around `center`.
    Torus { center: [f64; 3], major: f64, minor: f64 },
    TwoSpheres { a: ([f64; 3], f64), b: ([f64; 3], f64) },
}

impl Shape {
    pub const SPHERE: Shape = Shape::Sphere {
        center: [0.0; 3],
        radius: 0.5,
    };
    pub const TORUS: Shape = Shape::Torus {
        center: [0.0; 3],
        major: 0.5,
        minor: 0.2,
    };
    pub const TWO_SPHERES: Shape = Shape::TwoSpheres {
        a: ([-0.3, 0.0, 0.0], 0.4),
        b: ([0.35, 0.1, 0.0], 0.3),
    };

    pub fn distance(&self, p: [f64; 3]) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => norm(sub(p, center)) - radius,
            Shape::Torus { center, major, minor } => {
                let q = sub(p, center);
                let ring = (q[0] * q[0] + q[1] * q[1]).sqrt() - major;
                (ring * ring + q[2] * q[2]).sqrt() - minor
            }
            Shape::TwoSpheres { a, b } => {
                let da = norm(sub(p, a.0)) - a.1;
                let db = norm(sub(p, b.0)) - b.1;
                da.min(db)
            }
        }
    }

    /// Analytic gradient of [`Shape::distance`] (unit length away from the
    /// medial set).
    pub fn gradient(&self, p: [f64; 3]) -> [f64; 3] {
        let unit = |v: [f64; 3]| {
            let n = norm(v);
            if n == 0.0 {
                [0.0; 3]
            } else {
                [v[0] / n, v[1] / n, v[2] / n]
            }
        };
        match *self {
            Shape::Sphere { center, .. } => unit(sub(p, center)),
            Shape::Torus { center, major, .. } => {
                let q = sub(p, center);
                let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
                let (cx, cy) = if rho == 0.0 { (0.0, 0.0) } else { (q[0] / rho, q[1] / rho) };
                // direction from the nearest ring point
                unit([q[0] - major * cx, q[1] - major * cy, q[2]])
            }
            Shape::TwoSpheres { a, b } => {
                let da = norm(sub(p, a.0)) - a.1;
                let db = norm(sub(p, b.0)) - b.1;
                if da <= db {
                    unit(sub(p, a.0))
                } else {
                    unit(sub(p, b.0))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Torus { .. } => "torus",
            Shape::TwoSpheres { .. } => "two-sphere",
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
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Ok(Shape::SPHERE),
            "torus" => Ok(Shape::TORUS),
            "two-sphere" | "two-spheres" | "two_sphere" => Ok(Shape::TWO_SPHERES),
            other => Err(Error::Config(format!("unknown shape `{other}`"))),
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Exact signed distances of `shape` on the tensor grid `coords`
/// (`[N_0, N_1, N_2, 1]`).
pub fn sdf_grid(shape: &Shape, coords: &[Vec<f64>]) -> Result<DenseTensor> {
    if coords.len() != 3 || coords.iter().any(Vec::is_empty) {
        return Err(Error::Input("an SDF grid needs three non-empty axes".into()));
    }
    let shape_out = [coords[0].len(), coords[1].len(), coords[2].len(), 1];
    DenseTensor::from_fn(&shape_out, |i| shape.distance([coords[0][i[0]], coords[1][i[1]], coords[2][i[2]]]))
}

/// Clamps every value to `[-tau, tau]`.
pub fn truncate_sdf(grid: &DenseTensor, tau: f64) -> DenseTensor {
    grid.map(|v| v.clamp(-tau, tau))
}

/// Intersection over union of the occupied sets `{value < level}`; 1 when
/// both sets are empty.
pub fn iou(pred: &DenseTensor, gt: &DenseTensor, level: f64) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(shape_err!("iou of {:?} against {:?}", pred.shape(), gt.shape()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (p < level, g < level);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Weights of the Eikonal, data and surface-band terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfWeights {
    pub eikonal: f64,
    pub data: f64,
    pub surface: f64,
}

impl Default for SdfWeights {
    fn default() -> Self {
        Self {
            eikonal: 0.1,
            data: 1.0,
            surface: 3.0,
        }
    }
}

/// Fit a truncated signed-distance field on an `N³` grid over `[lo, hi]³`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfTask {
    pub shape: Shape,
    pub resolution: usize,
    pub domain: (f64, f64),
    pub tau: f64,
    /// Half-width of the surface band `{|Ψ̂| < band}`.
    pub band: f64,
    pub weights: SdfWeights,
    truth: DenseTensor,
}

impl SdfTask {
    /// Domain `[-1, 1]³`, truncation 0.1 and a band of 1% of the diagonal.
    pub fn new(shape: Shape, resolution: usize) -> Result<Self> {
        Self::with_domain(shape, resolution, (-1.0, 1.0), DEFAULT_TRUNCATION)
    }

    pub fn with_domain(shape: Shape, resolution: usize, domain: (f64, f64), tau: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Config("SDF grid resolution must be >= 2".into()));
        }
        if !(tau > 0.0) || !(domain.0 < domain.1) {
            return Err(Error::Config("SDF truncation and domain must be positive".into()));
        }
        let diagonal = (domain.1 - domain.0) * 3f64.sqrt();
        let coords = vec![linspace(domain.0, domain.1, resolution); 3];
        let truth = truncate_sdf(&sdf_grid(&shape, &coords)?, tau);
        Ok(Self {
            shape,
            resolution,
            domain,
            tau,
            band: 0.01 * diagonal,
            weights: SdfWeights::default(),
            truth,
        })
    }

    pub fn domains(&self) -> Vec<(f64, f64)> {
        vec![self.domain; 3]
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        vec![linspace(self.domain.0, self.domain.1, self.resolution); 3]
    }

    /// Truncated ground truth, `[N, N, N, 1]`.
    pub fn truth(&self) -> &DenseTensor {
        &self.truth
    }

    /// Flat grid indices inside the surface band.
    pub fn band_indices(&self) -> Vec<usize> {
        indices_where(&self.truth, |v| v.abs() < self.band)
    }

    /// Flat grid indices where the truncated truth is still a distance.
    pub fn unclamped_indices(&self) -> Vec<usize> {
        indices_where(&self.truth, |v| v.abs() < self.tau)
    }
}

fn indices_where(t: &DenseTensor, f: impl Fn(f64) -> bool) -> Vec<usize> {
    t.data().iter().enumerate().filter(|(_, &v)| f(v)).map(|(i, _)| i).collect()
}

/// Loss terms recorded on a tape; `total` is the weighted sum.
#[derive(Clone, Copy, Debug)]
pub struct SdfLoss {
    pub total: Var,
    pub eikonal: Var,
    pub data: Var,
    pub surface: Option<Var>,
}

/// `λ_eik·mean|‖∇Ψ‖ − 1| + λ_data·mean|Ψ − Ψ̂| + λ_surf·mean_band|Ψ − Ψ̂|`.
///
/// `field` holds `[P, 1]` values with all three first partials; `truth` is
/// `[P, 1]`; `band` lists the rows inside the surface band.
pub fn sdf_loss(tape: &mut Tape, field: &Field<Var>, truth: Var, band: &[usize], weights: &SdfWeights) -> Result<SdfLoss> {
    let partials: Vec<Var> = field
        .partials
        .iter()
        .map(|p| p.ok_or_else(|| Error::Capability("SDF loss needs first derivatives on every axis".into())))
        .collect::<Result<_>>()?;
    if partials.is_empty() {
        return Err(Error::Capability("SDF loss needs first derivatives".into()));
    }
    let squares: Vec<Var> = partials.iter().map(|&p| tape.square(p)).collect();
    let sum = tape.add_all(&squares)?;
    let norm = tape.sqrt(sum);
    let one = tape.constant(DenseTensor::ones(tape.shape(norm))?);
    let dev = tape.sub(norm, one)?;
    let dev = tape.abs(dev);
    let eikonal = tape.mean(dev);

    let diff = tape.sub(field.value, truth)?;
    let adiff = tape.abs(diff);
    let data = tape.mean(adiff);

    let mut terms = vec![tape.scale(eikonal, weights.eikonal), tape.scale(data, weights.data)];
    let surface = if band.is_empty() {
        None
    } else {
        let near = tape.gather_rows(adiff, band)?;
        let s = tape.mean(near);
        terms.push(tape.scale(s, weights.surface));
        Some(s)
    };
    let total = tape.add_all(&terms)?;
    Ok(SdfLoss {
        total,
        eikonal,
        data,
        surface,
    })
}

/// `mean |‖∇Ψ‖ − 1|` over the listed rows (all rows when `rows` is `None`),
/// from per-axis partial tensors of equal length.
pub fn eikonal_error(partials: &[&DenseTensor], rows: Option<&[usize]>) -> Result<f64> {
    let n = partials.first().ok_or_else(|| Error::Input("no partials".into()))?.len();
    if partials.iter().any(|p| p.len() != n) {
        return Err(shape_err!("partials differ in length"));
    }
    let dev = |i: usize| (partials.iter().map(|p| p.data()[i] * p.data()[i]).sum::<f64>().sqrt() - 1.0).abs();
    let (sum, count) = match rows {
        Some(r) => (r.iter().map(|&i| dev(i)).sum::<f64>(), r.len()),
        None => ((0..n).map(dev).sum::<f64>(), n),
    };
    if count == 0 {
        return Err(Error::Numeric("no samples for the Eikonal error".into()));
    }
    Ok(sum / count as f64)
}
