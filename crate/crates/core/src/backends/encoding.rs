use std::f64::consts::PI;

use crate::autodiff::{Jet, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::kernels::matmul;
use crate::tensor::DenseTensor;

/// Feature map applied to a normalized coordinate in `[-1, 1]` before the MLP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Encoding {
    None,
    /// `(sin 2^k πx, cos 2^k πx)` for `k = 0..levels`, interleaved per level.
    Fourier { levels: usize },
    /// Dense multi-resolution 1-D feature tables, linearly interpolated.
    /// Level `l` has `floor(base_resolution · growth^l)` cells over `[0, 1]`.
    FeatureGrid {
        levels: usize,
        features: usize,
        base_resolution: usize,
        growth: f64,
    },
}

impl Encoding {
    pub const DEFAULT_GRID: Encoding = Encoding::FeatureGrid {
        levels: 8,
        features: 2,
        base_resolution: 16,
        growth: 1.5,
    };

    pub fn output_dim(&self) -> usize {
        match *self {
            Encoding::None => 1,
            Encoding::Fourier { levels } => 2 * levels,
            Encoding::FeatureGrid {
                levels, features, ..
            } => levels * features,
        }
    }

    /// Cells per level; empty unless this is a feature grid.
    pub fn grid_resolutions(&self) -> Vec<usize> {
        match *self {
            Encoding::FeatureGrid {
                levels,
                base_resolution,
                growth,
                ..
            } => (0..levels)
                .map(|l| ((base_resolution as f64) * growth.powi(l as i32)).floor().max(1.0) as usize)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Shapes of the learnable tables (`[cells + 1, features]` per level).
    pub fn table_shapes(&self) -> Vec<[usize; 2]> {
        match *self {
            Encoding::FeatureGrid { features, .. } => self
                .grid_resolutions()
                .into_iter()
                .map(|r| [r + 1, features])
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.table_shapes().iter().map(|s| s[0] * s[1]).sum()
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, Encoding::FeatureGrid { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Encoding::None => Ok(()),
            Encoding::Fourier { levels } if levels >= 1 => Ok(()),
            Encoding::FeatureGrid {
                levels,
                features,
                base_resolution,
                growth,
            } if levels >= 1 && features >= 1 && base_resolution >= 1 && growth >= 1.0 => Ok(()),
            other => Err(Error::Config(format!("invalid encoding {other:?}"))),
        }
    }

    /// Evaluates the encoding on a coordinate jet (`[n, 1]` channels).
    /// `tables` must hold one tensor per level for feature grids.
    pub fn encode(&self, x: &Jet<DenseTensor>, tables: &[DenseTensor]) -> Result<Jet<DenseTensor>> {
        check_finite(x)?;
        match *self {
            Encoding::None => Ok(x.clone()),
            Encoding::Fourier { levels } => Ok(fourier(x, levels)),
            Encoding::FeatureGrid { features, .. } => {
                let n = x.value.len();
                let res = self.grid_resolutions();
                if tables.len() != res.len() {
                    return Err(Error::Shape(format!(
                        "expected {} feature tables, got {}",
                        res.len(),
                        tables.len()
                    )));
                }
                let width = self.output_dim();
                let mut out = [
                    Some(vec![0.0; n * width]),
                    x.d1.as_ref().map(|_| vec![0.0; n * width]),
                    x.d2.as_ref().map(|_| vec![0.0; n * width]),
                ];
                for (l, (&cells, table)) in res.iter().zip(tables).enumerate() {
                    let weights = interpolation_weights(x, cells);
                    for (ch, w) in weights.iter().enumerate() {
                        let (Some(w), Some(dst)) = (w, out[ch].as_mut()) else { continue };
                        let part = matmul(w.data(), table.data(), n, cells + 1, features);
                        for i in 0..n {
                            dst[i * width + l * features..i * width + (l + 1) * features]
                                .copy_from_slice(&part[i * features..(i + 1) * features]);
                        }
                    }
                }
                let [v, d1, d2] = out;
                let wrap = |d: Vec<f64>| DenseTensor::from_parts(vec![n, width], d);
                Ok(Jet {
                    value: wrap(v.unwrap()),
                    d1: d1.map(wrap),
                    d2: d2.map(wrap),
                })
            }
        }
    }

    /// Records the encoding on a tape. Feature-grid tables enter as the
    /// given parameter nodes; everything else is constant.
    pub(crate) fn encode_on_tape(
        &self,
        tape: &mut Tape,
        x: &Jet<DenseTensor>,
        tables: &[Var],
    ) -> Result<Jet<Var>> {
        check_finite(x)?;
        match *self {
            Encoding::None => Ok(tape.jet_constant(x.clone())),
            Encoding::Fourier { levels } => Ok(tape.jet_constant(fourier(x, levels))),
            Encoding::FeatureGrid { .. } => {
                let res = self.grid_resolutions();
                let mut parts: [Vec<Var>; 3] = Default::default();
                for (&cells, &table) in res.iter().zip(tables) {
                    let weights = interpolation_weights(x, cells);
                    for (ch, w) in weights.into_iter().enumerate() {
                        if let Some(w) = w {
                            let wv = tape.constant(w);
                            parts[ch].push(tape.matmul(wv, table)?);
                        }
                    }
                }
                let [v, d1, d2] = parts;
                let value = tape.concat_cols(&v)?;
                let d1 = if d1.is_empty() { None } else { Some(tape.concat_cols(&d1)?) };
                let d2 = if d2.is_empty() { None } else { Some(tape.concat_cols(&d2)?) };
                Ok(Jet { value, d1, d2 })
            }
        }
    }
}

fn check_finite(x: &Jet<DenseTensor>) -> Result<()> {
    if x.value.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite coordinate".into()));
    }
    Ok(())
}

/// Analytic jets of the interleaved sin/cos features.
fn fourier(x: &Jet<DenseTensor>, levels: usize) -> Jet<DenseTensor> {
    let n = x.value.len();
    let width = 2 * levels;
    let mut v = vec![0.0; n * width];
    let mut d1 = x.d1.as_ref().map(|_| vec![0.0; n * width]);
    let mut d2 = x.d2.as_ref().map(|_| vec![0.0; n * width]);
    for i in 0..n {
        let xv = x.value.data()[i];
        let x1 = x.d1.as_ref().map_or(0.0, |t| t.data()[i]);
        let x2 = x.d2.as_ref().map_or(0.0, |t| t.data()[i]);
        for k in 0..levels {
            let a = (1u64 << k) as f64 * PI;
            let (s, c) = (a * xv).sin_cos();
            let (js, jc) = (i * width + 2 * k, i * width + 2 * k + 1);
            v[js] = s;
            v[jc] = c;
            if let Some(d1) = d1.as_mut() {
                d1[js] = a * c * x1;
                d1[jc] = -a * s * x1;
            }
            if let Some(d2) = d2.as_mut() {
                d2[js] = -a * a * s * x1 * x1 + a * c * x2;
                d2[jc] = -a * a * c * x1 * x1 - a * s * x2;
            }
        }
    }
    let wrap = |d: Vec<f64>| DenseTensor::from_parts(vec![n, width], d);
    Jet {
        value: wrap(v),
        d1: d1.map(wrap),
        d2: d2.map(wrap),
    }
}

/// Sparse-as-dense interpolation matrices `[n, cells + 1]` for the value and
/// each derivative channel present in `x`. The coordinate is mapped to
/// `u = (x + 1) / 2` and clamped to `[0, 1]`.
fn interpolation_weights(x: &Jet<DenseTensor>, cells: usize) -> [Option<DenseTensor>; 3] {
    let n = x.value.len();
    let knots = cells + 1;
    let mut wv = vec![0.0; n * knots];
    let mut w1 = x.d1.as_ref().map(|_| vec![0.0; n * knots]);
    let mut w2 = x.d2.as_ref().map(|_| vec![0.0; n * knots]);
    for i in 0..n {
        let u = ((x.value.data()[i] + 1.0) * 0.5).clamp(0.0, 1.0);
        let pos = u * cells as f64;
        let cell = (pos.floor() as usize).min(cells - 1);
        let frac = pos - cell as f64;
        wv[i * knots + cell] = 1.0 - frac;
        wv[i * knots + cell + 1] = frac;
        // d(frac)/dx = cells / 2 inside a cell; second derivative vanishes
        let slope = cells as f64 * 0.5;
        if let Some(w1) = w1.as_mut() {
            let x1 = x.d1.as_ref().unwrap().data()[i];
            w1[i * knots + cell] = -slope * x1;
            w1[i * knots + cell + 1] = slope * x1;
        }
        if let Some(w2) = w2.as_mut() {
            let x2 = x.d2.as_ref().unwrap().data()[i];
            w2[i * knots + cell] = -slope * x2;
            w2[i * knots + cell + 1] = slope * x2;
        }
    }
    let wrap = |d: Vec<f64>| DenseTensor::from_parts(vec![n, knots], d);
    [Some(wrap(wv)), w1.map(wrap), w2.map(wrap)]
}
