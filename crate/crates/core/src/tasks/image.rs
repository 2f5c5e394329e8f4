use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::model::linspace;
use crate::tensor::DenseTensor;

/// Default pixel batch per step (clipped to the image size).
pub const DEFAULT_IMAGE_BATCH: usize = 1 << 18;

/// Fit an `H × W × C` image with values in `[0, 1]` over the unit square.
/// Axis 0 runs down the rows, axis 1 across the columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTask {
    pub target: DenseTensor,
    pub batch_size: usize,
}

impl ImageTask {
    pub fn new(target: DenseTensor, batch_size: usize) -> Result<Self> {
        let s = target.shape();
        if s.len() != 3 || !(s[2] == 1 || s[2] == 3) {
            return Err(Error::Input(format!("image target must be H×W×{{1,3}}, got {s:?}")));
        }
        if target.data().iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("image values must be finite and in [0, 1]".into()));
        }
        if batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(Self { target, batch_size })
    }

    pub fn height(&self) -> usize {
        self.target.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.target.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.target.shape()[2]
    }

    pub fn pixels(&self) -> usize {
        self.height() * self.width()
    }

    /// Effective batch: the configured size clipped to the pixel count.
    pub fn effective_batch(&self) -> usize {
        self.batch_size.min(self.pixels())
    }

    pub fn domains() -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    /// Sample coordinates for an `h × w` rendering; the first and last pixel
    /// of each axis sit on the square's edges.
    pub fn coords_for(h: usize, w: usize) -> Vec<Vec<f64>> {
        vec![linspace(0.0, 1.0, h), linspace(0.0, 1.0, w)]
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        Self::coords_for(self.height(), self.width())
    }

    /// Target as a `[H·W, C]` matrix (row-major pixel order).
    pub fn target_matrix(&self) -> DenseTensor {
        self.target.clone().reshape(&[self.pixels(), self.channels()]).unwrap()
    }
}

/// Band-limited test image: a constant plus `waves` coloured plane waves
/// with integer frequencies, rescaled into `[0.05, 0.95]`. With `w` waves the
/// image has separation rank at most `2w + 1`.
pub fn synthetic_image(h: usize, w: usize, channels: usize, waves: usize, seed: u64) -> Result<DenseTensor> {
    if h == 0 || w == 0 || !(channels == 1 || channels == 3) {
        return Err(Error::Input(format!("cannot synthesize a {h}×{w}×{channels} image")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let components: Vec<([f64; 3], f64, f64, f64)> = (0..waves)
        .map(|_| {
            let color = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let fy = rng.gen_range(1..=4) as f64;
            let fx = rng.gen_range(-4..=4) as f64;
            let phase = rng.gen_range(0.0..2.0 * PI);
            (color, fy, fx, phase)
        })
        .collect();
    let ys = linspace(0.0, 1.0, h);
    let xs = linspace(0.0, 1.0, w);
    let mut img = DenseTensor::from_fn(&[h, w, channels], |i| {
        components
            .iter()
            .map(|(color, fy, fx, phase)| color[i[2]] * (2.0 * PI * (fy * ys[i[0]] + fx * xs[i[1]]) + phase).sin())
            .sum()
    })?;
    let peak = img.max_abs();
    let scale = if peak > 0.0 { 0.45 / peak } else { 0.0 };
    for v in img.data_mut() {
        *v = 0.5 + scale * *v;
    }
    Ok(img)
}

/// Mean squared error between matching `[P, C]` predictions and targets.
pub fn image_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(shape_err!(
            "prediction {:?} does not match target {:?}",
            tape.shape(pred),
            tape.shape(target)
        ));
    }
    tape.mse(pred, target)
}

pub fn mse(pred: &DenseTensor, target: &DenseTensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("mse of {:?} against {:?}", pred.shape(), target.shape()));
    }
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.len() as f64)
}

/// `10·log10(peak² / mse)`; `f64::INFINITY` flags a perfect match.
pub fn psnr(pred: &DenseTensor, target: &DenseTensor, peak: f64) -> Result<f64> {
    let e = mse(pred, target)?;
    Ok(psnr_from_mse(e, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - c;
        *t = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Mean structural similarity over all full 11×11 windows (σ = 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1), averaged over channels.
/// Accepts `H × W` or `H × W × C` tensors.
pub fn ssim(pred: &DenseTensor, target: &DenseTensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("ssim of {:?} against {:?}", pred.shape(), target.shape()));
    }
    let s = pred.shape();
    let (h, w, c) = match s.len() {
        2 => (s[0], s[1], 1),
        3 => (s[0], s[1], s[2]),
        _ => return Err(shape_err!("ssim expects an image, got {s:?}")),
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Input(format!("image {h}×{w} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} window")));
    }
    let taps = ssim_taps();
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for ch in 0..c {
        let plane = |t: &DenseTensor| -> Vec<f64> { (0..h * w).map(|i| t.data()[i * c + ch]).collect() };
        let (x, y) = (plane(pred), plane(target));
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter(p, h, w, &taps));
        let mut sum = 0.0;
        for i in 0..oh * ow {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / (oh * ow) as f64;
    }
    Ok(total / c as f64)
}

/// Separable valid-mode Gaussian filter of an `h × w` plane.
fn filter(p: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = taps.iter().enumerate().map(|(k, t)| t * p[i * w + j + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = taps.iter().enumerate().map(|(k, t)| t * rows[(i + k) * ow + j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_closed_forms() {
        let t = DenseTensor::zeros(&[10, 10]).unwrap();
        assert_eq!(psnr(&t, &t, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr_from_mse(0.01, 1.0), 20.0);
        assert_eq!(psnr_from_mse(1e-4, 1.0), 40.0);
        let p = DenseTensor::filled(&[10, 10], 0.1).unwrap();
        assert!((psnr(&p, &t, 1.0).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_negative() {
        let img = synthetic_image(24, 20, 1, 4, 3).unwrap();
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
        let neg = img.map(|v| 1.0 - v);
        assert!(ssim(&img, &neg).unwrap() < 0.0);
        let small = DenseTensor::zeros(&[10, 12]).unwrap();
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn synthetic_image_is_deterministic_and_in_range() {
        let a = synthetic_image(16, 16, 3, 6, 9).unwrap();
        assert_eq!(a, synthetic_image(16, 16, 3, 6, 9).unwrap());
        assert_ne!(a, synthetic_image(16, 16, 3, 6, 10).unwrap());
        assert!(a.data().iter().all(|v| (0.05 - 1e-12..=0.95 + 1e-12).contains(v)));
    }

    #[test]
    fn image_loss_values() {
        let mut tape = Tape::new();
        let zero = tape.constant(DenseTensor::zeros(&[4, 3]).unwrap());
        let one = tape.constant(DenseTensor::ones(&[4, 3]).unwrap());
        let l = image_loss(&mut tape, zero, one).unwrap();
        assert_eq!(tape.scalar_value(l), 1.0);
        let l = image_loss(&mut tape, one, one).unwrap();
        assert_eq!(tape.scalar_value(l), 0.0);
        let bad = tape.constant(DenseTensor::zeros(&[3, 3]).unwrap());
        assert!(image_loss(&mut tape, bad, one).is_err());
    }

    #[test]
    fn task_validation() {
        assert!(ImageTask::new(DenseTensor::filled(&[4, 4, 2], 0.5).unwrap(), 8).is_err());
        assert!(ImageTask::new(DenseTensor::filled(&[4, 4, 1], 1.5).unwrap(), 8).is_err());
        let t = ImageTask::new(DenseTensor::filled(&[4, 5, 3], 0.5).unwrap(), 1 << 18).unwrap();
        assert_eq!(t.effective_batch(), 20);
    }
}
