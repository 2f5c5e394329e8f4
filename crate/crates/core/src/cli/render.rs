use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{shape_err, Error, Result};
use crate::tensor::ftnr::{self, Dtype};
use crate::tensor::DenseTensor;

/// Gain applied to absolute errors before they are drawn.
pub const ERROR_GAIN: f64 = 8.0;

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `clamp(8·|pred − truth|, 0, 1)` elementwise.
pub fn error_map(pred: &DenseTensor, truth: &DenseTensor) -> Result<DenseTensor> {
    if pred.shape() != truth.shape() {
        return Err(shape_err!("error map of {:?} against {:?}", pred.shape(), truth.shape()));
    }
    let data = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(p, t)| (ERROR_GAIN * (p - t).abs()).clamp(0.0, 1.0))
        .collect();
    DenseTensor::new(pred.shape().to_vec(), data)
}

/// Writes an `H × W` or `H × W × {1,3}` tensor with values in `[0, 1]` as an
/// 8-bit PNG, plus the lossless FTNR dump next to it.
pub fn save_png(path: &Path, img: &DenseTensor) -> Result<()> {
    let s = img.shape();
    let (h, w, c) = match s {
        [h, w] => (*h, *w, 1),
        [h, w, c] if *c == 1 || *c == 3 => (*h, *w, *c),
        _ => return Err(shape_err!("cannot draw a tensor of shape {s:?}")),
    };
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let (w32, h32) = (w as u32, h as u32);
    if c == 1 {
        GrayImage::from_raw(w32, h32, bytes)
            .ok_or_else(|| Error::Input("image buffer size mismatch".into()))?
            .save(path)?;
    } else {
        RgbImage::from_raw(w32, h32, bytes)
            .ok_or_else(|| Error::Input("image buffer size mismatch".into()))?
            .save(path)?;
    }
    ftnr::save(path.with_extension("ftnr"), img, Dtype::F64)
}

/// Reads an 8-bit PNG into `[H, W, C]` with values in `[0, 1]`; grayscale
/// stays single-channel, anything else becomes RGB.
pub fn load_png(path: &Path) -> Result<DenseTensor> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (c, raw) = match img.color() {
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16 => {
            (1, img.to_luma8().into_raw())
        }
        _ => (3, img.to_rgb8().into_raw()),
    };
    DenseTensor::new(vec![h, w, c], raw.into_iter().map(|b| b as f64 / 255.0).collect())
}

/// Maps `[lo, hi]` linearly onto `[0, 1]`.
pub fn normalize(t: &DenseTensor, lo: f64, hi: f64) -> DenseTensor {
    t.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Places equally tall `H × W` planes side by side.
pub fn hstack(planes: &[&DenseTensor]) -> Result<DenseTensor> {
    let h = planes.first().map(|p| p.shape()[0]).unwrap_or(0);
    if planes.iter().any(|p| p.ndim() != 2 || p.shape()[0] != h) {
        return Err(shape_err!("hstack needs equally tall H × W planes"));
    }
    let w: usize = planes.iter().map(|p| p.shape()[1]).sum();
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        for p in planes {
            out.extend_from_slice(p.row(i));
        }
    }
    DenseTensor::new(vec![h, w], out)
}
