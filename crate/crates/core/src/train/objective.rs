use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::FInrModel;
use crate::tasks::{
    check_pinn_capability, eikonal_error, image_loss, iou, mse, pinn_loss, psnr_from_mse, sdf_loss, ssim, ImageTask,
    MetricRecord, PinnTask, SdfTask,
};
use crate::tensor::DenseTensor;

/// Loss nodes built for one step. `total` is what gets differentiated.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub data: Option<Var>,
    pub eikonal: Option<Var>,
    pub surface: Option<Var>,
    pub pde: Option<Var>,
}

impl LossTerms {
    fn total_only(total: Var) -> Self {
        Self {
            total,
            data: None,
            eikonal: None,
            surface: None,
            pde: None,
        }
    }
}

/// A training objective over a factorized model.
pub trait Objective {
    fn name(&self) -> &'static str;

    /// Fails with a capability or config error when `model` cannot serve the
    /// task (wrong dimensionality, missing jet orders, banned encodings).
    fn check(&self, model: &FInrModel) -> Result<()>;

    /// Records one step's loss on `tape`, drawing any samples from `rng`.
    fn loss(&self, tape: &mut Tape, model: &FInrModel, rng: &mut ChaCha8Rng) -> Result<LossTerms>;

    /// Fills the task metrics of `record` for the current parameters.
    fn evaluate(&self, model: &FInrModel, record: &mut MetricRecord) -> Result<()>;
}

fn check_shape(model: &FInrModel, dims: usize, channels: usize, task: &str) -> Result<()> {
    let spec = model.spec();
    if spec.dims() != dims || spec.channels != channels {
        return Err(Error::Config(format!(
            "{task} needs a {dims}-axis model with {channels} channel(s), got {} axes and {} channel(s)",
            spec.dims(),
            spec.channels
        )));
    }
    Ok(())
}

/// Model output on the image grid, `[H, W, C]`, unclamped.
pub fn render_image(model: &FInrModel, height: usize, width: usize) -> Result<DenseTensor> {
    Ok(model.eval_grid(&ImageTask::coords_for(height, width), 0)?.value)
}

impl Objective for ImageTask {
    fn name(&self) -> &'static str {
        "image"
    }

    fn check(&self, model: &FInrModel) -> Result<()> {
        check_shape(model, 2, self.channels(), "image fitting")?;
        let domains = model.spec().domains.clone();
        if domains != Self::domains() {
            return Err(Error::Config(format!("image models live on the unit square, got {domains:?}")));
        }
        Ok(())
    }

    /// Full grid when it fits in one batch, otherwise pixels sampled with
    /// replacement and composed point by point.
    fn loss(&self, tape: &mut Tape, model: &FInrModel, rng: &mut ChaCha8Rng) -> Result<LossTerms> {
        let target = self.target_matrix();
        let (pred, target) = if self.pixels() <= self.batch_size {
            let field = model.grid_on_tape(tape, &self.coords(), &[0, 0])?;
            (field.value, tape.constant(target))
        } else {
            let coords = self.coords();
            let c = self.channels();
            let idx: Vec<usize> = (0..self.batch_size).map(|_| rng.gen_range(0..self.pixels())).collect();
            let points: Vec<Vec<f64>> = idx.iter().map(|&i| vec![coords[0][i / self.width()], coords[1][i % self.width()]]).collect();
            let rows: Vec<f64> = idx.iter().flat_map(|&i| target.row(i).iter().copied()).collect();
            let field = model.points_on_tape(tape, &points, &[0, 0])?;
            (field.value, tape.constant(DenseTensor::new(vec![idx.len(), c], rows)?))
        };
        let l = image_loss(tape, pred, target)?;
        Ok(LossTerms {
            data: Some(l),
            ..LossTerms::total_only(l)
        })
    }

    /// PSNR, SSIM and MSE of the reconstruction clamped to `[0, 1]`.
    fn evaluate(&self, model: &FInrModel, record: &mut MetricRecord) -> Result<()> {
        let recon = render_image(model, self.height(), self.width())?.map(|v| v.clamp(0.0, 1.0));
        let e = mse(&recon, &self.target)?;
        record.mse = Some(e);
        record.psnr = Some(psnr_from_mse(e, 1.0));
        if self.height() >= 11 && self.width() >= 11 {
            record.ssim = Some(ssim(&recon, &self.target)?);
        }
        Ok(())
    }
}

/// SDF quality numbers on the training grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfEvaluation {
    /// Occupancy IoU of the zero sublevel sets.
    pub iou: f64,
    /// MSE against the truncated target.
    pub mse: f64,
    /// Mean `|‖∇Ψ‖ − 1|` where the target is not clamped.
    pub eikonal_unclamped: f64,
    /// Mean `|‖∇Ψ‖ − 1|` over every grid vertex.
    pub eikonal_domain: f64,
}

impl SdfTask {
    pub fn evaluate_model(&self, model: &FInrModel) -> Result<SdfEvaluation> {
        let field = model.eval_grid(&self.coords(), 1)?;
        let truth = self.truth();
        let pred = field.value.clone().reshape(truth.shape())?;
        let partials: Vec<&DenseTensor> = field
            .partials
            .iter()
            .map(|p| p.as_ref().ok_or_else(|| Error::Capability("SDF evaluation needs first derivatives".into())))
            .collect::<Result<_>>()?;
        let unclamped = self.unclamped_indices();
        Ok(SdfEvaluation {
            iou: iou(&pred, truth, 0.0)?,
            mse: mse(&pred, truth)?,
            eikonal_unclamped: eikonal_error(&partials, Some(&unclamped))?,
            eikonal_domain: eikonal_error(&partials, None)?,
        })
    }
}

impl Objective for SdfTask {
    fn name(&self) -> &'static str {
        "sdf"
    }

    fn check(&self, model: &FInrModel) -> Result<()> {
        check_shape(model, 3, 1, "SDF fitting")?;
        for (k, net) in model.spec().axes.iter().enumerate() {
            if net.encoding.is_piecewise_linear() {
                return Err(Error::Capability(format!(
                    "axis {k}: feature-grid encodings are not supported for SDF fitting"
                )));
            }
            if net.max_jet_order() < 1 {
                return Err(Error::Capability(format!("axis {k} cannot deliver first derivatives")));
            }
        }
        Ok(())
    }

    fn loss(&self, tape: &mut Tape, model: &FInrModel, _rng: &mut ChaCha8Rng) -> Result<LossTerms> {
        let field = model.grid_on_tape(tape, &self.coords(), &[1, 1, 1])?;
        let truth = self.truth();
        let truth = tape.constant(truth.clone().reshape(&[truth.len(), 1])?);
        let l = sdf_loss(tape, &field, truth, &self.band_indices(), &self.weights)?;
        Ok(LossTerms {
            total: l.total,
            data: Some(l.data),
            eikonal: Some(l.eikonal),
            surface: l.surface,
            pde: None,
        })
    }

    fn evaluate(&self, model: &FInrModel, record: &mut MetricRecord) -> Result<()> {
        let e = self.evaluate_model(model)?;
        record.iou = Some(e.iou);
        record.mse = Some(e.mse);
        record.eikonal_error = Some(e.eikonal_domain);
        Ok(())
    }
}

impl Objective for PinnTask {
    fn name(&self) -> &'static str {
        "pinn"
    }

    fn check(&self, model: &FInrModel) -> Result<()> {
        check_pinn_capability(model)?;
        if model.spec().domains != self.domains() {
            return Err(Error::Config(format!(
                "model domains {:?} differ from the task's {:?}",
                model.spec().domains,
                self.domains()
            )));
        }
        Ok(())
    }

    fn loss(&self, tape: &mut Tape, model: &FInrModel, rng: &mut ChaCha8Rng) -> Result<LossTerms> {
        let colloc = self.sampling.sample(&self.domains(), self.collocation, rng)?;
        let l = pinn_loss(tape, model, self, &colloc)?;
        Ok(LossTerms {
            data: Some(l.data),
            pde: Some(l.pde),
            ..LossTerms::total_only(l.total)
        })
    }

    /// `mse` is the ω error on the fine evaluation grid.
    fn evaluate(&self, model: &FInrModel, record: &mut MetricRecord) -> Result<()> {
        record.mse = Some(self.vorticity_mse(model)?);
        Ok(())
    }
}
