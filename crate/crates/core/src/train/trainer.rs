use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Adam, Checkpoint, LossTerms, Objective, DEFAULT_LEARNING_RATE};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::model::FInrModel;
use crate::tasks::MetricRecord;

/// Stream of the training sampler; model initialization uses stream 0.
const SAMPLER_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Total optimizer steps; a resumed run continues up to this count.
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Metrics are recorded at step 0, every `log_interval` steps and at the end.
    pub log_interval: usize,
    /// Checkpoint hook cadence in steps.
    pub checkpoint_interval: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 50_000,
            lr: DEFAULT_LEARNING_RATE,
            seed: 0,
            log_interval: 100,
            checkpoint_interval: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.log_interval == 0 || self.checkpoint_interval == Some(0) {
            return Err(Error::Config("log and checkpoint intervals must be >= 1".into()));
        }
        Ok(())
    }
}

/// Callbacks invoked while training.
pub trait TrainHooks {
    /// `seconds` is the accumulated optimizer-step time so far.
    fn record(&mut self, _record: &MetricRecord, _seconds: f64) -> Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _trainer: &Trainer) -> Result<()> {
        Ok(())
    }
}

impl TrainHooks for () {}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<MetricRecord>,
    /// Total loss of every optimizer step taken in this run.
    pub step_losses: Vec<f64>,
    pub seconds: f64,
}

impl TrainReport {
    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }
}

/// Owns a model together with its optimizer and sampler state.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: FInrModel,
    adam: Adam,
    rng: ChaCha8Rng,
    step: usize,
    config: TrainConfig,
}

impl Trainer {
    pub fn new(model: FInrModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(config.lr, model.params());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SAMPLER_STREAM);
        Ok(Self {
            model,
            adam,
            rng,
            step: 0,
            config,
        })
    }

    /// Continues from a checkpoint; `config.steps` is the new step target.
    /// The learning rate stored with the optimizer wins over `config.lr`.
    pub fn resume(checkpoint: Checkpoint, mut config: TrainConfig) -> Result<Self> {
        config.lr = checkpoint.adam.lr;
        config.validate()?;
        let step = checkpoint.step as usize;
        let (model, adam, rng) = checkpoint.into_parts()?;
        Ok(Self {
            model,
            adam,
            rng,
            step,
            config,
        })
    }

    pub fn model(&self) -> &FInrModel {
        &self.model
    }

    pub fn into_model(self) -> FInrModel {
        self.model
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn set_steps(&mut self, steps: usize) -> Result<()> {
        if steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        self.config.steps = steps;
        Ok(())
    }

    pub fn checkpoint(&self, meta: impl Into<String>) -> Checkpoint {
        Checkpoint {
            spec: self.model.spec().clone(),
            params: self.model.params().clone(),
            adam: self.adam.clone(),
            rng: self.rng.clone(),
            step: self.step as u64,
            meta: meta.into(),
        }
    }

    /// Forward pass of `objective` at the current parameters into a fresh
    /// record holding the loss terms.
    fn forward(&self, objective: &dyn Objective, tape: &mut Tape, rng: &mut ChaCha8Rng) -> Result<(LossTerms, MetricRecord)> {
        let terms = objective.loss(tape, &self.model, rng)?;
        let value = |v: Option<crate::autodiff::Var>| v.map(|v| tape.scalar_value(v));
        let mut rec = MetricRecord::new(self.step, tape.scalar_value(terms.total));
        rec.loss_data = value(terms.data);
        rec.loss_eikonal = value(terms.eikonal);
        rec.loss_surface = value(terms.surface);
        rec.loss_pde = value(terms.pde);
        if !rec.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite {} loss {} at step {} (data {:?}, eikonal {:?}, surface {:?}, pde {:?})",
                objective.name(),
                rec.loss,
                self.step,
                rec.loss_data,
                rec.loss_eikonal,
                rec.loss_surface,
                rec.loss_pde
            )));
        }
        Ok((terms, rec))
    }

    /// Loss and task metrics at the current parameters, sampled from a copy
    /// of the sampler so training state is untouched.
    pub fn evaluate(&self, objective: &dyn Objective) -> Result<MetricRecord> {
        let mut rng = self.rng.clone();
        let mut tape = Tape::new();
        let (_, mut rec) = self.forward(objective, &mut tape, &mut rng)?;
        objective.evaluate(&self.model, &mut rec)?;
        Ok(rec)
    }

    /// One optimizer step; returns the loss terms seen before the update.
    pub fn train_step(&mut self, objective: &dyn Objective) -> Result<MetricRecord> {
        let mut tape = Tape::new();
        let mut rng = self.rng.clone();
        let (terms, rec) = self.forward(objective, &mut tape, &mut rng)?;
        self.rng = rng;
        tape.backward(terms.total, self.model.params_mut())?;
        self.adam.step(self.model.params_mut())?;
        self.step += 1;
        Ok(rec)
    }

    /// Trains until `config.steps`. Capability problems surface before any
    /// update.
    pub fn run(&mut self, objective: &dyn Objective, hooks: &mut dyn TrainHooks) -> Result<TrainReport> {
        objective.check(&self.model)?;
        let mut report = TrainReport::default();
        while self.step < self.config.steps {
            let logging = self.step % self.config.log_interval == 0;
            let mut metrics = MetricRecord::default();
            if logging {
                objective.evaluate(&self.model, &mut metrics)?;
            }
            let started = Instant::now();
            let mut rec = self.train_step(objective)?;
            report.seconds += started.elapsed().as_secs_f64();
            report.step_losses.push(rec.loss);
            if logging {
                rec.psnr = metrics.psnr;
                rec.ssim = metrics.ssim;
                rec.iou = metrics.iou;
                rec.mse = metrics.mse;
                rec.eikonal_error = metrics.eikonal_error;
                hooks.record(&rec, report.seconds)?;
                report.records.push(rec);
            }
            if let Some(every) = self.config.checkpoint_interval {
                if self.step % every == 0 {
                    hooks.checkpoint(self)?;
                }
            }
        }
        let last = self.evaluate(objective)?;
        hooks.record(&last, report.seconds)?;
        report.records.push(last);
        Ok(report)
    }
}
