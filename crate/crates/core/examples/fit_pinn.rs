//! Super-resolves the decaying Taylor-Green vortex from a coarse
//! observation grid plus the vorticity-form Navier-Stokes residual.
//!
//! cargo run --release --example fit_pinn -- [steps]

use finr::backends::{ActivationKind, Encoding, SubNetworkSpec};
use finr::model::{FInrModel, FInrSpec};
use finr::tasks::{MetricRecord, PinnTask};
use finr::tensor::Mode;
use finr::train::{TrainConfig, TrainHooks, Trainer};

struct Progress;

impl TrainHooks for Progress {
    fn record(&mut self, r: &MetricRecord, seconds: f64) -> finr::Result<()> {
        println!(
            "step {:>5}  data {:.3e}  pde {:.3e}  vorticity MSE {:.3e}  ({seconds:.1}s)",
            r.step,
            r.loss_data.unwrap_or(f64::NAN),
            r.loss_pde.unwrap_or(f64::NAN),
            r.mse.unwrap_or(f64::NAN)
        );
        Ok(())
    }
}

fn main() -> finr::Result<()> {
    let steps = std::env::args().nth(1).map_or(600, |s| s.parse().expect("steps"));
    let mut task = PinnTask::taylor_green([6, 32, 32], 20_000, 0.01)?;
    task.eval_shape = [51, 64, 64];
    let net = SubNetworkSpec::new(ActivationKind::Relu, 1).with_encoding(Encoding::Fourier { levels: 2 });
    let spec = FInrSpec::new(Mode::Tt, 32, 3, net, task.domains())?;
    let config = TrainConfig {
        steps,
        lr: 1e-3,
        log_interval: 100,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(FInrModel::init(spec, 0)?, config)?;
    trainer.run(&task, &mut Progress)?;
    Ok(())
}
