//! Fits the truncated signed distance of a sphere with TT-composed sine
//! sub-networks under the Eikonal-regularized loss.
//!
//! cargo run --release --example fit_sdf -- [steps] [resolution]

use finr::backends::{ActivationKind, SubNetworkSpec};
use finr::model::{FInrModel, FInrSpec};
use finr::tasks::{MetricRecord, SdfTask, Shape};
use finr::tensor::Mode;
use finr::train::{TrainConfig, TrainHooks, Trainer};

struct Progress;

impl TrainHooks for Progress {
    fn record(&mut self, r: &MetricRecord, seconds: f64) -> finr::Result<()> {
        println!(
            "step {:>5}  loss {:.3e}  IoU {:.4}  |grad|-1 {:.4}  ({seconds:.1}s)",
            r.step,
            r.loss,
            r.iou.unwrap_or(f64::NAN),
            r.eikonal_error.unwrap_or(f64::NAN)
        );
        Ok(())
    }
}

fn main() -> finr::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(600, |s| s.parse().expect("steps"));
    let n = args.next().map_or(24, |s| s.parse().expect("resolution"));

    let task = SdfTask::new(Shape::SPHERE, n)?;
    let net = SubNetworkSpec::new(ActivationKind::Sine { omega0: 30.0 }, 1);
    let spec = FInrSpec::new(Mode::Tt, 32, 1, net, task.domains())?;
    let config = TrainConfig {
        steps,
        log_interval: 100,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(FInrModel::init(spec, 0)?, config)?;
    trainer.run(&task, &mut Progress)?;
    let e = task.evaluate_model(trainer.model())?;
    println!(
        "final: IoU {:.4}, MSE {:.2e}, Eikonal error {:.4} (domain) / {:.4} (unclamped)",
        e.iou, e.mse, e.eikonal_domain, e.eikonal_unclamped
    );
    Ok(())
}
