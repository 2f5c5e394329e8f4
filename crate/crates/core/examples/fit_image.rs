//! Fits a 64×64 band-limited synthetic image with CP-composed sine
//! sub-networks and writes the reconstruction and an 8× error map.
//!
//! cargo run --release --example fit_image -- [steps] [out_dir]

use std::path::PathBuf;

use finr::backends::{ActivationKind, SubNetworkSpec};
use finr::cli::render::{error_map, save_png};
use finr::model::{FInrModel, FInrSpec};
use finr::tasks::{synthetic_image, ImageTask, MetricRecord};
use finr::tensor::Mode;
use finr::train::{render_image, TrainConfig, TrainHooks, Trainer};

struct Progress;

impl TrainHooks for Progress {
    fn record(&mut self, r: &MetricRecord, seconds: f64) -> finr::Result<()> {
        println!(
            "step {:>5}  loss {:.3e}  PSNR {:6.2} dB  SSIM {:.4}  ({seconds:.1}s)",
            r.step,
            r.loss,
            r.psnr.unwrap_or(f64::NAN),
            r.ssim.unwrap_or(f64::NAN)
        );
        Ok(())
    }
}

fn main() -> finr::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(1000, |s| s.parse().expect("steps"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/example_image".into()));
    std::fs::create_dir_all(&out)?;

    let task = ImageTask::new(synthetic_image(64, 64, 3, 6, 0)?, 1 << 18)?;
    let net = SubNetworkSpec::new(ActivationKind::Sine { omega0: 30.0 }, 1);
    let spec = FInrSpec::new(Mode::Cp, 16, 3, net, ImageTask::domains())?;
    let model = FInrModel::init(spec, 0)?;
    println!("{} parameters for {} pixel values", model.param_count(), task.target.len());

    let config = TrainConfig {
        steps,
        log_interval: 250,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, config)?;
    trainer.run(&task, &mut Progress)?;

    let recon = render_image(trainer.model(), 64, 64)?.map(|v| v.clamp(0.0, 1.0));
    save_png(&out.join("reconstruction.png"), &recon)?;
    save_png(&out.join("error_map.png"), &error_map(&recon, &task.target)?)?;
    save_png(&out.join("target.png"), &task.target)?;
    println!("images written to {}", out.display());
    Ok(())
}
