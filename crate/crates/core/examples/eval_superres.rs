//! Renders a briefly trained image model at its training resolution and at
//! 4× that resolution; the representation is continuous, so any grid works.
//!
//! cargo run --release --example eval_superres

use finr::backends::{ActivationKind, SubNetworkSpec};
use finr::model::{FInrModel, FInrSpec};
use finr::tasks::{psnr, synthetic_image, ImageTask};
use finr::tensor::Mode;
use finr::train::{render_image, TrainConfig, Trainer};

fn main() -> finr::Result<()> {
    let task = ImageTask::new(synthetic_image(32, 32, 1, 3, 4)?, 1 << 18)?;
    let net = SubNetworkSpec::new(ActivationKind::Sine { omega0: 30.0 }, 1).with_shape(3, 64);
    let model = FInrModel::init(FInrSpec::new(Mode::Cp, 8, 1, net, ImageTask::domains())?, 0)?;
    let mut trainer = Trainer::new(
        model,
        TrainConfig {
            steps: 400,
            lr: 5e-4,
            log_interval: 400,
            ..TrainConfig::default()
        },
    )?;
    trainer.run(&task, &mut ())?;

    let native = render_image(trainer.model(), 32, 32)?;
    println!("PSNR at 32x32: {:.2} dB", psnr(&native.map(|v| v.clamp(0.0, 1.0)), &task.target, 1.0)?);
    let fine = render_image(trainer.model(), 128, 128)?;
    // the 128-point grid shares its corner samples with the 32-point grid
    println!(
        "128x128 render {:?}: corners match native ({:.1e}, {:.1e})",
        fine.shape(),
        (fine.get(&[0, 0, 0]) - native.get(&[0, 0, 0])).abs(),
        (fine.get(&[127, 127, 0]) - native.get(&[31, 31, 0])).abs()
    );
    Ok(())
}
