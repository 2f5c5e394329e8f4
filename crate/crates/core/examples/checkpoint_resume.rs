//! Trains part way, checkpoints to disk, resumes, and confirms the result
//! is bit-identical to an uninterrupted run.
//!
//! cargo run --release --example checkpoint_resume

use finr::backends::{ActivationKind, SubNetworkSpec};
use finr::model::{FInrModel, FInrSpec};
use finr::tasks::{synthetic_image, ImageTask};
use finr::tensor::Mode;
use finr::train::{Checkpoint, TrainConfig, Trainer};

fn main() -> finr::Result<()> {
    let task = ImageTask::new(synthetic_image(32, 32, 3, 4, 1)?, 256)?;
    let net = SubNetworkSpec::new(ActivationKind::Sine { omega0: 30.0 }, 1).with_shape(3, 64);
    let model = FInrModel::init(FInrSpec::new(Mode::Cp, 8, 3, net, ImageTask::domains())?, 3)?;
    let config = |steps| TrainConfig {
        steps,
        seed: 9,
        log_interval: 50,
        ..TrainConfig::default()
    };

    let mut straight = Trainer::new(model.clone(), config(200))?;
    let full = straight.run(&task, &mut ())?;

    let dir = std::env::temp_dir().join("finr_checkpoint_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("half.finr");
    let mut first = Trainer::new(model, config(120))?;
    first.run(&task, &mut ())?;
    first.checkpoint("example").save(&path)?;
    let mut resumed = Trainer::resume(Checkpoint::load(&path)?, config(200))?;
    let tail = resumed.run(&task, &mut ())?;

    let same = resumed.model().params() == straight.model().params();
    println!("final loss uninterrupted {:?}, resumed {:?}", full.last().unwrap().loss, tail.last().unwrap().loss);
    println!("parameters bit-identical after resume: {same}");
    println!("checkpoint size: {} bytes", std::fs::metadata(&path)?.len());
    Ok(())
}
