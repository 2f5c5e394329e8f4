use super::*;
use crate::backends::{ActivationKind, Encoding, SubNetworkSpec};
use crate::error::Error;
use crate::model::{FInrModel, FInrSpec};
use crate::tasks::{synthetic_image, CollocationSampling, ImageTask, MetricRecord, PinnTask, Shape, SdfTask};
use crate::tensor::Mode;

fn sine() -> ActivationKind {
    ActivationKind::Sine { omega0: 30.0 }
}

fn image_setup(batch: usize) -> (FInrModel, ImageTask) {
    let target = synthetic_image(12, 12, 3, 2, 5).unwrap();
    let task = ImageTask::new(target, batch).unwrap();
    let net = SubNetworkSpec::new(sine(), 1).with_shape(2, 16);
    let spec = FInrSpec::new(Mode::Cp, 4, 3, net, ImageTask::domains()).unwrap();
    (FInrModel::init(spec, 1).unwrap(), task)
}

fn pinn_setup() -> (FInrModel, PinnTask) {
    let mut task = PinnTask::taylor_green([2, 4, 4], 16, 0.01).unwrap();
    task.sampling = CollocationSampling::Points;
    task.eval_shape = [3, 5, 5];
    let net = SubNetworkSpec::new(ActivationKind::Relu, 1)
        .with_encoding(Encoding::Fourier { levels: 2 })
        .with_shape(1, 8);
    let spec = FInrSpec::new(Mode::Tt, 2, 3, net, task.domains()).unwrap();
    (FInrModel::init(spec, 2).unwrap(), task)
}

fn config(steps: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        steps,
        lr,
        seed: 11,
        log_interval: 5,
        checkpoint_interval: None,
    }
}

fn metrics_only(r: &MetricRecord) -> [Option<f64>; 5] {
    [r.psnr, r.ssim, r.iou, r.mse, r.eikonal_error]
}

#[test]
fn zero_learning_rate_keeps_initial_metrics() {
    let (model, task) = image_setup(1 << 18);
    let mut t = Trainer::new(model.clone(), config(1, 0.0)).unwrap();
    let report = t.run(&task, &mut ()).unwrap();
    assert_eq!(report.records.len(), 2);
    assert_eq!(report.records[0].loss, report.records[1].loss);
    assert_eq!(metrics_only(&report.records[0]), metrics_only(&report.records[1]));
    assert_eq!(t.model().params(), model.params());
}

#[test]
fn same_seed_same_series() {
    for batch in [1 << 18, 50] {
        let (model, task) = image_setup(batch);
        let run = || Trainer::new(model.clone(), config(12, 1e-3)).unwrap().run(&task, &mut ()).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.records, b.records);
        assert_eq!(a.step_losses, b.step_losses);
        assert_eq!(a.records.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 5, 10, 12]);
    }
}

#[test]
fn image_loss_goes_down() {
    let (model, task) = image_setup(1 << 18);
    let report = Trainer::new(model, config(200, 1e-3)).unwrap().run(&task, &mut ()).unwrap();
    let first = report.records.first().unwrap();
    let last = report.last().unwrap();
    assert!(last.loss < 0.2 * first.loss, "{} -> {}", first.loss, last.loss);
    assert!(last.psnr.unwrap() > first.psnr.unwrap());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let (model, task) = pinn_setup();
    let mut t = Trainer::new(model, config(3, 1e-3)).unwrap();
    t.run(&task, &mut ()).unwrap();
    let bytes = t.checkpoint("task=pinn").to_bytes();
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(loaded.to_bytes(), bytes);
    assert_eq!(loaded.meta, "task=pinn");
    assert_eq!(loaded.step, 3);
    assert_eq!(loaded.model().unwrap().params(), t.model().params());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.finr");
    loaded.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(Checkpoint::load(&path).unwrap().to_bytes(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let (model, _) = pinn_setup();
    let bytes = Trainer::new(model, config(1, 1e-3)).unwrap().checkpoint("").to_bytes();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Version { found: 9, .. })));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    assert!(Checkpoint::from_bytes(&bytes[..2]).is_err());
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let (model, task) = pinn_setup();
    let mut full = Trainer::new(model.clone(), config(14, 1e-3)).unwrap();
    let full_report = full.run(&task, &mut ()).unwrap();

    let mut first = Trainer::new(model, config(7, 1e-3)).unwrap();
    first.run(&task, &mut ()).unwrap();
    let ck = Checkpoint::from_bytes(&first.checkpoint("").to_bytes()).unwrap();
    let mut second = Trainer::resume(ck, config(14, 1e-3)).unwrap();
    let second_report = second.run(&task, &mut ()).unwrap();

    assert_eq!(second.model().params(), full.model().params());
    assert_eq!(second.adam(), full.adam());
    assert_eq!(second_report.step_losses, full_report.step_losses[7..]);
    let tail: Vec<_> = full_report.records.iter().filter(|r| r.step >= 7).cloned().collect();
    assert_eq!(second_report.records, tail);
}

#[test]
fn capability_errors_come_before_any_step() {
    let task = SdfTask::new(Shape::SPHERE, 6).unwrap();
    let net = SubNetworkSpec::new(ActivationKind::Relu, 1)
        .with_encoding(Encoding::FeatureGrid {
            levels: 2,
            features: 2,
            base_resolution: 4,
            growth: 1.5,
        })
        .with_shape(1, 8);
    let spec = FInrSpec::new(Mode::Tt, 2, 1, net, task.domains()).unwrap();
    let mut t = Trainer::new(FInrModel::init(spec, 0).unwrap(), config(3, 1e-3)).unwrap();
    assert!(matches!(t.run(&task, &mut ()), Err(Error::Capability(_))));
    assert_eq!(t.step(), 0);

    let (model, _) = image_setup(64);
    let mut t = Trainer::new(model, config(3, 1e-3)).unwrap();
    let (_, pinn) = pinn_setup();
    assert!(matches!(t.run(&pinn, &mut ()), Err(Error::Config(_))));
}

#[test]
fn non_finite_loss_aborts() {
    let (mut model, task) = image_setup(1 << 18);
    let joint = model.joint();
    model.params_mut().get_mut(joint).value.data_mut()[0] = f64::NAN;
    let mut t = Trainer::new(model, config(3, 1e-3)).unwrap();
    let err = t.run(&task, &mut ()).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn checkpoint_hook_fires_on_schedule() {
    struct Count(Vec<usize>);
    impl TrainHooks for Count {
        fn checkpoint(&mut self, t: &Trainer) -> crate::Result<()> {
            self.0.push(t.step());
            Ok(())
        }
    }
    let (model, task) = image_setup(1 << 18);
    let mut cfg = config(7, 1e-3);
    cfg.checkpoint_interval = Some(3);
    let mut hooks = Count(Vec::new());
    Trainer::new(model, cfg).unwrap().run(&task, &mut hooks).unwrap();
    assert_eq!(hooks.0, [3, 6]);
}

#[test]
fn invalid_configs() {
    let (model, _) = image_setup(8);
    assert!(Trainer::new(model.clone(), config(0, 1e-3)).is_err());
    assert!(Trainer::new(model.clone(), config(1, f64::NAN)).is_err());
    let mut c = config(1, 1e-3);
    c.log_interval = 0;
    assert!(Trainer::new(model, c).is_err());
}
