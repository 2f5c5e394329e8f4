//! Command implementations and their config keys.
//!
//! `[run]` (training commands): `steps` (50000), `lr` (1e-4), `seed` (0),
//! `log_interval` (100), `checkpoint_interval` (off), `resume` (checkpoint
//! path). `bench` and `eval` only read `seed`.
//!
//! `[model]`: `mode` (cp | tt | tucker), `rank`, `ranks` (comma list, one per
//! composition rank), `activation` (relu, tanh, sine:w0, gabor:w0,s0,
//! finer:w0,k, gaussian:s), `encoding` (none, fourier:L,
//! featuregrid:L,F,base,growth), `layers` (4), `width` (256). Defaults per
//! task: image CP 256 sine, SDF TT 128 sine, PINN TT 128 relu with
//! fourier:2.
//!
//! `[image]`: `source` (`synthetic` or a PNG path relative to the config),
//! `height`, `width` (64), `channels` (3), `waves` (6), `image_seed` (0),
//! `batch` (262144).
//!
//! `[sdf]`: `shape` (sphere | torus | two-spheres), `resolution` (48),
//! `truncation` (0.1), `eikonal_weight` (0.1), `data_weight` (1),
//! `surface_weight` (3), `oracle` (a shape name: skip training and score the
//! analytic field of that shape instead).
//!
//! `[pinn]`: `viscosity` (0.01), `observations` (10x64x64), `collocation`
//! (20000), `sampling` (grid | points), `eval` (51x64x64), `data_weight` (1),
//! `pde_weight` (1).
//!
//! `[bench]`: `n` (64,128,256,512), `dims` (2), `modes` (cp), `ranks` (64),
//! `width` (256), `layers` (4), `activation` (relu), `monolithic` (true),
//! `reps` (5), `warmup` (1), `min_seconds` (0.25, keep repeating cheap
//! measurements until they add up to this), `chunk` (8192).
//!
//! `[eval]`: `checkpoint` (required), `grid` (extents such as 128x128,
//! required), `bounds` (optional `lo:hi` per axis; values outside the model
//! domain are clamped with a warning).

use std::path::PathBuf;

use super::render::{error_map, hstack, load_png, normalize};
use super::{Config, RunContext};
use crate::autodiff::Tape;
use crate::backends::SubNetworkSpec;
use crate::bench::{run_bench, BenchSettings};
use crate::error::{Error, Result};
use crate::model::{linspace, parse_activation, parse_encoding, Architecture, FInrModel, FInrSpec, Field};
use crate::tasks::{
    iou, metrics_csv, mse, sdf_grid, sdf_loss, synthetic_image, truncate_sdf, CollocationSampling, ImageTask,
    MetricRecord, PinnTask, SdfTask, SdfWeights, Shape, DEFAULT_IMAGE_BATCH, DEFAULT_TRUNCATION,
    DEFAULT_VISCOSITY,
};
use crate::tensor::{DenseTensor, Mode};
use crate::train::{render_image, Checkpoint, Objective, TrainConfig, TrainHooks, Trainer, DEFAULT_LEARNING_RATE};

struct ModelDefaults {
    mode: Mode,
    rank: usize,
    activation: &'static str,
    encoding: &'static str,
}

fn model_spec(cfg: &Config, d: &ModelDefaults, channels: usize, domains: Vec<(f64, f64)>) -> Result<FInrSpec> {
    let mode: Mode = cfg.get_or("model", "mode", d.mode)?;
    let rank: usize = cfg.get_or("model", "rank", d.rank)?;
    let ranks: Option<Vec<usize>> = cfg.list("model", "ranks")?;
    let activation = parse_activation(cfg.raw("model", "activation").unwrap_or(d.activation))?;
    let encoding = parse_encoding(cfg.raw("model", "encoding").unwrap_or(d.encoding))?;
    let layers = cfg.get_or("model", "layers", 4usize)?;
    let width = cfg.get_or("model", "width", 256usize)?;
    let net = SubNetworkSpec::new(activation, 1).with_encoding(encoding).with_shape(layers, width);
    match ranks {
        Some(r) => FInrSpec::with_ranks(mode, r, channels, net, domains),
        None => FInrSpec::new(mode, rank, channels, net, domains),
    }
}

fn train_config(ctx: &RunContext) -> Result<(TrainConfig, Option<PathBuf>)> {
    let c = &ctx.config;
    let config = TrainConfig {
        steps: c.get_or("run", "steps", 50_000usize)?,
        lr: c.get_or("run", "lr", DEFAULT_LEARNING_RATE)?,
        seed: ctx.seed,
        log_interval: c.get_or("run", "log_interval", 100usize)?,
        checkpoint_interval: c.get("run", "checkpoint_interval")?,
    };
    config.validate()?;
    Ok((config, c.raw("run", "resume").map(|p| ctx.resolve(p))))
}

struct Recorder {
    records: Vec<MetricRecord>,
    timing: String,
    checkpoint: PathBuf,
    meta: String,
}

impl TrainHooks for Recorder {
    fn record(&mut self, r: &MetricRecord, seconds: f64) -> Result<()> {
        eprintln!("step {:>7}  loss {:.6e}  {:.1}s", r.step, r.loss, seconds);
        self.timing += &format!("{},{seconds:?}\n", r.step);
        self.records.push(r.clone());
        Ok(())
    }

    fn checkpoint(&mut self, t: &Trainer) -> Result<()> {
        t.checkpoint(self.meta.clone()).save(&self.checkpoint)
    }
}

/// Trains, then writes metrics, timing and the final checkpoint. Partial
/// metrics are still written when training aborts.
fn train(ctx: &mut RunContext, model: FInrModel, objective: &dyn Objective) -> Result<Trainer> {
    let (config, resume) = train_config(ctx)?;
    ctx.config.finish()?;
    let meta = format!("task = {}\n{}", objective.name(), ctx.config.to_text());
    let mut trainer = match resume {
        Some(path) => {
            let ck = Checkpoint::load(&path)?;
            if ck.spec != *model.spec() {
                return Err(Error::Config(format!("checkpoint {} holds a different model spec", path.display())));
            }
            Trainer::resume(ck, config)?
        }
        None => Trainer::new(model, config)?,
    };
    let mut rec = Recorder {
        records: Vec::new(),
        timing: "step,seconds\n".into(),
        checkpoint: ctx.path("checkpoint.finr"),
        meta: meta.clone(),
    };
    let result = trainer.run(objective, &mut rec);
    ctx.write("metrics.csv", metrics_csv(&rec.records))?;
    ctx.write("timing.csv", &rec.timing)?;
    let report = result?;
    trainer.checkpoint(meta).save(ctx.path("checkpoint.finr"))?;
    ctx.report("steps", trainer.step());
    ctx.report("train_seconds", format!("{:.3}", report.seconds));
    Ok(trainer)
}

fn report_record(ctx: &mut RunContext, r: &MetricRecord) {
    ctx.report("loss", r.loss);
    for (k, v) in [
        ("psnr", r.psnr),
        ("ssim", r.ssim),
        ("iou", r.iou),
        ("mse", r.mse),
        ("eikonal_error", r.eikonal_error),
    ] {
        if let Some(v) = v {
            ctx.report(k, v);
        }
    }
}

pub fn fit_image(ctx: &mut RunContext) -> Result<()> {
    let c = &ctx.config;
    let source = c.raw("image", "source").unwrap_or("synthetic").to_string();
    let batch = c.get_or("image", "batch", DEFAULT_IMAGE_BATCH)?;
    let target = if source == "synthetic" {
        synthetic_image(
            c.get_or("image", "height", 64)?,
            c.get_or("image", "width", 64)?,
            c.get_or("image", "channels", 3)?,
            c.get_or("image", "waves", 6)?,
            c.get_or("image", "image_seed", 0)?,
        )?
    } else {
        load_png(&ctx.resolve(&source))?
    };
    let task = ImageTask::new(target, batch)?;
    let defaults = ModelDefaults {
        mode: Mode::Cp,
        rank: 256,
        activation: "sine",
        encoding: "none",
    };
    let spec = model_spec(&ctx.config, &defaults, task.channels(), ImageTask::domains())?;
    let model = FInrModel::init(spec, ctx.seed)?;
    let trainer = train(ctx, model, &task)?;

    let recon = render_image(trainer.model(), task.height(), task.width())?.map(|v| v.clamp(0.0, 1.0));
    ctx.png("reconstruction.png", &recon)?;
    ctx.png("error_map.png", &error_map(&recon, &task.target)?)?;
    ctx.png("target.png", &task.target)?;
    let last = trainer.evaluate(&task)?;
    report_record(ctx, &last);
    Ok(())
}

/// Mid-plane of a `[N, N, N, 1]` volume orthogonal to `axis`, as `[N, N]`.
fn mid_plane(vol: &DenseTensor, axis: usize) -> Result<DenseTensor> {
    let s = vol.shape();
    let mid = s[axis] / 2;
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    DenseTensor::from_fn(&[s[a], s[b]], |ij| {
        let mut idx = [0usize; 4];
        idx[axis] = mid;
        idx[a] = ij[0];
        idx[b] = ij[1];
        vol.get(&idx)
    })
}

fn sdf_pictures(ctx: &mut RunContext, pred: &DenseTensor, truth: &DenseTensor, tau: f64) -> Result<()> {
    for (axis, name) in ["yz", "xz", "xy"].iter().enumerate() {
        let p = normalize(&mid_plane(pred, axis)?, -tau, tau);
        let t = normalize(&mid_plane(truth, axis)?, -tau, tau);
        ctx.png(&format!("slice_{name}.png"), &hstack(&[&p, &t])?)?;
    }
    let (p, t) = (mid_plane(pred, 2)?, mid_plane(truth, 2)?);
    let n = p.shape()[0] * p.shape()[1];
    // white: both inside; red: predicted only; blue: true only
    let mut rgb = Vec::with_capacity(3 * n);
    for (a, b) in p.data().iter().zip(t.data()) {
        let (pi, ti) = (*a < 0.0, *b < 0.0);
        rgb.extend_from_slice(&[(pi as u8) as f64, (pi && ti) as u8 as f64, (ti as u8) as f64]);
    }
    ctx.png("occupancy_diff.png", &DenseTensor::new(vec![p.shape()[0], p.shape()[1], 3], rgb)?)
}

pub fn fit_sdf(ctx: &mut RunContext) -> Result<()> {
    let c = &ctx.config;
    let shape: Shape = c.get_or("sdf", "shape", Shape::SPHERE)?;
    let n = c.get_or("sdf", "resolution", 48usize)?;
    let tau = c.get_or("sdf", "truncation", DEFAULT_TRUNCATION)?;
    let dw = SdfWeights::default();
    let weights = SdfWeights {
        eikonal: c.get_or("sdf", "eikonal_weight", dw.eikonal)?,
        data: c.get_or("sdf", "data_weight", dw.data)?,
        surface: c.get_or("sdf", "surface_weight", dw.surface)?,
    };
    let oracle: Option<Shape> = c.get("sdf", "oracle")?;
    let mut task = SdfTask::with_domain(shape, n, (-1.0, 1.0), tau)?;
    task.weights = weights;

    if let Some(oracle) = oracle {
        // analytic field of `oracle` scored against the task's ground truth
        ctx.config.finish()?;
        let coords = task.coords();
        let value = truncate_sdf(&sdf_grid(&oracle, &coords)?, tau);
        let rows = value.len();
        let mut grads = vec![Vec::with_capacity(rows); 3];
        for &x in &coords[0] {
            for &y in &coords[1] {
                for &z in &coords[2] {
                    let g = oracle.gradient([x, y, z]);
                    for k in 0..3 {
                        grads[k].push(g[k]);
                    }
                }
            }
        }
        let mut tape = Tape::new();
        let partials = grads
            .into_iter()
            .map(|g| Ok(Some(tape.constant(DenseTensor::new(vec![rows, 1], g)?))))
            .collect::<Result<Vec<_>>>()?;
        let field = Field {
            value: tape.constant(value.clone().reshape(&[rows, 1])?),
            partials,
            second: vec![None; 3],
        };
        let truth = tape.constant(task.truth().clone().reshape(&[rows, 1])?);
        let loss = sdf_loss(&mut tape, &field, truth, &task.band_indices(), &task.weights)?;
        let partial_values: Vec<&DenseTensor> = field.partials.iter().map(|p| tape.value(p.unwrap())).collect();
        let mut rec = MetricRecord::new(0, tape.scalar_value(loss.total));
        rec.loss_data = Some(tape.scalar_value(loss.data));
        rec.loss_eikonal = Some(tape.scalar_value(loss.eikonal));
        rec.loss_surface = loss.surface.map(|s| tape.scalar_value(s));
        rec.iou = Some(iou(&value, task.truth(), 0.0)?);
        rec.mse = Some(mse(&value, task.truth())?);
        rec.eikonal_error = Some(crate::tasks::eikonal_error(&partial_values, None)?);
        ctx.write("metrics.csv", metrics_csv(std::slice::from_ref(&rec)))?;
        let truth = task.truth().clone();
        sdf_pictures(ctx, &value, &truth, tau)?;
        ctx.report("oracle", oracle);
        report_record(ctx, &rec);
        return Ok(());
    }

    let defaults = ModelDefaults {
        mode: Mode::Tt,
        rank: 128,
        activation: "sine",
        encoding: "none",
    };
    let spec = model_spec(&ctx.config, &defaults, 1, task.domains())?;
    let model = FInrModel::init(spec, ctx.seed)?;
    let trainer = train(ctx, model, &task)?;
    let eval = task.evaluate_model(trainer.model())?;
    let pred = trainer.model().eval_grid(&task.coords(), 0)?.value;
    crate::tensor::ftnr::save(ctx.path("sdf_pred.ftnr"), &pred, crate::tensor::ftnr::Dtype::F64)?;
    let truth = task.truth().clone();
    sdf_pictures(ctx, &pred, &truth, tau)?;
    let last = trainer.evaluate(&task)?;
    report_record(ctx, &last);
    ctx.report("eikonal_error_unclamped", eval.eikonal_unclamped);
    Ok(())
}

fn pinn_task(c: &Config) -> Result<PinnTask> {
    let three = |key: &str, default: [usize; 3]| -> Result<[usize; 3]> {
        match c.extents("pinn", key)? {
            None => Ok(default),
            Some(v) => v
                .try_into()
                .map_err(|_| Error::Config(format!("pinn.{key} needs three extents (T x X x Y)"))),
        }
    };
    let obs = three("observations", [10, 64, 64])?;
    let eval = three("eval", [51, 64, 64])?;
    let mut task = PinnTask::taylor_green(
        obs,
        c.get_or("pinn", "collocation", 20_000usize)?,
        c.get_or("pinn", "viscosity", DEFAULT_VISCOSITY)?,
    )?;
    task.eval_shape = eval;
    task.sampling = match c.raw("pinn", "sampling").unwrap_or("grid") {
        "grid" => CollocationSampling::Grid,
        "points" => CollocationSampling::Points,
        other => return Err(Error::Config(format!("pinn.sampling must be grid or points, got `{other}`"))),
    };
    task.data_weight = c.get_or("pinn", "data_weight", 1.0)?;
    task.pde_weight = c.get_or("pinn", "pde_weight", 1.0)?;
    Ok(task)
}

pub fn fit_pinn(ctx: &mut RunContext) -> Result<()> {
    let task = pinn_task(&ctx.config)?;
    let defaults = ModelDefaults {
        mode: Mode::Tt,
        rank: 128,
        activation: "relu",
        encoding: "fourier:2",
    };
    let spec = model_spec(&ctx.config, &defaults, 3, task.domains())?;
    let model = FInrModel::init(spec, ctx.seed)?;
    let trainer = train(ctx, model, &task)?;

    let coords = task.grid_coords(task.eval_shape);
    let pred = trainer.model().eval_grid(&coords, 0)?.value;
    let truth = task.reference(&coords)?;
    let t_len = coords[0].len();
    let omega = |v: &DenseTensor, ti: usize| {
        DenseTensor::from_fn(&[coords[1].len(), coords[2].len()], |ij| v.get(&[ti, ij[0], ij[1], 2]))
    };
    for (i, ti) in [0, t_len / 2, t_len - 1].into_iter().enumerate() {
        let (w_true, w_pred) = (omega(&truth, ti)?, omega(&pred, ti)?);
        let err = error_map(&w_pred, &w_true)?;
        let panel = hstack(&[&normalize(&w_true, -2.0, 2.0), &normalize(&w_pred, -2.0, 2.0), &err])?;
        ctx.png(&format!("panel_{i}.png"), &panel)?;
    }
    let last = trainer.evaluate(&task)?;
    report_record(ctx, &last);
    Ok(())
}

pub fn bench(ctx: &mut RunContext) -> Result<()> {
    let c = &ctx.config;
    let d = BenchSettings::default();
    let settings = BenchSettings {
        ns: c.list("bench", "n")?.unwrap_or(d.ns),
        dims: c.get_or("bench", "dims", d.dims)?,
        modes: c.list("bench", "modes")?.unwrap_or(d.modes),
        ranks: c.list("bench", "ranks")?.unwrap_or(d.ranks),
        width: c.get_or("bench", "width", d.width)?,
        layers: c.get_or("bench", "layers", d.layers)?,
        activation: match c.raw("bench", "activation") {
            Some(a) => parse_activation(a)?,
            None => d.activation,
        },
        monolithic: c.get_or("bench", "monolithic", d.monolithic)?,
        reps: c.get_or("bench", "reps", d.reps)?,
        warmup: c.get_or("bench", "warmup", d.warmup)?,
        min_seconds: c.get_or("bench", "min_seconds", d.min_seconds)?,
        chunk: c.get_or("bench", "chunk", d.chunk)?,
        seed: ctx.seed,
    };
    c.finish()?;
    settings.validate()?;
    for w in settings.warnings() {
        ctx.warn(w);
    }
    let report = run_bench(&settings, |r| {
        eprintln!("{:>10} n={:<5} r={:<4} step {:.4e}s", r.arch.to_string(), r.n, r.r, r.step_seconds)
    })?;
    ctx.write("bench.csv", report.rows_csv())?;
    ctx.write("slopes.csv", report.slopes_csv())?;
    for f in &report.fits {
        ctx.report(&format!("slope_{}_r{}", f.arch, f.r), format!("{:.3} (R² {:.4})", f.slope, f.r2));
    }
    if settings.monolithic && !report.fits.is_empty() {
        ctx.report("separation", report.separated(1.4, 1.7, 0.98));
    }
    // predicted against measured ordering, per size and rank
    for row in report.rows.iter().filter(|r| r.arch != Architecture::Monolithic) {
        if let Some(mono) = report.row(Architecture::Monolithic, row.n, 0) {
            let predicted = row.predicted_macs < mono.predicted_macs;
            let measured = row.step_seconds < mono.step_seconds;
            ctx.report(
                &format!("faster_{}_n{}_r{}", row.arch, row.n, row.r),
                format!("predicted {predicted}, measured {measured}"),
            );
        }
    }
    Ok(())
}

pub fn eval(ctx: &mut RunContext) -> Result<()> {
    let c = &ctx.config;
    let path = ctx.resolve(
        c.raw("eval", "checkpoint")
            .ok_or_else(|| Error::Config("eval.checkpoint is required".into()))?,
    );
    let grid = c
        .extents("eval", "grid")?
        .ok_or_else(|| Error::Config("eval.grid is required".into()))?;
    let bounds: Option<Vec<String>> = c.list("eval", "bounds")?;
    c.finish()?;
    let ck = Checkpoint::load(&path)?;
    let model = ck.model()?;
    let spec = model.spec();
    if grid.len() != spec.dims() {
        return Err(Error::Config(format!("eval.grid has {} extents, the model has {} axes", grid.len(), spec.dims())));
    }
    let mut coords = Vec::with_capacity(grid.len());
    for (k, &n) in grid.iter().enumerate() {
        let (lo, hi) = spec.domains[k];
        let (mut a, mut b) = (lo, hi);
        if let Some(bounds) = &bounds {
            let item = bounds
                .get(k)
                .ok_or_else(|| Error::Config(format!("eval.bounds needs {} entries", grid.len())))?;
            let parsed = item
                .split_once(':')
                .and_then(|(x, y)| Some((x.trim().parse::<f64>().ok()?, y.trim().parse::<f64>().ok()?)));
            (a, b) = parsed.ok_or_else(|| Error::Config(format!("bad bound `{item}`, expected lo:hi")))?;
        }
        if a < lo || b > hi || a > hi || b < lo {
            ctx.warn(format!("axis {k}: query range [{a}, {b}] leaves the domain [{lo}, {hi}] and is clamped"));
        }
        coords.push(linspace(a, b, n).into_iter().map(|v| v.clamp(lo, hi)).collect::<Vec<f64>>());
    }
    let value = model.eval_grid(&coords, 0)?.value;
    crate::tensor::ftnr::save(ctx.path("render.ftnr"), &value, crate::tensor::ftnr::Dtype::F64)?;
    if spec.dims() == 2 && (spec.channels == 1 || spec.channels == 3) {
        ctx.png("render.png", &value.map(|v| v.clamp(0.0, 1.0)))?;
    }
    let meta = Config::parse(&ck.meta).unwrap_or_default();
    let task = meta.raw("", "task").unwrap_or("").to_string();
    ctx.report("task", if task.is_empty() { "unknown" } else { &task });
    ctx.report("step", ck.step);
    let mut csv = String::from("metric,value\n");
    if task == "pinn" {
        let t = pinn_task(&meta)?;
        let e = t.vorticity_mse_on(&model, &coords)?;
        csv += &format!("mse,{e:?}\n");
        ctx.report("mse", e);
    } else if task == "sdf" && spec.dims() == 3 {
        let shape: Shape = meta.get_or("sdf", "shape", Shape::SPHERE)?;
        let truth = sdf_grid(&shape, &coords)?;
        let v = iou(&value, &truth, 0.0)?;
        csv += &format!("iou,{v:?}\n");
        ctx.report("iou", v);
    }
    ctx.write("eval.csv", csv)
}
