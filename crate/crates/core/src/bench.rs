//! Timing harness for full-grid evaluation cost, factorized against
//! monolithic networks.

use std::time::Instant;

use crate::autodiff::Tape;
use crate::backends::{ActivationKind, SubNetworkSpec};
use crate::error::{Error, Result};
use crate::model::{linspace, predict_cost, Architecture, FInrModel, FInrSpec, MonolithicModel, MonolithicSpec};
use crate::tensor::{DenseTensor, Mode};

/// Fewer repetitions than this make the reported medians unreliable.
pub const STABLE_REPS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSettings {
    pub ns: Vec<usize>,
    pub dims: usize,
    pub modes: Vec<Mode>,
    pub ranks: Vec<usize>,
    pub width: usize,
    pub layers: usize,
    pub activation: ActivationKind,
    pub monolithic: bool,
    pub reps: usize,
    pub warmup: usize,
    /// Extra repetitions are taken until the measured calls add up to this
    /// many seconds, so cheap configurations get a steadier median.
    pub min_seconds: f64,
    /// Points per monolithic chunk; bounds memory of the dense baseline.
    pub chunk: usize,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            ns: vec![64, 128, 256, 512],
            dims: 2,
            modes: vec![Mode::Cp],
            ranks: vec![64],
            width: 256,
            layers: 4,
            activation: ActivationKind::Relu,
            monolithic: true,
            reps: STABLE_REPS,
            warmup: 1,
            min_seconds: 0.25,
            chunk: 8192,
            seed: 0,
        }
    }
}

impl BenchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::Config("bench needs a non-empty list of positive grid sizes".into()));
        }
        if !(2..=5).contains(&self.dims) {
            return Err(Error::Config(format!("bench dims must be 2..=5, got {}", self.dims)));
        }
        if !(self.min_seconds >= 0.0 && self.min_seconds.is_finite()) {
            return Err(Error::Config("min_seconds must be a finite non-negative number".into()));
        }
        if self.reps == 0 || self.chunk == 0 {
            return Err(Error::Config("reps and chunk must be >= 1".into()));
        }
        if self.ranks.contains(&0) {
            return Err(Error::Config("ranks must be >= 1".into()));
        }
        if self.modes.is_empty() && !self.monolithic {
            return Err(Error::Config("nothing to benchmark".into()));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.reps < STABLE_REPS {
            w.push(format!(
                "only {} repetition(s) per measurement; medians below {STABLE_REPS} reps are unstable",
                self.reps
            ));
        }
        w
    }
}

/// Median seconds per call of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub arch: Architecture,
    pub n: usize,
    /// Rank; 0 for the monolithic network.
    pub r: usize,
    pub forward_seconds: f64,
    /// Forward plus backward of an MSE loss over the full grid.
    pub step_seconds: f64,
    pub predicted_macs: f64,
}

/// Least-squares line through `(log n, log t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub arch: Architecture,
    pub r: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Fits of per-step time against `n`, one per architecture and rank.
    pub fits: Vec<SlopeFit>,
    pub warnings: Vec<String>,
}

pub const BENCH_COLUMNS: &str = "arch,n,r,forward_seconds,step_seconds,predicted_macs";
pub const SLOPE_COLUMNS: &str = "arch,r,slope,intercept,r2";

fn arch_name(a: Architecture) -> String {
    match a {
        Architecture::Monolithic => "monolithic".into(),
        Architecture::Factorized(m) => m.as_str().into(),
    }
}

impl BenchReport {
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{BENCH_COLUMNS}\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{:?},{:?},{:?}\n",
                arch_name(r.arch),
                r.n,
                r.r,
                r.forward_seconds,
                r.step_seconds,
                r.predicted_macs
            );
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = format!("{SLOPE_COLUMNS}\n");
        for f in &self.fits {
            s += &format!("{},{},{:?},{:?},{:?}\n", arch_name(f.arch), f.r, f.slope, f.intercept, f.r2);
        }
        s
    }

    pub fn fit(&self, arch: Architecture, r: usize) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.arch == arch && f.r == r)
    }

    pub fn row(&self, arch: Architecture, n: usize, r: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|x| x.arch == arch && x.n == n && x.r == r)
    }

    /// Factorized slopes at most `fact_max`, monolithic at least `mono_min`,
    /// every fit with `R² ≥ r2_min`.
    pub fn separated(&self, fact_max: f64, mono_min: f64, r2_min: f64) -> bool {
        let mut any = (false, false);
        for f in &self.fits {
            let ok = match f.arch {
                Architecture::Monolithic => {
                    any.1 = true;
                    f.slope >= mono_min
                }
                Architecture::Factorized(_) => {
                    any.0 = true;
                    f.slope <= fact_max
                }
            };
            if !ok || f.r2 < r2_min {
                return false;
            }
        }
        any.0 && any.1
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

const MAX_REPS: usize = 1000;

/// Median wall time of at least `reps` calls after `warmup` discarded
/// calls, continuing (up to 1000 calls) while the measured total is below
/// `min_seconds`.
pub fn time_median<F: FnMut() -> Result<()>>(reps: usize, warmup: usize, min_seconds: f64, mut f: F) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(reps);
    let mut total = 0.0;
    while times.len() < reps || (total < min_seconds && times.len() < MAX_REPS) {
        let t = Instant::now();
        f()?;
        let dt = t.elapsed().as_secs_f64();
        total += dt;
        times.push(dt);
    }
    Ok(median(&mut times))
}

/// Ordinary least squares of `log y` on `log x`: `(slope, intercept, R²)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Input("a log-log fit needs at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Numeric("log-log fit needs positive finite samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("log-log fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

fn grid(n: usize, d: usize) -> Vec<Vec<f64>> {
    vec![linspace(-1.0, 1.0, n); d]
}

fn time_factorized(model: &mut FInrModel, coords: &[Vec<f64>], s: &BenchSettings) -> Result<(f64, f64)> {
    let orders = vec![0; coords.len()];
    let forward = time_median(s.reps, s.warmup, s.min_seconds, || model.eval_grid(coords, 0).map(|_| ()))?;
    let points: usize = coords.iter().map(Vec::len).product();
    let zeros = DenseTensor::zeros(&[points, 1])?;
    let step = time_median(s.reps, s.warmup, s.min_seconds, || {
        let mut tape = Tape::new();
        let field = model.grid_on_tape(&mut tape, coords, &orders)?;
        let target = tape.constant(zeros.clone());
        let loss = tape.mse(field.value, target)?;
        tape.backward(loss, model.params_mut())?;
        model.params_mut().zero_grad();
        Ok(())
    })?;
    Ok((forward, step))
}

fn time_monolithic(model: &mut MonolithicModel, coords: &[Vec<f64>], s: &BenchSettings) -> Result<(f64, f64)> {
    let forward = time_median(s.reps, s.warmup, s.min_seconds, || model.eval_grid(coords, s.chunk).map(|_| ()))?;
    let total: usize = coords.iter().map(Vec::len).product();
    let step = time_median(s.reps, s.warmup, s.min_seconds, || {
        crate::model::for_grid_chunks(coords, s.chunk, |pts| {
            let mut tape = Tape::new();
            let y = model.points_on_tape(&mut tape, pts)?;
            let target = tape.constant(DenseTensor::zeros(tape.shape(y))?);
            let loss = tape.mse(y, target)?;
            // chunk means weighted back into the full-grid mean
            let rows = tape.shape(y)[0] as f64;
            let loss = tape.scale(loss, rows / total as f64);
            tape.backward(loss, model.params_mut())
        })?;
        model.params_mut().zero_grad();
        Ok(())
    })?;
    Ok((forward, step))
}

/// Runs the sweep; `progress` sees every row as soon as it is measured.
pub fn run_bench(settings: &BenchSettings, mut progress: impl FnMut(&BenchRow)) -> Result<BenchReport> {
    settings.validate()?;
    let d = settings.dims;
    let domains = vec![(-1.0, 1.0); d];
    let (m, l) = (settings.width as u64, settings.layers as u64);
    let mut report = BenchReport {
        warnings: settings.warnings(),
        ..BenchReport::default()
    };
    let mut series: Vec<(Architecture, usize)> = Vec::new();
    for &mode in &settings.modes {
        for &r in &settings.ranks {
            let net = SubNetworkSpec::new(settings.activation, 1).with_shape(settings.layers, settings.width);
            let spec = FInrSpec::new(mode, r, 1, net, domains.clone())?;
            let mut model = FInrModel::init(spec, settings.seed)?;
            let arch = Architecture::Factorized(mode);
            for &n in &settings.ns {
                let (forward_seconds, step_seconds) = time_factorized(&mut model, &grid(n, d), settings)?;
                let row = BenchRow {
                    arch,
                    n,
                    r,
                    forward_seconds,
                    step_seconds,
                    predicted_macs: predict_cost(arch, d as u32, n as u64, m, l, r as u64).macs,
                };
                progress(&row);
                report.rows.push(row);
            }
            series.push((arch, r));
        }
    }
    if settings.monolithic {
        let spec = MonolithicSpec {
            channels: 1,
            layers: settings.layers,
            width: settings.width,
            activation: settings.activation,
            domains: domains.clone(),
        };
        let mut model = MonolithicModel::init(spec, settings.seed)?;
        let arch = Architecture::Monolithic;
        for &n in &settings.ns {
            let (forward_seconds, step_seconds) = time_monolithic(&mut model, &grid(n, d), settings)?;
            let row = BenchRow {
                arch,
                n,
                r: 0,
                forward_seconds,
                step_seconds,
                predicted_macs: predict_cost(arch, d as u32, n as u64, m, l, 0).macs,
            };
            progress(&row);
            report.rows.push(row);
        }
        series.push((arch, 0));
    }
    if settings.ns.len() >= 2 {
        for (arch, r) in series {
            let pts: Vec<(f64, f64)> = report
                .rows
                .iter()
                .filter(|x| x.arch == arch && x.r == r)
                .map(|x| (x.n as f64, x.step_seconds))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let (slope, intercept, r2) = fit_loglog(&xs, &ys)?;
            report.fits.push(SlopeFit {
                arch,
                r,
                slope,
                intercept,
                r2,
            });
        }
    } else {
        report.warnings.push("a single grid size gives no scaling fit".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_power_laws() {
        let xs = [64.0, 128.0, 256.0, 512.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3e-7 * x.powf(1.7)).collect();
        let (s, b, r2) = fit_loglog(&xs, &ys).unwrap();
        assert!((s - 1.7).abs() < 1e-12);
        assert!((b - 3e-7f64.ln()).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
        assert!(fit_loglog(&xs[..1], &ys[..1]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn single_rep_warns() {
        let s = BenchSettings {
            reps: 1,
            ..BenchSettings::default()
        };
        assert_eq!(s.warnings().len(), 1);
        assert!(s.warnings()[0].contains("unstable"));
        assert!(BenchSettings::default().warnings().is_empty());
    }

    #[test]
    fn tiny_sweep_produces_rows_and_fits() {
        let s = BenchSettings {
            ns: vec![4, 8],
            modes: vec![Mode::Cp, Mode::Tt],
            ranks: vec![2],
            width: 8,
            layers: 2,
            reps: 1,
            warmup: 0,
            min_seconds: 0.0,
            chunk: 5,
            ..BenchSettings::default()
        };
        let mut seen = 0;
        let report = run_bench(&s, |_| seen += 1).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(seen, 6);
        assert_eq!(report.fits.len(), 3);
        assert_eq!(report.rows_csv().lines().count(), 7);
        assert_eq!(report.rows_csv().lines().next().unwrap(), BENCH_COLUMNS);
        assert_eq!(report.slopes_csv().lines().next().unwrap(), SLOPE_COLUMNS);
        assert!(report.rows.iter().all(|r| r.step_seconds > 0.0));
    }

    #[test]
    fn separation_rule() {
        let fit = |arch, slope, r2| SlopeFit {
            arch,
            r: 1,
            slope,
            intercept: 0.0,
            r2,
        };
        let mut rep = BenchReport {
            fits: vec![fit(Architecture::Factorized(Mode::Cp), 1.1, 0.99), fit(Architecture::Monolithic, 2.0, 0.999)],
            ..BenchReport::default()
        };
        assert!(rep.separated(1.4, 1.7, 0.98));
        rep.fits[0].r2 = 0.9;
        assert!(!rep.separated(1.4, 1.7, 0.98));
        rep.fits.pop();
        rep.fits[0].r2 = 0.99;
        assert!(!rep.separated(1.4, 1.7, 0.98));
    }
}
