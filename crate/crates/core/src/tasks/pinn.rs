use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::{linspace, FInrModel, Field};
use crate::tensor::DenseTensor;

pub const DEFAULT_VISCOSITY: f64 = 0.01;

/// `(u_x, u_y, ω)` of the decaying Taylor-Green vortex:
/// `u = (cos x sin y, −sin x cos y)·e^{−2νt}`, `ω = −2 cos x cos y·e^{−2νt}`.
pub fn taylor_green_reference(t: f64, x: f64, y: f64, nu: f64) -> [f64; 3] {
    let decay = (-2.0 * nu * t).exp();
    let (sx, cx) = x.sin_cos();
    let (sy, cy) = y.sin_cos();
    [cx * sy * decay, -sx * cy * decay, -2.0 * cx * cy * decay]
}

/// Taylor-Green fields with the derivative channels the residual needs,
/// at the listed `(t, x, y)` points. Outputs are `[P, 3]`.
pub fn taylor_green_field(points: &[[f64; 3]], nu: f64) -> Result<Field<DenseTensor>> {
    let n = points.len();
    let mut chans = vec![vec![0.0; n * 3]; 6];
    for (p, &[t, x, y]) in points.iter().enumerate() {
        let e = (-2.0 * nu * t).exp();
        let (sx, cx) = x.sin_cos();
        let (sy, cy) = y.sin_cos();
        let rows = [
            // value
            [cx * sy * e, -sx * cy * e, -2.0 * cx * cy * e],
            // ∂t
            [-2.0 * nu * cx * sy * e, 2.0 * nu * sx * cy * e, 4.0 * nu * cx * cy * e],
            // ∂x
            [-sx * sy * e, -cx * cy * e, 2.0 * sx * cy * e],
            // ∂y
            [cx * cy * e, sx * sy * e, 2.0 * cx * sy * e],
            // ∂xx
            [-cx * sy * e, sx * cy * e, 2.0 * cx * cy * e],
            // ∂yy
            [-cx * sy * e, sx * cy * e, 2.0 * cx * cy * e],
        ];
        for (c, row) in rows.iter().enumerate() {
            chans[c][p * 3..p * 3 + 3].copy_from_slice(row);
        }
    }
    let mut it = chans.into_iter().map(|d| DenseTensor::new(vec![n, 3], d));
    let value = it.next().unwrap()?;
    let (dt, dx, dy) = (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?);
    let (dxx, dyy) = (it.next().unwrap()?, it.next().unwrap()?);
    Ok(Field {
        value,
        partials: vec![Some(dt), Some(dx), Some(dy)],
        second: vec![None, Some(dxx), Some(dyy)],
    })
}

/// Residuals of the vorticity form on `(t, x, y) → (u_x, u_y, ω)`:
///
/// * `mom = ∂tω + u_x ∂xω + u_y ∂yω − ν(∂xxω + ∂yyω)`
/// * `div = ∂x u_x + ∂y u_y`
/// * `def = ω − (∂x u_y − ∂y u_x)`
///
/// Each is a `[P, 1]` node.
pub fn ns_residual_on_tape(tape: &mut Tape, field: &Field<Var>, nu: f64) -> Result<[Var; 3]> {
    let missing = || Error::Capability("Navier-Stokes residual needs ∂t, ∂x, ∂y and ∂xx, ∂yy".into());
    let get = |o: Option<&Var>| o.copied().ok_or_else(missing);
    if field.partials.len() != 3 {
        return Err(missing());
    }
    let (dt, dx, dy) = (get(field.partial(0))?, get(field.partial(1))?, get(field.partial(2))?);
    let (dxx, dyy) = (get(field.second(1))?, get(field.second(2))?);
    let (ux, uy, w) = (tape.column(field.value, 0)?, tape.column(field.value, 1)?, tape.column(field.value, 2)?);
    let w_t = tape.column(dt, 2)?;
    let w_x = tape.column(dx, 2)?;
    let w_y = tape.column(dy, 2)?;
    let ux_x = tape.column(dx, 0)?;
    let uy_y = tape.column(dy, 1)?;
    let uy_x = tape.column(dx, 1)?;
    let ux_y = tape.column(dy, 0)?;
    let w_xx = tape.column(dxx, 2)?;
    let w_yy = tape.column(dyy, 2)?;

    let adv_x = tape.mul(ux, w_x)?;
    let adv_y = tape.mul(uy, w_y)?;
    let lap = tape.add(w_xx, w_yy)?;
    let visc = tape.scale(lap, nu);
    let lhs = tape.add_all(&[w_t, adv_x, adv_y])?;
    let mom = tape.sub(lhs, visc)?;
    let div = tape.add(ux_x, uy_y)?;
    let curl = tape.sub(uy_x, ux_y)?;
    let def = tape.sub(w, curl)?;
    Ok([mom, div, def])
}

/// Evaluated residuals, each `[P, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NsResidual {
    pub momentum: DenseTensor,
    pub divergence: DenseTensor,
    pub definition: DenseTensor,
}

/// Numeric counterpart of [`ns_residual_on_tape`] (same formula, same
/// operation order).
pub fn ns_residual(field: &Field<DenseTensor>, nu: f64) -> Result<NsResidual> {
    let mut tape = Tape::new();
    let lift = |tape: &mut Tape, t: &Option<DenseTensor>| t.as_ref().map(|t| tape.constant(t.clone()));
    let value = tape.constant(field.value.clone());
    let on_tape = Field {
        value,
        partials: field.partials.iter().map(|p| lift(&mut tape, p)).collect(),
        second: field.second.iter().map(|p| lift(&mut tape, p)).collect(),
    };
    let [m, d, f] = ns_residual_on_tape(&mut tape, &on_tape, nu)?;
    Ok(NsResidual {
        momentum: tape.value(m).clone(),
        divergence: tape.value(d).clone(),
        definition: tape.value(f).clone(),
    })
}

/// Where the PDE residual is enforced.
#[derive(Clone, Debug, PartialEq)]
pub enum Collocation {
    /// Scattered `(t, x, y)` points.
    Points(Vec<Vec<f64>>),
    /// A tensor grid given by per-axis coordinates.
    Grid(Vec<Vec<f64>>),
}

impl Collocation {
    pub fn len(&self) -> usize {
        match self {
            Collocation::Points(p) => p.len(),
            Collocation::Grid(g) => g.iter().map(Vec::len).product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How fresh collocation sets are drawn each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollocationSampling {
    /// A random tensor grid (see [`sample_collocation_grid`]), composed on the
    /// grid path.
    Grid,
    /// Scattered uniform points, composed point by point.
    Points,
}

impl CollocationSampling {
    pub fn sample(self, domains: &[(f64, f64)], count: usize, rng: &mut ChaCha8Rng) -> Result<Collocation> {
        Ok(match self {
            Self::Grid => Collocation::Grid(sample_collocation_grid(domains, count, rng)?),
            Self::Points => Collocation::Points(sample_collocation(domains, count, rng)?),
        })
    }
}

/// `count` uniform pseudorandom points in the box `domains`.
pub fn sample_collocation(domains: &[(f64, f64)], count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Config("collocation count must be >= 1".into()));
    }
    Ok((0..count)
        .map(|_| domains.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect())
        .collect())
}

/// A random tensor grid with about `count` points: each axis gets
/// `ceil(count^(1/d))` sorted uniform coordinates.
pub fn sample_collocation_grid(domains: &[(f64, f64)], count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if count == 0 || domains.is_empty() {
        return Err(Error::Config("collocation count must be >= 1".into()));
    }
    let per_axis = (count as f64).powf(1.0 / domains.len() as f64).ceil().max(1.0) as usize;
    Ok(domains
        .iter()
        .map(|&(lo, hi)| {
            let mut v: Vec<f64> = (0..per_axis).map(|_| rng.gen_range(lo..hi)).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect())
}

/// Taylor-Green super-resolution: fit `(u_x, u_y, ω)` over `[0, T]×[0, 2π]²`
/// from a coarse observation grid plus the PDE residual.
#[derive(Clone, Debug, PartialEq)]
pub struct PinnTask {
    pub nu: f64,
    pub time: (f64, f64),
    pub space: (f64, f64),
    /// Observation grid extents `(T, X, Y)`.
    pub observation_shape: [usize; 3],
    pub collocation: usize,
    pub sampling: CollocationSampling,
    /// Fine evaluation grid `(T, X, Y)` for the reported ω error.
    pub eval_shape: [usize; 3],
    pub data_weight: f64,
    pub pde_weight: f64,
    observations: DenseTensor,
}

impl PinnTask {
    /// Time window `[0, 1]`, space `[0, 2π]²`, unit loss weights.
    pub fn taylor_green(observation_shape: [usize; 3], collocation: usize, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Config("viscosity must be positive".into()));
        }
        if observation_shape.contains(&0) || collocation == 0 {
            return Err(Error::Config("observation grid and collocation count must be non-empty".into()));
        }
        let mut task = Self {
            nu,
            time: (0.0, 1.0),
            space: (0.0, 2.0 * PI),
            observation_shape,
            collocation,
            sampling: CollocationSampling::Grid,
            eval_shape: [51, 64, 64],
            data_weight: 1.0,
            pde_weight: 1.0,
            observations: DenseTensor::zeros(&[1])?,
        };
        task.observations = task.reference(&task.observation_coords())?;
        Ok(task)
    }

    pub fn domains(&self) -> Vec<(f64, f64)> {
        vec![self.time, self.space, self.space]
    }

    /// Evenly spaced grid over the full domain with the given extents.
    pub fn grid_coords(&self, shape: [usize; 3]) -> Vec<Vec<f64>> {
        self.domains()
            .iter()
            .zip(shape)
            .map(|(&(lo, hi), n)| linspace(lo, hi, n))
            .collect()
    }

    pub fn observation_coords(&self) -> Vec<Vec<f64>> {
        self.grid_coords(self.observation_shape)
    }

    /// Observed fields, `[T, X, Y, 3]`.
    pub fn observations(&self) -> &DenseTensor {
        &self.observations
    }

    /// Replaces the observations (same shape required).
    pub fn set_observations(&mut self, obs: DenseTensor) -> Result<()> {
        if obs.shape() != self.observations.shape() {
            return Err(Error::Input(format!(
                "observations {:?} do not match grid {:?}",
                obs.shape(),
                self.observations.shape()
            )));
        }
        self.observations = obs;
        Ok(())
    }

    /// Mean squared ω error of `model` against the analytic solution on the
    /// fine evaluation grid.
    pub fn vorticity_mse(&self, model: &FInrModel) -> Result<f64> {
        self.vorticity_mse_on(model, &self.grid_coords(self.eval_shape))
    }

    /// Mean squared ω error on an arbitrary `(t, x, y)` tensor grid.
    pub fn vorticity_mse_on(&self, model: &FInrModel, coords: &[Vec<f64>]) -> Result<f64> {
        let pred = model.eval_grid(coords, 0)?.value;
        let truth = self.reference(coords)?;
        let n = pred.len() / 3;
        let sum: f64 = (0..n).map(|i| (pred.data()[3 * i + 2] - truth.data()[3 * i + 2]).powi(2)).sum();
        Ok(sum / n as f64)
    }

    /// Analytic solution on a tensor grid, `[T, X, Y, 3]`.
    pub fn reference(&self, coords: &[Vec<f64>]) -> Result<DenseTensor> {
        let shape = [coords[0].len(), coords[1].len(), coords[2].len(), 3];
        let nu = self.nu;
        DenseTensor::from_fn(&shape, |i| taylor_green_reference(coords[0][i[0]], coords[1][i[1]], coords[2][i[2]], nu)[i[3]])
    }
}

/// Loss nodes; `total = w_data·data + w_pde·pde`.
#[derive(Clone, Copy, Debug)]
pub struct PinnLoss {
    pub total: Var,
    pub data: Var,
    pub pde: Var,
}

/// Rejects models whose sub-networks cannot deliver the jets the residual
/// needs (first order in time, second order in space).
pub fn check_pinn_capability(model: &FInrModel) -> Result<()> {
    let spec = model.spec();
    if spec.dims() != 3 || spec.channels != 3 {
        return Err(Error::Config(format!(
            "the PINN task needs a (t, x, y) → 3-channel model, got d={} C={}",
            spec.dims(),
            spec.channels
        )));
    }
    for (k, net) in spec.axes.iter().enumerate() {
        if net.encoding.is_piecewise_linear() {
            return Err(Error::Capability(
                "feature-grid encodings are piecewise linear and cannot carry the PDE residual".into(),
            ));
        }
        let need = if k == 0 { 1 } else { 2 };
        if net.max_jet_order() < need {
            return Err(Error::Capability(format!("axis {k} cannot deliver order-{need} jets")));
        }
    }
    Ok(())
}

/// `L_data = MSE(model, observations)` over all channels on the observation
/// grid; `L_pde = mean(mom²) + mean(div²) + mean(def²)` over `collocation`.
pub fn pinn_loss(tape: &mut Tape, model: &FInrModel, task: &PinnTask, collocation: &Collocation) -> Result<PinnLoss> {
    check_pinn_capability(model)?;
    let obs_coords = task.observation_coords();
    let fit = model.grid_on_tape(tape, &obs_coords, &[0, 0, 0])?;
    let rows = task.observations.len() / 3;
    let target = tape.constant(task.observations.clone().reshape(&[rows, 3])?);
    let data = tape.mse(fit.value, target)?;

    let orders = [1, 2, 2];
    let field = match collocation {
        Collocation::Points(p) => model.points_on_tape(tape, p, &orders)?,
        Collocation::Grid(g) => model.grid_on_tape(tape, g, &orders)?,
    };
    let residuals = ns_residual_on_tape(tape, &field, task.nu)?;
    let means: Vec<Var> = residuals
        .iter()
        .map(|&r| {
            let sq = tape.square(r);
            tape.mean(sq)
        })
        .collect();
    let pde = tape.add_all(&means)?;
    let a = tape.scale(data, task.data_weight);
    let b = tape.scale(pde, task.pde_weight);
    let total = tape.add(a, b)?;
    Ok(PinnLoss { total, data, pde })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reference_values() {
        assert_eq!(taylor_green_reference(0.0, 0.0, 0.0, 0.01), [0.0, -0.0, -2.0]);
        let nu = 0.01;
        let w0 = taylor_green_reference(0.0, 0.3, 0.2, nu)[2];
        let w1 = taylor_green_reference(1.0 / (2.0 * nu), 0.3, 0.2, nu)[2];
        assert!((w1 / w0 - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn taylor_green_satisfies_the_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for nu in [0.01, 0.1, 1.0] {
            let pts: Vec<[f64; 3]> = (0..50)
                .map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)])
                .collect();
            let r = ns_residual(&taylor_green_field(&pts, nu).unwrap(), nu).unwrap();
            for t in [&r.momentum, &r.divergence, &r.definition] {
                assert!(t.max_abs() < 1e-10, "{}", t.max_abs());
            }
        }
    }

    #[test]
    fn zero_fields_and_linear_perturbation() {
        let pts = [[0.2, 1.0, 2.0], [0.7, 3.0, 0.5]];
        let mut f = taylor_green_field(&pts, 0.01).unwrap();
        for t in std::iter::once(&mut f.value)
            .chain(f.partials.iter_mut().flatten())
            .chain(f.second.iter_mut().flatten())
        {
            t.data_mut().fill(0.0);
        }
        let r = ns_residual(&f, 0.01).unwrap();
        assert_eq!(r.momentum.max_abs() + r.divergence.max_abs() + r.definition.max_abs(), 0.0);

        // ω + t adds exactly one to ∂tω and changes nothing else
        let base = taylor_green_field(&pts, 0.01).unwrap();
        let mut shifted = base.clone();
        for p in 0..2 {
            let dt = shifted.partials[0].as_mut().unwrap();
            dt.data_mut()[p * 3 + 2] += 1.0;
            shifted.value.data_mut()[p * 3 + 2] += pts[p][0];
        }
        let r0 = ns_residual(&base, 0.01).unwrap();
        let r1 = ns_residual(&shifted, 0.01).unwrap();
        for p in 0..2 {
            assert!((r1.momentum.data()[p] - r0.momentum.data()[p] - 1.0).abs() < 1e-12);
        }
        assert_eq!(r1.divergence, r0.divergence);
    }

    #[test]
    fn missing_channels_are_rejected() {
        let mut f = taylor_green_field(&[[0.0, 1.0, 1.0]], 0.01).unwrap();
        f.second[2] = None;
        assert!(matches!(ns_residual(&f, 0.01), Err(Error::Capability(_))));
    }

    #[test]
    fn collocation_sampling() {
        let domains = [(0.0, 1.0), (0.0, 2.0 * PI), (0.0, 2.0 * PI)];
        let a = sample_collocation(&domains, 10_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_collocation(&domains, 10_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        for (k, &(lo, hi)) in domains.iter().enumerate() {
            assert!(a.iter().all(|p| p[k] >= lo && p[k] < hi));
            // mean of a uniform variable: σ = (hi − lo)/√12, standard error σ/√n
            let mean = a.iter().map(|p| p[k]).sum::<f64>() / a.len() as f64;
            let se = (hi - lo) / 12f64.sqrt() / 100.0;
            assert!((mean - 0.5 * (lo + hi)).abs() < 3.0 * se);
        }
        let g = sample_collocation_grid(&domains, 20_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(g.iter().map(Vec::len).product::<usize>(), 28 * 28 * 28);
    }

    #[test]
    fn task_observations_follow_the_reference() {
        let task = PinnTask::taylor_green([6, 32, 32], 1000, 0.01).unwrap();
        assert_eq!(task.observations().shape(), &[6, 32, 32, 3]);
        assert_eq!(task.observations().get(&[0, 0, 0, 2]), -2.0);
    }
}
