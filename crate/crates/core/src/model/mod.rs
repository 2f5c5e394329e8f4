//! The factorized model: `d` univariate sub-networks joined by a CP, TT or
//! Tucker composition.

mod compose;
mod cost;
mod monolithic;
mod spec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use cost::{predict_cost, Architecture, ComplexityEstimate};
pub use monolithic::{MonolithicModel, MonolithicSpec};
pub(crate) use monolithic::for_grid_chunks;
pub use spec::{activation_token, encoding_token, parse_activation, parse_encoding, FInrSpec};

use crate::autodiff::{Jet, ParamId, ParamRole, ParamStore, Tape, Var};
use crate::backends::{init_subnetwork, SubNetwork};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, FactorSet, Mode};

/// Composed output with optional per-axis first and second derivatives.
///
/// On a tape `T = Var` and tensors are `[P, C]` matrices; evaluated results
/// are reshaped to `[N_1, ..., N_d, C]` for grids and `[P, C]` for points.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub value: T,
    pub partials: Vec<Option<T>>,
    pub second: Vec<Option<T>>,
}

impl<T> Field<T> {
    /// `∂Φ/∂x_axis`.
    pub fn partial(&self, axis: usize) -> Option<&T> {
        self.partials.get(axis).and_then(Option::as_ref)
    }

    /// `∂²Φ/∂x_axis²`.
    pub fn second(&self, axis: usize) -> Option<&T> {
        self.second.get(axis).and_then(Option::as_ref)
    }
}

impl Field<DenseTensor> {
    /// Sum of the per-axis second derivatives, accumulated in axis order.
    pub fn laplacian(&self) -> Option<DenseTensor> {
        let mut parts = self.second.iter();
        let mut acc = parts.next()?.clone()?;
        for s in parts {
            let s = s.as_ref()?;
            for (a, v) in acc.data_mut().iter_mut().zip(s.data()) {
                *a += v;
            }
        }
        Some(acc)
    }
}

/// A factorized implicit representation with its parameters.
#[derive(Clone, Debug)]
pub struct FInrModel {
    spec: FInrSpec,
    params: ParamStore,
    nets: Vec<SubNetwork>,
    joint: ParamId,
}

impl FInrModel {
    /// Initializes every sub-network and the mix or core from `seed`.
    pub fn init(spec: FInrSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut nets = Vec::with_capacity(spec.dims());
        for (k, net) in spec.axes.iter().enumerate() {
            nets.push(init_subnetwork(net, master.next_u64(), &mut params, &format!("axis{k}"))?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let shape = spec.joint_shape();
        // composed outputs start with a standard deviation near 0.1 when
        // factor entries have variance 1/2
        let terms = spec.joint_terms() as f64;
        let bound = (3.0 * 0.01 / (terms * 0.5f64.powi(spec.dims() as i32))).sqrt();
        let value = DenseTensor::from_fn(&shape, |_| rng.gen_range(-bound..bound))?;
        let (name, role) = match spec.mode {
            Mode::Tucker => ("core", ParamRole::Core),
            _ => ("mix", ParamRole::ChannelMix),
        };
        let joint = params.add(name, role, value);
        Ok(Self {
            spec,
            params,
            nets,
            joint,
        })
    }

    pub fn spec(&self) -> &FInrSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn nets(&self) -> &[SubNetwork] {
        &self.nets
    }

    /// Channel mix (CP, TT) or core (Tucker).
    pub fn joint(&self) -> ParamId {
        self.joint
    }

    /// Exact number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Maps physical coordinates of `axis` to `[-1, 1]` and lifts them to a
    /// jet whose derivative channels are in physical units.
    pub fn axis_input(&self, axis: usize, xs: &[f64], order: usize) -> Result<Jet<DenseTensor>> {
        let (lo, hi) = self.spec.domains[axis];
        let tol = 1e-9 * (hi - lo);
        let mut normalized = Vec::with_capacity(xs.len());
        for &x in xs {
            if !x.is_finite() {
                return Err(Error::Input(format!("non-finite coordinate on axis {axis}")));
            }
            if x < lo - tol || x > hi + tol {
                return Err(Error::Input(format!(
                    "coordinate {x} outside axis {axis} domain [{lo}, {hi}]"
                )));
            }
            normalized.push((2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0));
        }
        Jet::scaled_coordinate(&normalized, 2.0 / (hi - lo), order)
    }

    fn check_orders(&self, orders: &[usize]) -> Result<()> {
        if orders.len() != self.spec.dims() {
            return Err(Error::Input(format!(
                "expected {} jet orders, got {}",
                self.spec.dims(),
                orders.len()
            )));
        }
        if let Some(&o) = orders.iter().find(|&&o| o > 2) {
            return Err(Error::Capability(format!("jet order {o} is not supported")));
        }
        Ok(())
    }

    fn axis_jets(&self, tape: &mut Tape, axis: usize, xs: &[f64], order: usize) -> Result<Jet<Var>> {
        let x = self.axis_input(axis, xs, order)?;
        self.nets[axis].forward_jet(tape, &self.params, &x)
    }

    /// Records the full-grid evaluation on `tape`. `orders[k]` selects the
    /// derivative channels produced for axis `k`.
    pub fn grid_on_tape(&self, tape: &mut Tape, coords: &[Vec<f64>], orders: &[usize]) -> Result<Field<Var>> {
        self.check_coords(coords)?;
        self.check_orders(orders)?;
        let jets = coords
            .iter()
            .enumerate()
            .map(|(k, xs)| self.axis_jets(tape, k, xs, orders[k]))
            .collect::<Result<Vec<_>>>()?;
        let joint = tape.param(&self.params, self.joint);
        let channels = self.spec.channels;
        let mode = self.spec.mode;
        self.assemble(tape, &jets, |tape, factors| compose::grid(tape, mode, factors, joint, channels))
    }

    /// Records evaluation at scattered points (`points[p][k]` is coordinate
    /// `k` of point `p`).
    pub fn points_on_tape(&self, tape: &mut Tape, points: &[Vec<f64>], orders: &[usize]) -> Result<Field<Var>> {
        self.check_orders(orders)?;
        let d = self.spec.dims();
        if points.is_empty() {
            return Err(Error::Input("no evaluation points".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::Input(format!("point {p:?} does not have {d} coordinates")));
        }
        let jets = (0..d)
            .map(|k| {
                let xs: Vec<f64> = points.iter().map(|p| p[k]).collect();
                self.axis_jets(tape, k, &xs, orders[k])
            })
            .collect::<Result<Vec<_>>>()?;
        let joint = tape.param(&self.params, self.joint);
        let mode = self.spec.mode;
        self.assemble(tape, &jets, |tape, rows| compose::points(tape, mode, rows, joint))
    }

    /// Value plus product-rule derivatives: axis `k`'s factor is replaced by
    /// its derivative channel while the other factors keep their values.
    fn assemble<F>(&self, tape: &mut Tape, jets: &[Jet<Var>], mut join: F) -> Result<Field<Var>>
    where
        F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
    {
        let values: Vec<Var> = jets.iter().map(|j| j.value).collect();
        let value = join(tape, &values)?;
        let mut partials = Vec::with_capacity(jets.len());
        let mut second = Vec::with_capacity(jets.len());
        for (k, jet) in jets.iter().enumerate() {
            for (slot, channel) in [(&mut partials, jet.d1), (&mut second, jet.d2)] {
                let out = match channel {
                    Some(c) => {
                        let mut factors = values.clone();
                        factors[k] = c;
                        Some(join(tape, &factors)?)
                    }
                    None => None,
                };
                slot.push(out);
            }
        }
        Ok(Field {
            value,
            partials,
            second,
        })
    }

    fn check_coords(&self, coords: &[Vec<f64>]) -> Result<()> {
        if coords.len() != self.spec.dims() {
            return Err(Error::Input(format!(
                "expected coordinates for {} axes, got {}",
                self.spec.dims(),
                coords.len()
            )));
        }
        if coords.iter().any(Vec::is_empty) {
            return Err(Error::Input("empty axis coordinate list".into()));
        }
        Ok(())
    }

    /// Evaluates the model on the tensor grid `coords[0] × ... × coords[d-1]`
    /// using one sub-network pass per axis.
    pub fn eval_grid(&self, coords: &[Vec<f64>], jet_order: usize) -> Result<Field<DenseTensor>> {
        let mut tape = Tape::new();
        let orders = vec![jet_order; self.spec.dims()];
        let field = self.grid_on_tape(&mut tape, coords, &orders)?;
        let mut shape: Vec<usize> = coords.iter().map(Vec::len).collect();
        shape.push(self.spec.channels);
        field_values(&tape, &field, &shape)
    }

    /// Evaluates the model at scattered points; outputs are `[P, C]`.
    pub fn eval_points(&self, points: &[Vec<f64>], jet_order: usize) -> Result<Field<DenseTensor>> {
        let mut tape = Tape::new();
        let orders = vec![jet_order; self.spec.dims()];
        let field = self.points_on_tape(&mut tape, points, &orders)?;
        let shape = [points.len(), self.spec.channels];
        field_values(&tape, &field, &shape)
    }

    /// The value-channel factors on a grid as a plain [`FactorSet`].
    pub fn factor_set(&self, coords: &[Vec<f64>]) -> Result<FactorSet> {
        self.check_coords(coords)?;
        let mut tape = Tape::new();
        let mut factors = Vec::with_capacity(coords.len());
        for (k, xs) in coords.iter().enumerate() {
            let jet = self.axis_jets(&mut tape, k, xs, 0)?;
            let f = tape.value(jet.value).clone();
            let n = xs.len();
            factors.push(match (self.spec.mode, k) {
                (Mode::Tt, k) if k > 0 && k + 1 < coords.len() => {
                    f.reshape(&[n, self.spec.ranks[k - 1], self.spec.ranks[k]])?
                }
                _ => f,
            });
        }
        let joint = self.params.value(self.joint).clone();
        match self.spec.mode {
            Mode::Cp => FactorSet::cp(factors, joint),
            Mode::Tt => FactorSet::tt(factors, joint),
            Mode::Tucker => FactorSet::tucker(factors, joint),
        }
    }
}

fn field_values(tape: &Tape, field: &Field<Var>, shape: &[usize]) -> Result<Field<DenseTensor>> {
    let get = |v: Var| tape.value(v).clone().reshape(shape);
    Ok(Field {
        value: get(field.value)?,
        partials: field.partials.iter().map(|p| p.map(get).transpose()).collect::<Result<_>>()?,
        second: field.second.iter().map(|p| p.map(get).transpose()).collect::<Result<_>>()?,
    })
}

/// `n` evenly spaced coordinates covering `[lo, hi]` including both ends
/// (the midpoint when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests;
