use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActivationKind, Encoding};
use crate::autodiff::{Jet, ParamId, ParamRole, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Architecture of one univariate sub-network: encoding, `layers` hidden
/// activated layers of `width` features, then a linear map to `output_dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubNetworkSpec {
    pub encoding: Encoding,
    pub layers: usize,
    pub width: usize,
    pub activation: ActivationKind,
    pub output_dim: usize,
}

impl SubNetworkSpec {
    /// Four hidden layers of 256 features.
    pub fn new(activation: ActivationKind, output_dim: usize) -> Self {
        Self {
            encoding: Encoding::None,
            layers: 4,
            width: 256,
            activation,
            output_dim,
        }
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_shape(mut self, layers: usize, width: usize) -> Self {
        self.layers = layers;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.width == 0 || self.output_dim == 0 {
            return Err(Error::Config(format!(
                "sub-network needs layers, width and output_dim >= 1 (got {}, {}, {})",
                self.layers, self.width, self.output_dim
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self.activation {
            ActivationKind::Sine { omega0 } | ActivationKind::Finer { omega0, .. } => positive(omega0),
            ActivationKind::Gabor { omega0, s0 } => positive(omega0) && positive(s0),
            ActivationKind::Gaussian { s } => positive(s),
            ActivationKind::Relu | ActivationKind::Tanh => true,
        };
        if !ok {
            return Err(Error::Config(format!("invalid activation hyperparameters: {}", self.activation)));
        }
        self.encoding.validate()
    }

    pub fn param_count(&self) -> usize {
        mlp_param_count(self.encoding.output_dim(), self.layers, self.width, self.output_dim)
            + self.encoding.param_count()
    }

    /// Highest input-derivative order this network can deliver with
    /// parameter gradients attached.
    pub fn max_jet_order(&self) -> usize {
        if self.encoding.is_piecewise_linear() {
            1
        } else {
            (self.activation.max_order() - 1).min(2)
        }
    }
}

pub(crate) fn mlp_param_count(input: usize, layers: usize, width: usize, output: usize) -> usize {
    (input * width + width) + (layers - 1) * (width * width + width) + (width * output + output)
}

#[derive(Clone, Debug)]
pub(crate) struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Plain MLP over already-encoded features; shared by sub-networks and the
/// monolithic baseline.
#[derive(Clone, Debug)]
pub(crate) struct Mlp {
    pub activation: ActivationKind,
    pub layers: Vec<Dense>,
}

impl Mlp {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        input: usize,
        layers: usize,
        width: usize,
        output: usize,
        activation: ActivationKind,
        rng: &mut ChaCha8Rng,
        store: &mut ParamStore,
        prefix: &str,
    ) -> Self {
        let mut dense = Vec::with_capacity(layers + 1);
        let mut fan_in = input;
        for l in 0..=layers {
            let fan_out = if l == layers { output } else { width };
            let (wb, bb) = init_bounds(activation, l, fan_in, fan_out, l == layers);
            let w = DenseTensor::from_fn(&[fan_in, fan_out], |_| uniform(rng, wb)).unwrap();
            let b = DenseTensor::from_fn(&[fan_out], |_| uniform(rng, bb)).unwrap();
            dense.push(Dense {
                weight: store.add(format!("{prefix}.layer{l}.weight"), ParamRole::Weight, w),
                bias: store.add(format!("{prefix}.layer{l}.bias"), ParamRole::Bias, b),
            });
            fan_in = fan_out;
        }
        Self {
            activation,
            layers: dense,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: &Jet<Var>) -> Result<Jet<Var>> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (l, d) in self.layers.iter().enumerate() {
            let w = tape.param(store, d.weight);
            let b = tape.param(store, d.bias);
            h = tape.jet_linear(&h, w, Some(b))?;
            if l < last {
                h = tape.jet_activation(&h, self.activation)?;
            }
        }
        Ok(h)
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|d| [d.weight, d.bias])
    }
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..bound)
    }
}

/// (weight bound, bias bound) for layer `l` of an MLP.
fn init_bounds(kind: ActivationKind, l: usize, fan_in: usize, fan_out: usize, output: bool) -> (f64, f64) {
    let fan_in_f = fan_in as f64;
    match kind.omega0() {
        Some(w0) => {
            if l == 0 && !output {
                let bias = match kind {
                    ActivationKind::Finer { bias_k, .. } => bias_k,
                    _ => 1.0 / fan_in_f,
                };
                (1.0 / fan_in_f, bias)
            } else {
                let b = (6.0 / fan_in_f).sqrt() / w0;
                (b, b)
            }
        }
        None => ((6.0 / (fan_in + fan_out) as f64).sqrt(), 0.0),
    }
}

/// Parameter handles of one initialized univariate sub-network.
#[derive(Clone, Debug)]
pub struct SubNetwork {
    spec: SubNetworkSpec,
    tables: Vec<ParamId>,
    mlp: Mlp,
}

/// Draws the parameters of `spec` from a ChaCha8 stream seeded with `seed`
/// and registers them in `store` under `name`.
pub fn init_subnetwork(spec: &SubNetworkSpec, seed: u64, store: &mut ParamStore, name: &str) -> Result<SubNetwork> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = spec
        .encoding
        .table_shapes()
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let t = DenseTensor::from_fn(s, |_| rng.gen_range(-1e-4..1e-4)).unwrap();
            store.add(format!("{name}.grid{l}"), ParamRole::EncodingTable, t)
        })
        .collect();
    let mlp = Mlp::init(
        spec.encoding.output_dim(),
        spec.layers,
        spec.width,
        spec.output_dim,
        spec.activation,
        &mut rng,
        store,
        name,
    );
    Ok(SubNetwork {
        spec: *spec,
        tables,
        mlp,
    })
}

impl SubNetwork {
    pub fn spec(&self) -> &SubNetworkSpec {
        &self.spec
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.tables.iter().copied().chain(self.mlp.param_ids()).collect()
    }

    /// Records the network on `tape` for a coordinate jet already mapped to
    /// `[-1, 1]`. Output is `[n, output_dim]` per channel.
    pub fn forward_jet(&self, tape: &mut Tape, store: &ParamStore, x: &Jet<DenseTensor>) -> Result<Jet<Var>> {
        let order = x.order();
        if order > self.spec.max_jet_order() {
            return Err(Error::Capability(format!(
                "sub-network ({} encoding, {}) cannot supply input derivatives of order {order}",
                encoding_name(&self.spec.encoding),
                self.spec.activation
            )));
        }
        let tables: Vec<Var> = self.tables.iter().map(|&id| tape.param(store, id)).collect();
        let features = self.spec.encoding.encode_on_tape(tape, x, &tables)?;
        self.mlp.forward(tape, store, &features)
    }
}

pub(crate) fn encoding_name(e: &Encoding) -> &'static str {
    match e {
        Encoding::None => "none",
        Encoding::Fourier { .. } => "fourier",
        Encoding::FeatureGrid { .. } => "featuregrid",
    }
}

/// Evaluates `net` at scalar coordinates (already in `[-1, 1]`) with
/// derivative channels up to `jet_order`. Returns `[len, output_dim]` tensors.
pub fn forward_axis(net: &SubNetwork, store: &ParamStore, xs: &[f64], jet_order: usize) -> Result<Jet<DenseTensor>> {
    let mut tape = Tape::new();
    let x = Jet::coordinate(xs, jet_order)?;
    let out = net.forward_jet(&mut tape, store, &x)?;
    Ok(tape.jet_values(&out))
}
