use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Jet, ParamStore, Tape, Var};
use crate::backends::{mlp_param_count, ActivationKind, Mlp};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// A single MLP over all `d` coordinates, used as the unfactorized baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct MonolithicSpec {
    pub channels: usize,
    pub layers: usize,
    pub width: usize,
    pub activation: ActivationKind,
    pub domains: Vec<(f64, f64)>,
}

impl MonolithicSpec {
    pub fn dims(&self) -> usize {
        self.domains.len()
    }

    pub fn param_count(&self) -> usize {
        mlp_param_count(self.dims(), self.layers, self.width, self.channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() || self.layers == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::Config("monolithic spec needs d, layers, width and channels >= 1".into()));
        }
        if self.domains.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::Config("degenerate monolithic domain".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MonolithicModel {
    spec: MonolithicSpec,
    params: ParamStore,
    mlp: Mlp,
}

impl MonolithicModel {
    pub fn init(spec: MonolithicSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mlp = Mlp::init(
            spec.dims(),
            spec.layers,
            spec.width,
            spec.channels,
            spec.activation,
            &mut rng,
            &mut params,
            "mlp",
        );
        Ok(Self { spec, params, mlp })
    }

    pub fn spec(&self) -> &MonolithicSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Records the network on `tape` for points given as a flat row-major
    /// `[P, d]` array of physical coordinates. Output is `[P, C]`.
    pub fn points_on_tape(&self, tape: &mut Tape, points: &[f64]) -> Result<Var> {
        let d = self.spec.dims();
        if points.is_empty() || points.len() % d != 0 {
            return Err(Error::Input(format!("{} coordinates do not form {d}-tuples", points.len())));
        }
        let mut x = Vec::with_capacity(points.len());
        for p in points.chunks_exact(d) {
            for (k, &v) in p.iter().enumerate() {
                let (lo, hi) = self.spec.domains[k];
                x.push(2.0 * (v - lo) / (hi - lo) - 1.0);
            }
        }
        let input = tape.constant(DenseTensor::new(vec![points.len() / d, d], x)?);
        Ok(self.mlp.forward(tape, &self.params, &Jet::constant(input))?.value)
    }

    /// Evaluates every point of the tensor grid `coords`, in chunks of at
    /// most `chunk` points. Output is `[N_1, ..., N_d, C]`.
    pub fn eval_grid(&self, coords: &[Vec<f64>], chunk: usize) -> Result<DenseTensor> {
        let mut out = Vec::new();
        for_grid_chunks(coords, chunk, |pts| {
            let mut tape = Tape::new();
            let y = self.points_on_tape(&mut tape, pts)?;
            out.extend_from_slice(tape.value(y).data());
            Ok(())
        })?;
        let mut shape: Vec<usize> = coords.iter().map(Vec::len).collect();
        shape.push(self.spec.channels);
        DenseTensor::new(shape, out)
    }
}

/// Calls `f` with consecutive row-major runs of grid points (flattened
/// `[P, d]`), at most `chunk` points each.
pub(crate) fn for_grid_chunks<F>(coords: &[Vec<f64>], chunk: usize, mut f: F) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<()>,
{
    let d = coords.len();
    let extents: Vec<usize> = coords.iter().map(Vec::len).collect();
    let total: usize = extents.iter().product();
    let chunk = chunk.max(1);
    let mut idx = vec![0usize; d];
    let mut buf = Vec::with_capacity(chunk.min(total) * d);
    for p in 0..total {
        buf.extend(idx.iter().enumerate().map(|(k, &i)| coords[k][i]));
        crate::tensor::increment_index(&mut idx, &extents);
        if buf.len() == chunk * d || p + 1 == total {
            f(&buf)?;
            buf.clear();
        }
    }
    Ok(())
}
