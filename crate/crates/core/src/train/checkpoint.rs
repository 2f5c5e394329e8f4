//! Training snapshots.
//!
//! Layout (little-endian): magic `FINR`, version `u16`, then sections in a
//! fixed order. Each section is a `u16`-prefixed UTF-8 name followed by a
//! `u64`-prefixed payload:
//!
//! * `spec`: the model spec as canonical key-value text
//! * `params`: `u32` count, then per tensor its name, role and an FTNR dump
//! * `adam`: lr, β1, β2, ε as `f64`, step `u64`, then paired FTNR moments
//! * `rng`: ChaCha8 seed (32 bytes), stream `u64`, word position `u128`
//! * `step`: `u64`
//! * `meta`: free text recorded by the caller

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Adam;
use crate::autodiff::{ParamRole, ParamStore};
use crate::error::{Error, Result};
use crate::model::{FInrModel, FInrSpec};
use crate::tensor::ftnr::{self, Dtype};
use crate::tensor::DenseTensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FINR";
pub const CHECKPOINT_VERSION: u16 = 1;
const SECTIONS: [&str; 6] = ["spec", "params", "adam", "rng", "step", "meta"];

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub spec: FInrSpec,
    pub params: ParamStore,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
    pub step: u64,
    pub meta: String,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &DenseTensor) {
    let bytes = ftnr::to_bytes(t, Dtype::F64);
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&bytes);
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("section length overflows".into()))
    }

    fn str(&mut self) -> Result<&'a str> {
        let n = self.u16()? as usize;
        std::str::from_utf8(self.take(n)?).map_err(|_| Error::Format("invalid UTF-8 in checkpoint".into()))
    }

    fn tensor(&mut self) -> Result<DenseTensor> {
        let n = self.len()?;
        ftnr::read(self.take(n)?)
    }

    fn finish(&self, what: &str) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing bytes after {what}", self.buf.len())))
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());

        let mut params = Vec::new();
        params.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.iter() {
            put_str(&mut params, &p.name);
            put_str(&mut params, p.role.as_str());
            put_tensor(&mut params, &p.value);
        }

        let mut adam = Vec::new();
        for v in [self.adam.lr, self.adam.beta1, self.adam.beta2, self.adam.eps] {
            adam.extend_from_slice(&v.to_le_bytes());
        }
        adam.extend_from_slice(&self.adam.step_count().to_le_bytes());
        adam.extend_from_slice(&(self.adam.first_moments().len() as u32).to_le_bytes());
        for (m, v) in self.adam.first_moments().iter().zip(self.adam.second_moments()) {
            put_tensor(&mut adam, m);
            put_tensor(&mut adam, v);
        }

        let mut rng = Vec::new();
        rng.extend_from_slice(&self.rng.get_seed());
        rng.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        rng.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());

        let payloads = [
            self.spec.to_text().into_bytes(),
            params,
            adam,
            rng,
            self.step.to_le_bytes().to_vec(),
            self.meta.clone().into_bytes(),
        ];
        for (name, payload) in SECTIONS.iter().zip(payloads) {
            put_str(&mut out, name);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        let magic = r.take(4).map_err(|_| Error::Format("not a checkpoint: file too short".into()))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                expected: CHECKPOINT_VERSION,
                found: version,
            });
        }
        let mut sections = Vec::with_capacity(SECTIONS.len());
        for expected in SECTIONS {
            let name = r.str()?;
            if name != expected {
                return Err(Error::Format(format!("expected section `{expected}`, found `{name}`")));
            }
            let n = r.len()?;
            sections.push(Reader { buf: r.take(n)? });
        }
        r.finish("the last section")?;
        let [mut spec, mut params, mut adam, mut rng, mut step, meta]: [Reader; 6] =
            sections.try_into().map_err(|_| Error::Format("section count".into()))?;

        let text = std::str::from_utf8(spec.take(spec.buf.len())?)
            .map_err(|_| Error::Format("invalid UTF-8 in spec".into()))?;
        let spec_value = FInrSpec::from_text(text)?;

        let mut store = ParamStore::new();
        for _ in 0..params.u32()? {
            let name = params.str()?.to_string();
            let role: ParamRole = params.str()?.parse()?;
            store.add(name, role, params.tensor()?);
        }
        params.finish("params")?;

        let (lr, b1, b2, eps) = (adam.f64()?, adam.f64()?, adam.f64()?, adam.f64()?);
        let count = adam.u64()?;
        let pairs = adam.u32()?;
        let mut m = Vec::with_capacity(pairs as usize);
        let mut v = Vec::with_capacity(pairs as usize);
        for _ in 0..pairs {
            m.push(adam.tensor()?);
            v.push(adam.tensor()?);
        }
        adam.finish("adam")?;
        let adam_state = Adam::from_state(lr, (b1, b2), eps, count, m, v)?;

        let mut state = ChaCha8Rng::from_seed(rng.array()?);
        state.set_stream(rng.u64()?);
        state.set_word_pos(u128::from_le_bytes(rng.array()?));
        rng.finish("rng")?;

        let step_value = step.u64()?;
        step.finish("step")?;
        let meta = std::str::from_utf8(meta.buf)
            .map_err(|_| Error::Format("invalid UTF-8 in meta".into()))?
            .to_string();

        Ok(Self {
            spec: spec_value,
            params: store,
            adam: adam_state,
            rng: state,
            step: step_value,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Rebuilds the model: the spec fixes the parameter layout, the stored
    /// tensors supply the values.
    pub fn model(&self) -> Result<FInrModel> {
        let mut model = FInrModel::init(self.spec.clone(), 0)?;
        if model.params().len() != self.params.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, the spec needs {}",
                self.params.len(),
                model.params().len()
            )));
        }
        for (dst, src) in model.params_mut().iter_mut().zip(self.params.iter()) {
            if dst.name != src.name || dst.role != src.role || dst.value.shape() != src.value.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor `{}` {:?} does not match `{}` {:?}",
                    src.name,
                    src.value.shape(),
                    dst.name,
                    dst.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(model)
    }

    pub(crate) fn into_parts(self) -> Result<(FInrModel, Adam, ChaCha8Rng)> {
        let model = self.model()?;
        Ok((model, self.adam, self.rng))
    }
}
