use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Core,
    EncodingTable,
    ChannelMix,
}

impl ParamRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Weight => "weight",
            Self::Bias => "bias",
            Self::Core => "core",
            Self::EncodingTable => "encoding-table",
            Self::ChannelMix => "channel-mix",
        }
    }
}

impl fmt::Display for ParamRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "weight" => Self::Weight,
            "bias" => Self::Bias,
            "core" => Self::Core,
            "encoding-table" => Self::EncodingTable,
            "channel-mix" => Self::ChannelMix,
            other => return Err(Error::Format(format!("unknown parameter role `{other}`"))),
        })
    }
}

/// A trainable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub id: ParamId,
    pub name: String,
    pub role: ParamRole,
    pub value: DenseTensor,
    pub grad: DenseTensor,
}

/// Registry of trainable leaves. Gradients accumulate until [`zero_grad`].
///
/// [`zero_grad`]: ParamStore::zero_grad
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, role: ParamRole, value: DenseTensor) -> ParamId {
        let id = ParamId(self.params.len());
        let grad = DenseTensor::zeros(value.shape()).expect("valid shape");
        self.params.push(Param {
            id,
            name: name.into(),
            role,
            value,
            grad,
        });
        id
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &DenseTensor {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseTensor {
        &self.params[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }
}
