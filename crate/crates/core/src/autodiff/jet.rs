use super::tape::{Tape, Var};
use crate::backends::ActivationKind;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// A value with its first and second derivatives with respect to one scalar
/// input coordinate. All present channels share one shape.
///
/// `Jet<Var>` lives on a tape; `Jet<DenseTensor>` is an evaluated result.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub d1: Option<T>,
    pub d2: Option<T>,
}

impl<T> Jet<T> {
    pub fn constant(value: T) -> Self {
        Self {
            value,
            d1: None,
            d2: None,
        }
    }

    /// Highest derivative channel carried (0, 1 or 2).
    pub fn order(&self) -> usize {
        match (&self.d1, &self.d2) {
            (_, Some(_)) => 2,
            (Some(_), None) => 1,
            (None, None) => 0,
        }
    }

    /// Channel `k` (0 = value).
    pub fn channel(&self, k: usize) -> Option<&T> {
        match k {
            0 => Some(&self.value),
            1 => self.d1.as_ref(),
            2 => self.d2.as_ref(),
            _ => None,
        }
    }
}

impl Jet<DenseTensor> {
    /// Lifts scalar coordinates: value `x`, `d1 = 1`, `d2 = 0`, truncated to
    /// `order`. Shape is `[len, 1]`.
    pub fn coordinate(xs: &[f64], order: usize) -> Result<Self> {
        Self::scaled_coordinate(xs, 1.0, order)
    }

    /// Like [`Jet::coordinate`] but with `d1 = slope`, for inputs that are an
    /// affine image of the physical coordinate.
    pub fn scaled_coordinate(xs: &[f64], slope: f64, order: usize) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Input("no coordinates".into()));
        }
        let n = xs.len();
        let value = DenseTensor::new(vec![n, 1], xs.to_vec())?;
        Ok(Self {
            value,
            d1: (order >= 1).then(|| DenseTensor::filled(&[n, 1], slope).unwrap()),
            d2: (order >= 2).then(|| DenseTensor::zeros(&[n, 1]).unwrap()),
        })
    }
}

impl Tape {
    /// Records a constant jet.
    pub fn jet_constant(&mut self, jet: Jet<DenseTensor>) -> Jet<Var> {
        Jet {
            value: self.constant(jet.value),
            d1: jet.d1.map(|t| self.constant(t)),
            d2: jet.d2.map(|t| self.constant(t)),
        }
    }

    pub fn jet_values(&self, jet: &Jet<Var>) -> Jet<DenseTensor> {
        Jet {
            value: self.value(jet.value).clone(),
            d1: jet.d1.map(|v| self.value(v).clone()),
            d2: jet.d2.map(|v| self.value(v).clone()),
        }
    }

    /// Affine layer `x·W (+ b)`; derivative channels are mapped by `W` only.
    pub fn jet_linear(&mut self, x: &Jet<Var>, weight: Var, bias: Option<Var>) -> Result<Jet<Var>> {
        let mut value = self.matmul(x.value, weight)?;
        if let Some(b) = bias {
            value = self.add_bias(value, b)?;
        }
        let d1 = x.d1.map(|d| self.matmul(d, weight)).transpose()?;
        let d2 = x.d2.map(|d| self.matmul(d, weight)).transpose()?;
        Ok(Jet { value, d1, d2 })
    }

    /// Pointwise activation on a jet (second-order chain rule):
    /// `v' = σ(v)`, `d1' = σ'(v)·d1`, `d2' = σ''(v)·d1² + σ'(v)·d2`.
    pub fn jet_activation(&mut self, x: &Jet<Var>, kind: ActivationKind) -> Result<Jet<Var>> {
        let order = x.order();
        if order + 1 > kind.max_order() {
            return Err(Error::Capability(format!(
                "{kind} cannot propagate jets of order {order} with parameter gradients"
            )));
        }
        let value = self.activation(x.value, kind, 0)?;
        if order == 0 {
            return Ok(Jet::constant(value));
        }
        let s1 = self.activation(x.value, kind, 1)?;
        let x1 = x.d1.expect("order >= 1");
        let d1 = self.mul(s1, x1)?;
        let d2 = match x.d2 {
            Some(x2) => {
                let s2 = self.activation(x.value, kind, 2)?;
                let sq = self.square(x1);
                let curv = self.mul(s2, sq)?;
                let lin = self.mul(s1, x2)?;
                Some(self.add(curv, lin)?)
            }
            None => None,
        };
        Ok(Jet {
            value,
            d1: Some(d1),
            d2,
        })
    }
}
