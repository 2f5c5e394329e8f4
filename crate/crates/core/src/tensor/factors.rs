use std::fmt;
use std::str::FromStr;

use super::DenseTensor;
use crate::error::{shape_err, Error, Result};

/// Decomposition format used to join per-axis factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Canonical-polyadic: a sum of rank-one outer products.
    Cp,
    /// Tensor-train: a chain of order-3 cores.
    Tt,
    /// Tucker: factor matrices around a free core tensor.
    Tucker,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Cp, Mode::Tt, Mode::Tucker];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cp => "CP",
            Mode::Tt => "TT",
            Mode::Tucker => "TU",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CP" => Ok(Mode::Cp),
            "TT" => Ok(Mode::Tt),
            "TU" | "TUCKER" => Ok(Mode::Tucker),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Per-axis factors plus the joining data for one decomposition mode.
///
/// Layouts (row-major, `N_k` = extent of axis `k`):
///
/// * CP: every axis factor is `[N_k, R]`; `channel_mix` is `[R, C]`.
/// * TT: the head is `[N_1, B_1]`, interior axis `k` holds one `B_{k-1} × B_k`
///   slice per input as `[N_k, B_{k-1}, B_k]`, the tail is `[N_d, B_{d-1}]` and
///   `channel_mix` is `[B_{d-1}, C]` attached to the tail bond.
/// * Tucker: every axis factor is `[N_k, R_k]`; `core` is `[R_1, ..., R_d, C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    mode: Mode,
    axis_factors: Vec<DenseTensor>,
    channel_mix: Option<DenseTensor>,
    core: Option<DenseTensor>,
}

impl FactorSet {
    pub fn cp(axis_factors: Vec<DenseTensor>, channel_mix: DenseTensor) -> Result<Self> {
        let fs = Self {
            mode: Mode::Cp,
            axis_factors,
            channel_mix: Some(channel_mix),
            core: None,
        };
        fs.validate()?;
        Ok(fs)
    }

    pub fn tt(axis_factors: Vec<DenseTensor>, channel_mix: DenseTensor) -> Result<Self> {
        let fs = Self {
            mode: Mode::Tt,
            axis_factors,
            channel_mix: Some(channel_mix),
            core: None,
        };
        fs.validate()?;
        Ok(fs)
    }

    pub fn tucker(axis_factors: Vec<DenseTensor>, core: DenseTensor) -> Result<Self> {
        let fs = Self {
            mode: Mode::Tucker,
            axis_factors,
            channel_mix: None,
            core: Some(core),
        };
        fs.validate()?;
        Ok(fs)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dims(&self) -> usize {
        self.axis_factors.len()
    }

    pub fn axis_factors(&self) -> &[DenseTensor] {
        &self.axis_factors
    }

    pub fn channel_mix(&self) -> Option<&DenseTensor> {
        self.channel_mix.as_ref()
    }

    pub fn core(&self) -> Option<&DenseTensor> {
        self.core.as_ref()
    }

    /// Input extents `N_1..N_d`.
    pub fn extents(&self) -> Vec<usize> {
        self.axis_factors.iter().map(|f| f.shape()[0]).collect()
    }

    pub fn channels(&self) -> usize {
        match (&self.channel_mix, &self.core) {
            (Some(mix), _) => mix.shape()[1],
            (None, Some(core)) => *core.shape().last().unwrap(),
            (None, None) => unreachable!("validated factor set"),
        }
    }

    /// CP: `R` per axis. TT: the `d - 1` bond ranks. Tucker: `R_1..R_d`.
    pub fn ranks(&self) -> Vec<usize> {
        match self.mode {
            Mode::Cp | Mode::Tucker => self.axis_factors.iter().map(|f| f.shape()[1]).collect(),
            Mode::Tt => self.axis_factors[..self.dims() - 1]
                .iter()
                .map(|f| *f.shape().last().unwrap())
                .collect(),
        }
    }

    /// Shape of the composed tensor: `[N_1, ..., N_d, C]`.
    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.extents();
        shape.push(self.channels());
        shape
    }

    /// Width of one factor row for axis `k` (TT interior rows are flattened
    /// slice matrices).
    pub fn row_width(&self, axis: usize) -> usize {
        self.axis_factors[axis].len() / self.axis_factors[axis].shape()[0]
    }

    /// Same factor set with axis `k` replaced. Used to form derivative
    /// compositions by the product rule.
    pub fn with_axis_factor(&self, axis: usize, factor: DenseTensor) -> Result<Self> {
        let mut fs = self.clone();
        fs.axis_factors[axis] = factor;
        fs.validate()?;
        Ok(fs)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.axis_factors.len();
        if d < 2 {
            return Err(shape_err!("need at least 2 axes, got {d}"));
        }
        if d + 1 > DenseTensor::MAX_MODES {
            return Err(shape_err!("at most {} axes supported", DenseTensor::MAX_MODES - 1));
        }
        match self.mode {
            Mode::Cp => {
                let mix = self.require_mix()?;
                let rank = self.axis_factors[0].shape().get(1).copied().unwrap_or(0);
                for (k, f) in self.axis_factors.iter().enumerate() {
                    if f.ndim() != 2 || f.shape()[1] != rank {
                        return Err(shape_err!(
                            "CP axis {k} factor has shape {:?}, expected [N, {rank}]",
                            f.shape()
                        ));
                    }
                }
                if mix.ndim() != 2 || mix.shape()[0] != rank {
                    return Err(shape_err!(
                        "CP channel mix has shape {:?}, expected [{rank}, C]",
                        mix.shape()
                    ));
                }
                if self.core.is_some() {
                    return Err(shape_err!("CP factor set must not carry a core"));
                }
            }
            Mode::Tt => {
                let mix = self.require_mix()?;
                let head = &self.axis_factors[0];
                if head.ndim() != 2 {
                    return Err(shape_err!("TT head must be a matrix, got {:?}", head.shape()));
                }
                let mut bond = head.shape()[1];
                for (k, f) in self.axis_factors[1..d - 1].iter().enumerate() {
                    if f.ndim() != 3 || f.shape()[1] != bond {
                        return Err(shape_err!(
                            "TT interior axis {} has shape {:?}, expected [N, {bond}, B]",
                            k + 1,
                            f.shape()
                        ));
                    }
                    bond = f.shape()[2];
                }
                let tail = &self.axis_factors[d - 1];
                if tail.ndim() != 2 || tail.shape()[1] != bond {
                    return Err(shape_err!(
                        "TT tail has shape {:?}, expected [N, {bond}]",
                        tail.shape()
                    ));
                }
                if mix.ndim() != 2 || mix.shape()[0] != bond {
                    return Err(shape_err!(
                        "TT channel mix has shape {:?}, expected [{bond}, C]",
                        mix.shape()
                    ));
                }
                if self.core.is_some() {
                    return Err(shape_err!("TT factor set must not carry a core"));
                }
            }
            Mode::Tucker => {
                if self.channel_mix.is_some() {
                    return Err(shape_err!("Tucker factor set must not carry a channel mix"));
                }
                let core = self
                    .core
                    .as_ref()
                    .ok_or_else(|| shape_err!("Tucker factor set needs a core"))?;
                if core.ndim() != d + 1 {
                    return Err(shape_err!(
                        "Tucker core has {} modes, expected {}",
                        core.ndim(),
                        d + 1
                    ));
                }
                for (k, f) in self.axis_factors.iter().enumerate() {
                    if f.ndim() != 2 || f.shape()[1] != core.shape()[k] {
                        return Err(shape_err!(
                            "Tucker axis {k} factor has shape {:?}, core mode extent is {}",
                            f.shape(),
                            core.shape()[k]
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn require_mix(&self) -> Result<&DenseTensor> {
        self.channel_mix
            .as_ref()
            .ok_or_else(|| shape_err!("{} factor set needs a channel mix", self.mode))
    }
}
