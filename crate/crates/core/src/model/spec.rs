use std::collections::BTreeMap;

use crate::backends::{ActivationKind, Encoding, SubNetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Mode};

const MAX_MODES: usize = DenseTensor::MAX_MODES;

/// Architecture of a factorized model.
///
/// `ranks` holds one entry for CP, the `d − 1` bond ranks for TT and one
/// rank per axis for Tucker. Each axis network's `output_dim` must equal the
/// factor width the mode expects ([`FInrSpec::factor_width`]).
#[derive(Clone, Debug, PartialEq)]
pub struct FInrSpec {
    pub mode: Mode,
    pub ranks: Vec<usize>,
    pub channels: usize,
    pub axes: Vec<SubNetworkSpec>,
    pub domains: Vec<(f64, f64)>,
}

impl FInrSpec {
    /// Same rank everywhere and the same network shape on every axis.
    pub fn new(mode: Mode, rank: usize, channels: usize, net: SubNetworkSpec, domains: Vec<(f64, f64)>) -> Result<Self> {
        let d = domains.len();
        let count = match mode {
            Mode::Cp => 1,
            Mode::Tt => d.saturating_sub(1),
            Mode::Tucker => d,
        };
        Self::with_ranks(mode, vec![rank; count], channels, net, domains)
    }

    pub fn with_ranks(
        mode: Mode,
        ranks: Vec<usize>,
        channels: usize,
        net: SubNetworkSpec,
        domains: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let d = domains.len();
        let mut spec = Self {
            mode,
            ranks,
            channels,
            axes: vec![net; d],
            domains,
        };
        spec.check_ranks()?;
        for k in 0..d {
            spec.axes[k].output_dim = spec.factor_width(k);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn dims(&self) -> usize {
        self.domains.len()
    }

    fn check_ranks(&self) -> Result<()> {
        let d = self.dims();
        if d < 2 || d + 1 > MAX_MODES {
            return Err(Error::Config(format!("input dimension must be in 2..={}, got {d}", MAX_MODES - 1)));
        }
        let expected = match self.mode {
            Mode::Cp => 1,
            Mode::Tt => d - 1,
            Mode::Tucker => d,
        };
        if self.ranks.len() != expected || self.ranks.contains(&0) {
            return Err(Error::Config(format!(
                "{} with d={d} needs {expected} positive ranks, got {:?}",
                self.mode, self.ranks
            )));
        }
        Ok(())
    }

    /// Number of columns axis `k`'s network must emit.
    pub fn factor_width(&self, k: usize) -> usize {
        let d = self.dims();
        match self.mode {
            Mode::Cp => self.ranks[0],
            Mode::Tucker => self.ranks[k],
            Mode::Tt if k == 0 => self.ranks[0],
            Mode::Tt if k == d - 1 => self.ranks[d - 2],
            Mode::Tt => self.ranks[k - 1] * self.ranks[k],
        }
    }

    /// Shape of the channel mix (CP, TT) or core (Tucker).
    pub fn joint_shape(&self) -> Vec<usize> {
        match self.mode {
            Mode::Cp => vec![self.ranks[0], self.channels],
            Mode::Tt => vec![*self.ranks.last().unwrap(), self.channels],
            Mode::Tucker => {
                let mut s = self.ranks.clone();
                s.push(self.channels);
                s
            }
        }
    }

    /// Number of rank tuples summed per output entry.
    pub fn joint_terms(&self) -> usize {
        match self.mode {
            Mode::Cp => self.ranks[0],
            Mode::Tt | Mode::Tucker => self.ranks.iter().product(),
        }
    }

    /// Highest jet order every axis can deliver.
    pub fn max_jet_order(&self) -> usize {
        self.axes.iter().map(SubNetworkSpec::max_jet_order).min().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.check_ranks()?;
        let d = self.dims();
        if self.channels == 0 {
            return Err(Error::Config("channels must be >= 1".into()));
        }
        if self.axes.len() != d {
            return Err(Error::Config(format!("{} axis networks for {d} axes", self.axes.len())));
        }
        for (k, &(lo, hi)) in self.domains.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("axis {k} domain [{lo}, {hi}] is degenerate")));
            }
        }
        for (k, net) in self.axes.iter().enumerate() {
            net.validate()?;
            if net.output_dim != self.factor_width(k) {
                return Err(Error::Config(format!(
                    "axis {k} network emits {} columns, {} needs {}",
                    net.output_dim,
                    self.mode,
                    self.factor_width(k)
                )));
            }
        }
        Ok(())
    }

    /// Canonical `key=value` text, one entry per line in a fixed order.
    /// Reals are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        out += &format!("mode={}\n", self.mode);
        out += &format!("ranks={}\n", join(&self.ranks));
        out += &format!("channels={}\n", self.channels);
        out += &format!("dims={}\n", self.dims());
        for (k, (lo, hi)) in self.domains.iter().enumerate() {
            out += &format!("domain.{k}={lo:?},{hi:?}\n");
        }
        for (k, net) in self.axes.iter().enumerate() {
            out += &format!("axis.{k}.encoding={}\n", encoding_token(&net.encoding));
            out += &format!("axis.{k}.layers={}\n", net.layers);
            out += &format!("axis.{k}.width={}\n", net.width);
            out += &format!("axis.{k}.activation={}\n", activation_token(&net.activation));
            out += &format!("axis.{k}.output_dim={}\n", net.output_dim);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad spec line `{line}`")))?;
            map.insert(k.to_string(), v.to_string());
        }
        let mut take = |key: &str| {
            map.remove(key)
                .ok_or_else(|| Error::Format(format!("spec is missing `{key}`")))
        };
        let num = |s: String| -> Result<usize> {
            s.parse().map_err(|_| Error::Format(format!("bad integer `{s}`")))
        };
        let real = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Format(format!("bad real `{s}`")))
        };
        let mode: Mode = take("mode")?.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let ranks = take("ranks")?
            .split(',')
            .map(|s| num(s.to_string()))
            .collect::<Result<Vec<_>>>()?;
        let channels = num(take("channels")?)?;
        let d = num(take("dims")?)?;
        if d > MAX_MODES {
            return Err(Error::Format(format!("dims {d} too large")));
        }
        let mut domains = Vec::with_capacity(d);
        let mut axes = Vec::with_capacity(d);
        for k in 0..d {
            let dom = take(&format!("domain.{k}"))?;
            let (lo, hi) = dom
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad domain `{dom}`")))?;
            domains.push((real(lo)?, real(hi)?));
            axes.push(SubNetworkSpec {
                encoding: parse_encoding(&take(&format!("axis.{k}.encoding"))?)?,
                layers: num(take(&format!("axis.{k}.layers"))?)?,
                width: num(take(&format!("axis.{k}.width"))?)?,
                activation: parse_activation(&take(&format!("axis.{k}.activation"))?)?,
                output_dim: num(take(&format!("axis.{k}.output_dim"))?)?,
            });
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::Format(format!("unknown spec key `{extra}`")));
        }
        let spec = Self {
            mode,
            ranks,
            channels,
            axes,
            domains,
        };
        spec.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(spec)
    }
}

/// Compact form such as `sine:30` or `gabor:30,10`.
pub fn activation_token(a: &ActivationKind) -> String {
    match *a {
        ActivationKind::Relu => "relu".into(),
        ActivationKind::Tanh => "tanh".into(),
        ActivationKind::Sine { omega0 } => format!("sine:{omega0:?}"),
        ActivationKind::Gabor { omega0, s0 } => format!("gabor:{omega0:?},{s0:?}"),
        ActivationKind::Finer { omega0, bias_k } => format!("finer:{omega0:?},{bias_k:?}"),
        ActivationKind::Gaussian { s } => format!("gaussian:{s:?}"),
    }
}

/// Parses [`activation_token`] output; bare names take default
/// hyperparameters.
pub fn parse_activation(s: &str) -> Result<ActivationKind> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let vals = parse_reals(args)?;
    let arg = |i: usize, default: f64| vals.get(i).copied().unwrap_or(default);
    let w0 = ActivationKind::DEFAULT_OMEGA0;
    let kind = match name.trim().to_ascii_lowercase().as_str() {
        "relu" => ActivationKind::Relu,
        "tanh" => ActivationKind::Tanh,
        "sine" | "siren" => ActivationKind::Sine { omega0: arg(0, w0) },
        "gabor" | "wire" => ActivationKind::Gabor {
            omega0: arg(0, w0),
            s0: arg(1, ActivationKind::DEFAULT_GABOR_S0),
        },
        "finer" => ActivationKind::Finer {
            omega0: arg(0, w0),
            bias_k: arg(1, ActivationKind::DEFAULT_FINER_K),
        },
        "gaussian" => ActivationKind::Gaussian { s: arg(0, 1.0) },
        other => return Err(Error::Config(format!("unknown activation `{other}`"))),
    };
    Ok(kind)
}

pub fn encoding_token(e: &Encoding) -> String {
    match *e {
        Encoding::None => "none".into(),
        Encoding::Fourier { levels } => format!("fourier:{levels}"),
        Encoding::FeatureGrid {
            levels,
            features,
            base_resolution,
            growth,
        } => format!("featuregrid:{levels},{features},{base_resolution},{growth:?}"),
    }
}

/// Parses [`encoding_token`] output; bare names take defaults
/// (`fourier` uses 6 levels).
pub fn parse_encoding(s: &str) -> Result<Encoding> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let vals = parse_reals(args)?;
    let int = |i: usize, default: usize| -> Result<usize> {
        match vals.get(i) {
            None => Ok(default),
            Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(v) => Err(Error::Config(format!("expected an integer, got {v}"))),
        }
    };
    let enc = match name.trim().to_ascii_lowercase().as_str() {
        "none" => Encoding::None,
        "fourier" | "pe" => Encoding::Fourier { levels: int(0, 6)? },
        "featuregrid" | "he" => {
            let Encoding::FeatureGrid {
                levels,
                features,
                base_resolution,
                growth,
            } = Encoding::DEFAULT_GRID
            else {
                unreachable!()
            };
            Encoding::FeatureGrid {
                levels: int(0, levels)?,
                features: int(1, features)?,
                base_resolution: int(2, base_resolution)?,
                growth: vals.get(3).copied().unwrap_or(growth),
            }
        }
        other => return Err(Error::Config(format!("unknown encoding `{other}`"))),
    };
    enc.validate()?;
    Ok(enc)
}

fn parse_reals(args: &str) -> Result<Vec<f64>> {
    if args.trim().is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{a}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let net = SubNetworkSpec::new(ActivationKind::Gabor { omega0: 20.0, s0: 7.5 }, 1)
            .with_shape(2, 16)
            .with_encoding(Encoding::Fourier { levels: 3 });
        let spec = FInrSpec::new(Mode::Tt, 4, 3, net, vec![(0.0, 1.0), (-0.1, 2.5), (0.0, 6.283185307179586)]).unwrap();
        let text = spec.to_text();
        let back = FInrSpec::from_text(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_text(), text);
        assert_eq!(spec.axes[1].output_dim, 16);
    }

    #[test]
    fn unknown_keys_and_bad_widths_are_rejected() {
        let net = SubNetworkSpec::new(ActivationKind::Relu, 1).with_shape(1, 4);
        let spec = FInrSpec::new(Mode::Cp, 2, 1, net, vec![(0.0, 1.0); 2]).unwrap();
        let text = spec.to_text() + "extra=1\n";
        assert!(FInrSpec::from_text(&text).is_err());
        let broken = spec.to_text().replace("axis.0.output_dim=2", "axis.0.output_dim=3");
        assert!(FInrSpec::from_text(&broken).is_err());
    }

    #[test]
    fn dimension_and_domain_checks() {
        let net = SubNetworkSpec::new(ActivationKind::Relu, 1).with_shape(1, 4);
        assert!(FInrSpec::new(Mode::Cp, 2, 1, net, vec![(0.0, 1.0)]).is_err());
        assert!(FInrSpec::new(Mode::Cp, 2, 1, net, vec![(0.0, 1.0); 6]).is_err());
        assert!(FInrSpec::new(Mode::Cp, 2, 1, net, vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(FInrSpec::new(Mode::Tucker, 0, 1, net, vec![(0.0, 1.0); 2]).is_err());
    }

    #[test]
    fn tokens_parse() {
        assert_eq!(parse_activation("sine").unwrap(), ActivationKind::Sine { omega0: 30.0 });
        assert_eq!(parse_activation("finer:10,2").unwrap(), ActivationKind::Finer { omega0: 10.0, bias_k: 2.0 });
        assert_eq!(parse_encoding("fourier:4").unwrap(), Encoding::Fourier { levels: 4 });
        assert_eq!(parse_encoding("featuregrid").unwrap(), Encoding::DEFAULT_GRID);
        assert!(parse_activation("swish").is_err());
        assert!(parse_encoding("fourier:1.5").is_err());
    }
}
