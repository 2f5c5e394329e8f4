use std::fmt;

use crate::error::{Error, Result};

/// Pointwise nonlinearity with analytic derivatives up to third order.
///
/// Frequency-type activations carry their scale inside the nonlinearity, so
/// `Sine { omega0 }` is `sin(ω0·z)` applied to the raw pre-activation `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    Relu,
    Tanh,
    /// `sin(ω0·z)`.
    Sine { omega0: f64 },
    /// Real Gabor wavelet `exp(−(s0·z)²)·sin(ω0·z)`.
    Gabor { omega0: f64, s0: f64 },
    /// `sin(ω0·(|z| + 1)·z)`; `bias_k` only affects initialization.
    Finer { omega0: f64, bias_k: f64 },
    /// `exp(−(s·z)²)`.
    Gaussian { s: f64 },
}

impl ActivationKind {
    pub const DEFAULT_OMEGA0: f64 = 30.0;
    pub const DEFAULT_GABOR_S0: f64 = 10.0;
    pub const DEFAULT_FINER_K: f64 = 1.0;

    /// Highest derivative order with an analytic definition.
    pub fn max_order(&self) -> usize {
        3
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Tanh => "tanh",
            Self::Sine { .. } => "sine",
            Self::Gabor { .. } => "gabor",
            Self::Finer { .. } => "finer",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    /// Frequency scale used by the SIREN-style initialization, if any.
    pub fn omega0(&self) -> Option<f64> {
        match *self {
            Self::Sine { omega0 } | Self::Gabor { omega0, .. } | Self::Finer { omega0, .. } => {
                Some(omega0)
            }
            _ => None,
        }
    }

    /// `σ^(order)(z)` for `order` in `0..=3`.
    pub fn derivative(&self, order: usize, z: f64) -> f64 {
        match *self {
            Self::Relu => match order {
                0 => z.max(0.0),
                1 => {
                    if z > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            },
            Self::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                match order {
                    0 => t,
                    1 => s,
                    2 => -2.0 * t * s,
                    _ => (6.0 * t * t - 2.0) * s,
                }
            }
            Self::Sine { omega0: w } => {
                let (s, c) = (w * z).sin_cos();
                match order {
                    0 => s,
                    1 => w * c,
                    2 => -w * w * s,
                    _ => -w * w * w * c,
                }
            }
            Self::Gaussian { s } => {
                let g = gaussian_derivs(s * s, z);
                g[order.min(3)]
            }
            Self::Gabor { omega0: w, s0 } => {
                let g = gaussian_derivs(s0 * s0, z);
                let (sn, cs) = (w * z).sin_cos();
                let h = [sn, w * cs, -w * w * sn, -w * w * w * cs];
                match order {
                    0 => g[0] * h[0],
                    1 => g[1] * h[0] + g[0] * h[1],
                    2 => g[2] * h[0] + 2.0 * g[1] * h[1] + g[0] * h[2],
                    _ => g[3] * h[0] + 3.0 * g[2] * h[1] + 3.0 * g[1] * h[2] + g[0] * h[3],
                }
            }
            Self::Finer { omega0: w, .. } => {
                // inner map h(z) = z·(|z| + 1); h''' = 0 away from the origin
                let h0 = z * (z.abs() + 1.0);
                let h1 = 2.0 * z.abs() + 1.0;
                let h2 = if z == 0.0 { 0.0 } else { 2.0 * z.signum() };
                let (sn, cs) = (w * h0).sin_cos();
                match order {
                    0 => sn,
                    1 => w * h1 * cs,
                    2 => w * h2 * cs - w * w * h1 * h1 * sn,
                    _ => -3.0 * w * w * h1 * h2 * sn - w * w * w * h1 * h1 * h1 * cs,
                }
            }
        }
    }

    /// Checks the analytic σ', σ'', σ''' against central differences of the
    /// next-lower derivative at a fixed set of probe points. Returns the worst
    /// relative error (denominator floored at 1).
    pub fn self_test(&self) -> Result<f64> {
        const PROBES: [f64; 6] = [-0.83, -0.31, -0.047, 0.052, 0.29, 0.71];
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for &z in &PROBES {
            for order in 1..=self.max_order() {
                let numeric = (self.derivative(order - 1, z + h)
                    - self.derivative(order - 1, z - h))
                    / (2.0 * h);
                let analytic = self.derivative(order, z);
                let scale = analytic.abs().max(numeric.abs()).max(1.0);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        let tolerance = 1e-3 * self.omega0().unwrap_or(1.0).max(1.0);
        if worst > tolerance {
            return Err(Error::Capability(format!(
                "{self} derivative self-test failed (relative error {worst:.3e})"
            )));
        }
        Ok(worst)
    }
}

/// Derivatives 0..=3 of `exp(−a·z²)`.
fn gaussian_derivs(a: f64, z: f64) -> [f64; 4] {
    let g = (-a * z * z).exp();
    [
        g,
        -2.0 * a * z * g,
        (4.0 * a * a * z * z - 2.0 * a) * g,
        (-8.0 * a * a * a * z * z * z + 12.0 * a * a * z) * g,
    ]
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Relu | Self::Tanh => f.write_str(self.name()),
            Self::Sine { omega0 } => write!(f, "sine(omega0={omega0})"),
            Self::Gabor { omega0, s0 } => write!(f, "gabor(omega0={omega0}, s0={s0})"),
            Self::Finer { omega0, bias_k } => write!(f, "finer(omega0={omega0}, k={bias_k})"),
            Self::Gaussian { s } => write!(f, "gaussian(s={s})"),
        }
    }
}
