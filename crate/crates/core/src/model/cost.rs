use std::fmt;

use crate::tensor::Mode;

/// What is being costed: a single MLP over all coordinates or a
/// factorized model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    Monolithic,
    Factorized(Mode),
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Monolithic => f.write_str("monolithic"),
            Architecture::Factorized(m) => write!(f, "{m}"),
        }
    }
}

/// Predicted multiply-accumulate count for one forward pass over an
/// `n^d` grid with `l` layers of width `m` and rank `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexityEstimate {
    pub arch: Architecture,
    pub d: u32,
    pub n: u64,
    pub m: u64,
    pub l: u64,
    pub r: u64,
    pub macs: f64,
}

/// Leading-order forward cost per architecture for a cubic grid (`d = 3`):
///
/// | architecture | cost |
/// |---|---|
/// | monolithic | m²·l·n³ |
/// | CP | m²·l·n·r + n²·r² |
/// | TT | m²·l·n·r² + n²·r² |
/// | Tucker | m²·l·n·r + r·n³ |
///
/// Other `d` replace `n³` by `n^d` and `n²` by `n^(d−1)`.
pub fn predict_cost(arch: Architecture, d: u32, n: u64, m: u64, l: u64, r: u64) -> ComplexityEstimate {
    let (nf, mf, lf, rf) = (n as f64, m as f64, l as f64, r as f64);
    let net = mf * mf * lf * nf;
    let grid = nf.powi(d as i32);
    let slab = nf.powi(d as i32 - 1);
    let macs = match arch {
        Architecture::Monolithic => mf * mf * lf * grid,
        Architecture::Factorized(Mode::Cp) => net * rf + slab * rf * rf,
        Architecture::Factorized(Mode::Tt) => net * rf * rf + slab * rf * rf,
        Architecture::Factorized(Mode::Tucker) => net * rf + rf * grid,
    };
    ComplexityEstimate {
        arch,
        d,
        n,
        m,
        l,
        r,
        macs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(predict_cost(Architecture::Monolithic, 3, 4, 2, 1, 2).macs, 256.0);
        assert_eq!(predict_cost(Architecture::Factorized(Mode::Cp), 3, 4, 2, 1, 2).macs, 96.0);
        assert_eq!(predict_cost(Architecture::Factorized(Mode::Tt), 3, 4, 2, 1, 2).macs, 128.0);
        assert_eq!(predict_cost(Architecture::Factorized(Mode::Tucker), 3, 4, 2, 1, 2).macs, 160.0);
    }

    #[test]
    fn cp_is_cheaper_than_monolithic_when_rank_is_small() {
        // the network term alone needs r < n², so tiny grids only favour
        // tiny ranks
        let (m, l) = (256, 4);
        for r in [1, 2, 3, 8, 64] {
            for n in (2..300).filter(|n| r < n * n) {
                let cp = predict_cost(Architecture::Factorized(Mode::Cp), 3, n, m, l, r).macs;
                let mono = predict_cost(Architecture::Monolithic, 3, n, m, l, r).macs;
                assert!(cp < mono, "n={n} r={r}");
            }
        }
    }
}
