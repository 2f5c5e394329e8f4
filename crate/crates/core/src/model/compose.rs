//! Factor composition recorded on a tape. Op order mirrors the kernels in
//! `tensor::compose`, so taped and direct evaluation agree bit for bit.

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Mode;

/// Composes full-grid factors (`[N_k, width_k]` each) into `[ΠN_k, C]`.
/// `joint` is the channel mix (CP, TT) or the core (Tucker).
pub(crate) fn grid(tape: &mut Tape, mode: Mode, factors: &[Var], joint: Var, channels: usize) -> Result<Var> {
    let extents: Vec<usize> = factors.iter().map(|&f| tape.shape(f)[0]).collect();
    let points: usize = extents.iter().product();
    let out = match mode {
        Mode::Cp => {
            let mut z = joint;
            for &f in factors[1..].iter().rev() {
                z = tape.rowkron(f, z)?;
            }
            tape.matmul(factors[0], z)?
        }
        Mode::Tt => {
            let d = factors.len();
            let mut prefix = factors[0];
            let mut rows = extents[0];
            let mut bond = tape.shape(factors[0])[1];
            for (k, &f) in factors.iter().enumerate().take(d - 1).skip(1) {
                let n = extents[k];
                let next = tape.shape(f)[1] / bond;
                let core = tape.reshape(f, &[n, bond, next])?;
                let permuted = tape.swap01(core)?;
                let g = tape.reshape(permuted, &[bond, n * next])?;
                let p = tape.matmul(prefix, g)?;
                rows *= n;
                prefix = tape.reshape(p, &[rows, next])?;
                bond = next;
            }
            let tail = tape.rowkron(factors[d - 1], joint)?;
            tape.matmul(prefix, tail)?
        }
        Mode::Tucker => {
            let total = tape.value(joint).len();
            let r0 = tape.shape(factors[0])[1];
            let mut x = tape.reshape(joint, &[r0, total / r0])?;
            let mut size = total;
            for (k, &f) in factors.iter().enumerate() {
                let (n, r) = (extents[k], tape.shape(f)[1]);
                let rest = size / r;
                if k > 0 {
                    x = tape.reshape(x, &[r, rest])?;
                }
                let y = tape.matmul(f, x)?;
                x = tape.transpose(y)?;
                size = n * rest;
            }
            let x = tape.reshape(x, &[channels, size / channels])?;
            tape.transpose(x)?
        }
    };
    tape.reshape(out, &[points, channels])
}

/// Composes per-point factor rows (`[P, width_k]` each) into `[P, C]`.
pub(crate) fn points(tape: &mut Tape, mode: Mode, rows: &[Var], joint: Var) -> Result<Var> {
    let d = rows.len();
    match mode {
        Mode::Cp => {
            let mut h = rows[0];
            for &r in &rows[1..] {
                h = tape.mul(h, r)?;
            }
            tape.matmul(h, joint)
        }
        Mode::Tt => {
            let mut v = rows[0];
            for &r in &rows[1..d - 1] {
                v = tape.bcontract(v, r)?;
            }
            let v = tape.mul(v, rows[d - 1])?;
            tape.matmul(v, joint)
        }
        Mode::Tucker => {
            let total = tape.value(joint).len();
            let r0 = tape.shape(rows[0])[1];
            let core = tape.reshape(joint, &[r0, total / r0])?;
            let mut x = tape.matmul(rows[0], core)?;
            for &r in &rows[1..] {
                x = tape.bcontract(r, x)?;
            }
            Ok(x)
        }
    }
}
