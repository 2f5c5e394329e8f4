//! Slice-level kernels shared by the composition routines and the tape.
//!
//! Matrices are row-major slices; dimensions are passed explicitly.

/// `c = op(a) · op(b)` (or `c += ...` when `accumulate`), where `op(a)` is
/// `m × k` and `op(b)` is `k × n`. With `trans_a` the slice `a` holds a
/// `k × m` matrix, with `trans_b` the slice `b` holds an `n × k` matrix.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the strides above describe exactly the m×k, k×n and m×n
    // row-major buffers whose lengths are checked in debug builds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(false, false, m, k, n, a, b, &mut c, false);
    c
}

/// Row-wise Kronecker product: `a` is `n × r`, `z` is `r × p`, the result is
/// `r × (n·p)` with `out[q, i·p + j] = a[i, q] · z[q, j]`.
pub(crate) fn rowkron(a: &[f64], z: &[f64], n: usize, r: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * n * p];
    for q in 0..r {
        let zrow = &z[q * p..(q + 1) * p];
        let orow = &mut out[q * n * p..(q + 1) * n * p];
        for i in 0..n {
            let s = a[i * r + q];
            for (o, &zv) in orow[i * p..(i + 1) * p].iter_mut().zip(zrow) {
                *o = s * zv;
            }
        }
    }
    out
}

/// Adjoints of [`rowkron`] given the output adjoint `g` (`r × n·p`).
pub(crate) fn rowkron_backward(
    a: &[f64],
    z: &[f64],
    g: &[f64],
    n: usize,
    r: usize,
    p: usize,
    da: Option<&mut [f64]>,
    dz: Option<&mut [f64]>,
) {
    if let Some(da) = da {
        for q in 0..r {
            let zrow = &z[q * p..(q + 1) * p];
            let grow = &g[q * n * p..(q + 1) * n * p];
            for i in 0..n {
                let dot: f64 = grow[i * p..(i + 1) * p]
                    .iter()
                    .zip(zrow)
                    .map(|(x, y)| x * y)
                    .sum();
                da[i * r + q] += dot;
            }
        }
    }
    if let Some(dz) = dz {
        for q in 0..r {
            let grow = &g[q * n * p..(q + 1) * n * p];
            let dzrow = &mut dz[q * p..(q + 1) * p];
            for i in 0..n {
                let s = a[i * r + q];
                for (d, &gv) in dzrow.iter_mut().zip(&grow[i * p..(i + 1) * p]) {
                    *d += s * gv;
                }
            }
        }
    }
}

/// Swaps the two leading axes of a `[a, b, c]` array.
pub(crate) fn swap01(x: &[f64], a: usize, b: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; a * b * c];
    for i in 0..a {
        for j in 0..b {
            let src = &x[(i * b + j) * c..(i * b + j + 1) * c];
            out[(j * a + i) * c..(j * a + i + 1) * c].copy_from_slice(src);
        }
    }
    out
}

pub(crate) fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    swap01(x, rows, cols, 1)
}

/// Batched vector-matrix contraction: `v` is `batch × a`, `g` is
/// `batch × (a·b)` holding one `a × b` matrix per row; returns `batch × b`
/// with `out[s, j] = Σ_i v[s, i] · g[s, i·b + j]`.
pub(crate) fn bcontract(v: &[f64], g: &[f64], batch: usize, a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * b];
    for s in 0..batch {
        let orow = &mut out[s * b..(s + 1) * b];
        for i in 0..a {
            let vi = v[s * a + i];
            let grow = &g[s * a * b + i * b..s * a * b + (i + 1) * b];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += vi * gv;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn bcontract_backward(
    v: &[f64],
    g: &[f64],
    adj: &[f64],
    batch: usize,
    a: usize,
    b: usize,
    dv: Option<&mut [f64]>,
    dg: Option<&mut [f64]>,
) {
    if let Some(dv) = dv {
        for s in 0..batch {
            let arow = &adj[s * b..(s + 1) * b];
            for i in 0..a {
                let grow = &g[s * a * b + i * b..s * a * b + (i + 1) * b];
                dv[s * a + i] += grow.iter().zip(arow).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    if let Some(dg) = dg {
        for s in 0..batch {
            let arow = &adj[s * b..(s + 1) * b];
            for i in 0..a {
                let vi = v[s * a + i];
                let drow = &mut dg[s * a * b + i * b..s * a * b + (i + 1) * b];
                for (d, &av) in drow.iter_mut().zip(arow) {
                    *d += vi * av;
                }
            }
        }
    }
}
