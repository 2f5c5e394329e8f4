use super::kernels::{matmul, rowkron, swap01, transpose};
use super::{increment_index, DenseTensor, FactorSet, Mode};
use crate::error::{shape_err, Result};

/// Composes any factor set with its mode-specific kernel.
pub fn compose(fs: &FactorSet) -> Result<DenseTensor> {
    match fs.mode() {
        Mode::Cp => cp_compose(fs),
        Mode::Tt => tt_compose(fs),
        Mode::Tucker => tucker_compose(fs),
    }
}

/// `out[i_1..i_d, c] = Σ_r (Π_k A_k[i_k, r]) · M[r, c]`.
///
/// Built right to left as a chain of row-wise Kronecker products ending in
/// one matrix product with the first factor.
pub fn cp_compose(fs: &FactorSet) -> Result<DenseTensor> {
    expect_mode(fs, Mode::Cp)?;
    let factors = fs.axis_factors();
    let mix = fs.channel_mix().expect("validated CP set");
    let rank = mix.shape()[0];
    let mut z = mix.data().to_vec();
    let mut width = fs.channels();
    for f in factors[1..].iter().rev() {
        let n = f.shape()[0];
        z = rowkron(f.data(), &z, n, rank, width);
        width *= n;
    }
    let n0 = factors[0].shape()[0];
    let out = matmul(factors[0].data(), &z, n0, rank, width);
    Ok(DenseTensor::from_parts(fs.output_shape(), out))
}

/// `out[i_1..i_d, c] = Σ H[i_1, r_1] · G_2[i_2, r_1, r_2] ⋯ T[i_d, r_{d-1}] · M[r_{d-1}, c]`.
///
/// The chain is contracted left to right: the running prefix is a
/// `(N_1⋯N_k) × B_k` matrix multiplied by each interior core (permuted to
/// `B_k × (N_{k+1}·B_{k+1})`), then by the tail-and-mix block.
pub fn tt_compose(fs: &FactorSet) -> Result<DenseTensor> {
    expect_mode(fs, Mode::Tt)?;
    let d = fs.dims();
    let factors = fs.axis_factors();
    let mut rows = factors[0].shape()[0];
    let mut bond = factors[0].shape()[1];
    let mut prefix = factors[0].data().to_vec();
    for core in &factors[1..d - 1] {
        let (n, next) = (core.shape()[0], core.shape()[2]);
        let permuted = swap01(core.data(), n, bond, next);
        prefix = matmul(&prefix, &permuted, rows, bond, n * next);
        rows *= n;
        bond = next;
    }
    let tail = &factors[d - 1];
    let n = tail.shape()[0];
    let c = fs.channels();
    let mix = fs.channel_mix().expect("validated TT set");
    let tail_block = rowkron(tail.data(), mix.data(), n, bond, c);
    let out = matmul(&prefix, &tail_block, rows, bond, n * c);
    Ok(DenseTensor::from_parts(fs.output_shape(), out))
}

/// `out[i_1..i_d, c] = Σ_{r_1..r_d} core[r_1..r_d, c] · Π_k A_k[i_k, r_k]`.
///
/// Each step multiplies the leading core mode by its factor and rotates the
/// new axis to the back, so after `d` steps the layout is `[C, N_1..N_d]`;
/// a final transpose moves channels last.
pub fn tucker_compose(fs: &FactorSet) -> Result<DenseTensor> {
    expect_mode(fs, Mode::Tucker)?;
    let core = fs.core().expect("validated Tucker set");
    let mut x = core.data().to_vec();
    let mut total = core.len();
    for f in fs.axis_factors() {
        let (n, r) = (f.shape()[0], f.shape()[1]);
        let rest = total / r;
        let y = matmul(f.data(), &x, n, r, rest);
        x = transpose(&y, n, rest);
        total = n * rest;
    }
    let c = fs.channels();
    let out = transpose(&x, c, total / c);
    Ok(DenseTensor::from_parts(fs.output_shape(), out))
}

/// Naive oracle: loops over every output index and every rank tuple.
pub fn reference_compose(fs: &FactorSet) -> Result<DenseTensor> {
    fs.validate()?;
    let out_shape = fs.output_shape();
    let d = fs.dims();
    let factors = fs.axis_factors();
    let c_count = fs.channels();
    let mut out = DenseTensor::zeros(&out_shape)?;
    let extents = fs.extents();
    let mut idx = vec![0usize; d];
    let points: usize = extents.iter().product();
    for _ in 0..points {
        for c in 0..c_count {
            let value = match fs.mode() {
                Mode::Cp => {
                    let mix = fs.channel_mix().unwrap();
                    let mut sum = 0.0;
                    for r in 0..mix.shape()[0] {
                        let mut prod = mix.get(&[r, c]);
                        for k in 0..d {
                            prod *= factors[k].get(&[idx[k], r]);
                        }
                        sum += prod;
                    }
                    sum
                }
                Mode::Tt => {
                    let mix = fs.channel_mix().unwrap();
                    let ranks = fs.ranks();
                    let mut r_idx = vec![0usize; d - 1];
                    let tuples: usize = ranks.iter().product();
                    let mut sum = 0.0;
                    for _ in 0..tuples {
                        let mut prod = factors[0].get(&[idx[0], r_idx[0]]);
                        for k in 1..d - 1 {
                            prod *= factors[k].get(&[idx[k], r_idx[k - 1], r_idx[k]]);
                        }
                        prod *= factors[d - 1].get(&[idx[d - 1], r_idx[d - 2]]);
                        prod *= mix.get(&[r_idx[d - 2], c]);
                        sum += prod;
                        increment_index(&mut r_idx, &ranks);
                    }
                    sum
                }
                Mode::Tucker => {
                    let core = fs.core().unwrap();
                    let ranks = fs.ranks();
                    let mut r_idx = vec![0usize; d];
                    let tuples: usize = ranks.iter().product();
                    let mut sum = 0.0;
                    let mut core_idx = vec![0usize; d + 1];
                    for _ in 0..tuples {
                        core_idx[..d].copy_from_slice(&r_idx);
                        core_idx[d] = c;
                        let mut prod = core.get(&core_idx);
                        for k in 0..d {
                            prod *= factors[k].get(&[idx[k], r_idx[k]]);
                        }
                        sum += prod;
                        increment_index(&mut r_idx, &ranks);
                    }
                    sum
                }
            };
            let mut out_idx = idx.clone();
            out_idx.push(c);
            out.set(&out_idx, value);
        }
        increment_index(&mut idx, &extents);
    }
    Ok(out)
}

/// Composed value at a single index tuple, given one factor row per axis.
///
/// `rows[k]` is a row of axis `k`'s factor; for TT interior axes it is the
/// flattened `B_{k-1} × B_k` slice matrix.
pub fn contract_point(fs: &FactorSet, rows: &[&[f64]]) -> Result<Vec<f64>> {
    let d = fs.dims();
    if rows.len() != d {
        return Err(shape_err!("expected {d} factor rows, got {}", rows.len()));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != fs.row_width(k) {
            return Err(shape_err!(
                "row for axis {k} has width {}, expected {}",
                row.len(),
                fs.row_width(k)
            ));
        }
    }
    let c = fs.channels();
    match fs.mode() {
        Mode::Cp => {
            let mix = fs.channel_mix().unwrap();
            let rank = mix.shape()[0];
            let mut prod = rows[0].to_vec();
            for row in &rows[1..] {
                for (p, v) in prod.iter_mut().zip(row.iter()) {
                    *p *= v;
                }
            }
            Ok(matmul(&prod, mix.data(), 1, rank, c))
        }
        Mode::Tt => {
            let mut v = rows[0].to_vec();
            for (k, row) in rows.iter().enumerate().take(d - 1).skip(1) {
                let next = fs.axis_factors()[k].shape()[2];
                v = matmul(&v, row, 1, v.len(), next);
            }
            for (p, t) in v.iter_mut().zip(rows[d - 1].iter()) {
                *p *= t;
            }
            let mix = fs.channel_mix().unwrap();
            Ok(matmul(&v, mix.data(), 1, v.len(), c))
        }
        Mode::Tucker => {
            let mut x = fs.core().unwrap().data().to_vec();
            for row in rows {
                x = matmul(row, &x, 1, row.len(), x.len() / row.len());
            }
            Ok(x)
        }
    }
}

fn expect_mode(fs: &FactorSet, mode: Mode) -> Result<()> {
    if fs.mode() != mode {
        return Err(shape_err!("expected a {mode} factor set, got {}", fs.mode()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> DenseTensor {
        DenseTensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn cp_rank_one_outer_product() {
        let fs = FactorSet::cp(
            vec![t(&[2, 1], &[1.0, 2.0]), t(&[2, 1], &[3.0, 4.0])],
            t(&[1, 1], &[1.0]),
        )
        .unwrap();
        let out = cp_compose(&fs).unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.data(), &[3.0, 4.0, 6.0, 8.0]);
        assert_eq!(reference_compose(&fs).unwrap(), out);
        assert_eq!(contract_point(&fs, &[&[2.0], &[3.0]]).unwrap(), vec![6.0]);
    }

    #[test]
    fn cp_all_ones() {
        let ones = DenseTensor::ones(&[3, 1]).unwrap();
        let fs = FactorSet::cp(vec![ones.clone(), ones.clone(), ones], t(&[1, 1], &[1.0])).unwrap();
        let out = cp_compose(&fs).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tt_identity_cores_reduce_to_boundary_product() {
        let n = 4;
        let head = DenseTensor::from_fn(&[n, 2], |i| if i[1] == 0 { 1.0 + i[0] as f64 } else { 0.0 }).unwrap();
        let tail = DenseTensor::from_fn(&[n, 2], |i| if i[1] == 0 { 2.0 - i[0] as f64 } else { 0.0 }).unwrap();
        let core = DenseTensor::from_fn(&[n, 2, 2], |i| if i[1] == i[2] { 1.0 } else { 0.0 }).unwrap();
        let fs = FactorSet::tt(vec![head.clone(), core, tail.clone()], t(&[2, 1], &[1.0, 1.0])).unwrap();
        let out = tt_compose(&fs).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let expected = head.get(&[i, 0]) * tail.get(&[k, 0]);
                    assert_eq!(out.get(&[i, j, k, 0]), expected);
                }
            }
        }
    }

    #[test]
    fn tt_two_axes_equals_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(&[5, 3], &mut rng);
        let b = random(&[4, 3], &mut rng);
        let m = random(&[3, 2], &mut rng);
        let tt = tt_compose(&FactorSet::tt(vec![a.clone(), b.clone()], m.clone()).unwrap()).unwrap();
        let cp = cp_compose(&FactorSet::cp(vec![a, b], m).unwrap()).unwrap();
        assert!(tt.max_abs_diff(&cp).unwrap() < 1e-14);
    }

    #[test]
    fn tucker_diagonal_core_equals_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(&[6, 3], &mut rng);
        let b = random(&[5, 3], &mut rng);
        let core = DenseTensor::from_fn(&[3, 3, 1], |i| if i[0] == i[1] { 1.0 } else { 0.0 }).unwrap();
        let tu = tucker_compose(&FactorSet::tucker(vec![a.clone(), b.clone()], core).unwrap()).unwrap();
        let cp = cp_compose(&FactorSet::cp(vec![a, b], DenseTensor::ones(&[3, 1]).unwrap()).unwrap()).unwrap();
        assert!(tu.max_abs_diff(&cp).unwrap() < 1e-12);
    }

    #[test]
    fn tucker_zero_core_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fs = FactorSet::tucker(
            vec![random(&[3, 2], &mut rng), random(&[4, 2], &mut rng)],
            DenseTensor::zeros(&[2, 2, 2]).unwrap(),
        )
        .unwrap();
        assert!(tucker_compose(&fs).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(reference_compose(&fs).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(contract_point(&fs, &[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mode_specific_kernels_reject_other_modes() {
        let fs = FactorSet::cp(
            vec![DenseTensor::ones(&[2, 1]).unwrap(), DenseTensor::ones(&[2, 1]).unwrap()],
            DenseTensor::ones(&[1, 1]).unwrap(),
        )
        .unwrap();
        assert!(tt_compose(&fs).is_err());
        assert!(tucker_compose(&fs).is_err());
        assert!(contract_point(&fs, &[&[1.0]]).is_err());
        assert!(contract_point(&fs, &[&[1.0, 2.0], &[1.0]]).is_err());
    }
}
