//! Composes random CP, TT and Tucker factor sets into dense tensors, checks
//! each against the brute-force reference, and reads single entries back
//! through `contract_point`.
//!
//! cargo run --example compose_modes

use finr::tensor::{compose, contract_point, reference_compose, DenseTensor, FactorSet, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

fn main() -> finr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, r, c) = ([5, 4, 6], 3, 2);

    let cp = FactorSet::cp(n.iter().map(|&k| random(&mut rng, &[k, r])).collect(), random(&mut rng, &[r, c]))?;
    let tt = FactorSet::tt(
        vec![random(&mut rng, &[n[0], r]), random(&mut rng, &[n[1], r, r]), random(&mut rng, &[n[2], r])],
        random(&mut rng, &[r, c]),
    )?;
    let tucker = FactorSet::tucker(n.iter().map(|&k| random(&mut rng, &[k, r])).collect(), random(&mut rng, &[r, r, r, c]))?;

    for fs in [&cp, &tt, &tucker] {
        let fast = compose(fs)?;
        let slow = reference_compose(fs)?;
        let idx = [2, 1, 3];
        let rows: Vec<&[f64]> = fs.axis_factors().iter().zip(idx).map(|(f, i)| row(f, i)).collect();
        let point = contract_point(fs, &rows)?;
        println!(
            "{:>6}: shape {:?}, max |fast - reference| = {:.2e}, entry {:?} = {:?} (grid {:?})",
            fs.mode().to_string(),
            fast.shape(),
            fast.max_abs_diff(&slow)?,
            idx,
            point,
            [fast.get(&[2, 1, 3, 0]), fast.get(&[2, 1, 3, 1])]
        );
    }
    assert_eq!(cp.mode(), Mode::Cp);
    Ok(())
}

/// Row `i` of a factor, flattening TT slices.
fn row(f: &DenseTensor, i: usize) -> &[f64] {
    let width = f.len() / f.shape()[0];
    &f.data()[i * width..(i + 1) * width]
}
