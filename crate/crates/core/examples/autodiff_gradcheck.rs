//! Reverse-mode gradients checked against central differences, and input
//! jets pushed through a sine layer.
//!
//! cargo run --example autodiff_gradcheck

use finr::autodiff::{grad_check, Jet, ParamRole, ParamStore, Tape};
use finr::backends::ActivationKind;
use finr::tensor::DenseTensor;

fn main() -> finr::Result<()> {
    let mut store = ParamStore::new();
    let w = store.add(
        "w",
        ParamRole::Weight,
        DenseTensor::from_fn(&[3, 4], |i| 0.1 * (i[0] as f64) - 0.2 * (i[1] as f64) + 0.3)?,
    );
    let b = store.add("b", ParamRole::Bias, DenseTensor::filled(&[4], 0.05)?);
    let x = DenseTensor::from_fn(&[5, 3], |i| (i[0] + 2 * i[1]) as f64 / 7.0)?;

    // loss = mean(tanh(x·W + b)²)
    let report = grad_check(&mut store, 1e-5, |tape, s| {
        let xv = tape.constant(x.clone());
        let (wv, bv) = (tape.param(s, w), tape.param(s, b));
        let z = tape.matmul(xv, wv)?;
        let z = tape.add_bias(z, bv)?;
        let a = tape.activation(z, ActivationKind::Tanh, 0)?;
        let sq = tape.square(a);
        Ok(tape.mean(sq))
    })?;
    println!(
        "gradient check over {} scalars: worst relative error {:.2e} at {}[{}]",
        report.checked, report.max_relative_error, report.worst_param, report.worst_index
    );

    // y = sin(30 x) with d/dx and d²/dx² carried forward
    let mut tape = Tape::new();
    let xs = [0.0, 0.01, 0.02];
    let jet = tape.jet_constant(Jet::coordinate(&xs, 2)?);
    let y = tape.jet_activation(&jet, ActivationKind::Sine { omega0: 30.0 })?;
    let vals = tape.jet_values(&y);
    for (i, x) in xs.iter().enumerate() {
        println!(
            "x = {x:.2}: sin(30x) = {:+.5}, d1 = {:+.5} (exact {:+.5}), d2 = {:+.5} (exact {:+.5})",
            vals.value.data()[i],
            vals.d1.as_ref().unwrap().data()[i],
            30.0 * (30.0 * x).cos(),
            vals.d2.as_ref().unwrap().data()[i],
            -900.0 * (30.0 * x).sin()
        );
    }
    Ok(())
}
