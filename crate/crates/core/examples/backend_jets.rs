//! Evaluates one sub-network per backend on a handful of points and
//! compares its derivative channels with central differences.
//!
//! cargo run --example backend_jets

use finr::autodiff::ParamStore;
use finr::backends::{forward_axis, init_subnetwork, ActivationKind, Encoding, SubNetworkSpec};

fn main() -> finr::Result<()> {
    let backends = [
        ("relu+fourier", ActivationKind::Relu, Encoding::Fourier { levels: 4 }),
        ("tanh", ActivationKind::Tanh, Encoding::None),
        ("sine", ActivationKind::Sine { omega0: 30.0 }, Encoding::None),
        ("gabor", ActivationKind::Gabor { omega0: 20.0, s0: 10.0 }, Encoding::None),
        ("finer", ActivationKind::Finer { omega0: 30.0, bias_k: 1.0 }, Encoding::None),
        ("relu+featuregrid", ActivationKind::Relu, Encoding::DEFAULT_GRID),
    ];
    let xs = [-0.61, -0.2, 0.137, 0.52];
    for (name, act, enc) in backends {
        let spec = SubNetworkSpec::new(act, 3).with_encoding(enc).with_shape(3, 64);
        let mut store = ParamStore::new();
        let net = init_subnetwork(&spec, 5, &mut store, "axis")?;
        let order = spec.max_jet_order();
        // ReLU nets are piecewise smooth, so keep the stencil inside one linear piece
        let h = if matches!(act, ActivationKind::Relu) { 1e-6 } else { 1e-5 };
        let jet = forward_axis(&net, &store, &xs, order)?;
        let shifted = |dx: f64| -> finr::Result<Vec<f64>> {
            let pts: Vec<f64> = xs.iter().map(|x| x + dx).collect();
            Ok(forward_axis(&net, &store, &pts, 0)?.value.into_data())
        };
        let (plus, minus) = (shifted(h)?, shifted(-h)?);
        let d1 = jet.d1.as_ref().unwrap().data();
        let err1 = d1
            .iter()
            .zip(plus.iter().zip(&minus))
            .map(|(a, (p, m))| (a - (p - m) / (2.0 * h)).abs() / a.abs().max(1e-3))
            .fold(0.0, f64::max);
        let d2 = match &jet.d2 {
            Some(d2) => {
                let v = jet.value.data();
                let err = d2
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a - (plus[i] - 2.0 * v[i] + minus[i]) / (h * h)).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                format!("{err:.1e}")
            }
            None => "n/a (piecewise linear)".into(),
        };
        println!("{name:>17}: {} params, max order {order}, d1 err {err1:.1e}, d2 err {d2}", spec.param_count());
    }
    Ok(())
}
