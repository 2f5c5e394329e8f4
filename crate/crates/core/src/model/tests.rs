use super::*;
use crate::backends::{ActivationKind, Encoding, SubNetworkSpec};
use crate::tensor::{compose, contract_point};

fn net(activation: ActivationKind) -> SubNetworkSpec {
    SubNetworkSpec::new(activation, 1).with_shape(2, 12)
}

fn model(mode: Mode, net: SubNetworkSpec, d: usize, seed: u64) -> FInrModel {
    let domains = vec![(-0.5, 1.5); d];
    FInrModel::init(FInrSpec::new(mode, 3, 2, net, domains).unwrap(), seed).unwrap()
}

/// Sets every weight of axis `k` to zero and its output bias to `bias`.
fn make_constant(m: &mut FInrModel, k: usize, bias: f64) {
    let ids = m.nets()[k].param_ids();
    let last_bias = *ids.last().unwrap();
    for id in ids {
        let p = m.params_mut().get_mut(id);
        let fill = if id == last_bias { bias } else { 0.0 };
        p.value.data_mut().fill(fill);
    }
}

/// One relu unit per axis realising φ(x) = x on the domain [0, 4].
fn make_identity(m: &mut FInrModel, k: usize) {
    let ids = m.nets()[k].param_ids();
    let values = [1.0, 1.0, 2.0, 0.0];
    for (id, v) in ids.into_iter().zip(values) {
        m.params_mut().get_mut(id).value.data_mut().fill(v);
    }
}

#[test]
fn constant_factors_give_a_constant_grid() {
    let spec = FInrSpec::new(Mode::Cp, 1, 1, net(ActivationKind::Tanh), vec![(0.0, 1.0); 2]).unwrap();
    let mut m = FInrModel::init(spec, 0).unwrap();
    make_constant(&mut m, 0, 1.0);
    make_constant(&mut m, 1, 1.0);
    let joint = m.joint();
    m.params_mut().get_mut(joint).value.data_mut().fill(1.0);
    let coords = vec![linspace(0.0, 1.0, 5), linspace(0.0, 1.0, 4)];
    let f = m.eval_grid(&coords, 2).unwrap();
    assert_eq!(f.value.shape(), &[5, 4, 1]);
    assert!(f.value.data().iter().all(|&v| v == 1.0));
    for k in 0..2 {
        assert!(f.partial(k).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(f.second(k).unwrap().data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn identity_networks_follow_the_product_rule() {
    let relu = SubNetworkSpec::new(ActivationKind::Relu, 1).with_shape(1, 1);
    let spec = FInrSpec::new(Mode::Cp, 1, 1, relu, vec![(0.0, 4.0); 2]).unwrap();
    let mut m = FInrModel::init(spec, 0).unwrap();
    make_identity(&mut m, 0);
    make_identity(&mut m, 1);
    let joint = m.joint();
    m.params_mut().get_mut(joint).value.data_mut().fill(1.0);
    let f = m.eval_points(&[vec![2.0, 3.0], vec![2.0, 3.0]], 1).unwrap();
    assert_eq!(f.value.data(), &[6.0, 6.0]);
    assert_eq!(f.partial(0).unwrap().data(), &[3.0, 3.0]);
    assert_eq!(f.partial(1).unwrap().data(), &[2.0, 2.0]);

    // separable g(x)·h(y) on a grid: ∂/∂x is exactly h(y)
    let xs = vec![0.5, 1.0, 3.5];
    let f = m.eval_grid(&[xs.clone(), xs.clone()], 1).unwrap();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            assert_eq!(f.value.get(&[i, j, 0]), x * y);
            assert_eq!(f.partial(0).unwrap().get(&[i, j, 0]), y);
        }
    }
}

fn all_backends() -> Vec<SubNetworkSpec> {
    vec![
        net(ActivationKind::Sine { omega0: 30.0 }),
        net(ActivationKind::Relu).with_encoding(Encoding::Fourier { levels: 3 }),
        net(ActivationKind::Tanh),
        net(ActivationKind::Gabor { omega0: 30.0, s0: 10.0 }),
        net(ActivationKind::Finer { omega0: 30.0, bias_k: 1.0 }),
        net(ActivationKind::Relu).with_encoding(Encoding::DEFAULT_GRID),
    ]
}

#[test]
fn grid_and_points_agree() {
    let coords = vec![linspace(-0.5, 1.5, 4), linspace(-0.5, 1.5, 3), linspace(-0.5, 1.5, 5)];
    for mode in Mode::ALL {
        for backend in all_backends() {
            let m = model(mode, backend, 3, 4);
            let order = m.spec().max_jet_order();
            let g = m.eval_grid(&coords, order).unwrap();
            let mut points = Vec::new();
            for &x in &coords[0] {
                for &y in &coords[1] {
                    for &z in &coords[2] {
                        points.push(vec![x, y, z]);
                    }
                }
            }
            let p = m.eval_points(&points, order).unwrap();
            let flat = |t: &DenseTensor| t.data().to_vec();
            let diff = |a: &DenseTensor, b: &DenseTensor| {
                flat(a).iter().zip(flat(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            };
            assert!(diff(&g.value, &p.value) <= 1e-10, "{mode} {:?}", backend.activation);
            for k in 0..3 {
                assert!(diff(g.partial(k).unwrap(), p.partial(k).unwrap()) <= 1e-10);
                if order == 2 {
                    assert!(diff(g.second(k).unwrap(), p.second(k).unwrap()) <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn taped_grid_matches_direct_composition() {
    let coords = vec![linspace(-0.5, 1.5, 3), linspace(-0.5, 1.5, 4), linspace(-0.5, 1.5, 2)];
    for mode in Mode::ALL {
        let m = model(mode, net(ActivationKind::Tanh), 3, 9);
        let fs = m.factor_set(&coords).unwrap();
        let direct = compose(&fs).unwrap();
        assert_eq!(m.eval_grid(&coords, 0).unwrap().value, direct);
        let rows: Vec<&[f64]> = (0..3).map(|k| fs.axis_factors()[k].row(1)).collect();
        let entry = contract_point(&fs, &rows).unwrap();
        for (c, v) in entry.iter().enumerate() {
            assert!((direct.get(&[1, 1, 1, c]) - v).abs() <= 1e-10);
        }
    }
}

#[test]
fn grid_partials_match_finite_differences() {
    let m = model(Mode::Cp, net(ActivationKind::Sine { omega0: 30.0 }), 2, 2);
    let ys = linspace(-0.5, 1.5, 3);
    let h = 1e-5;
    for &x in &[-0.2, 0.4, 1.1] {
        let f = m.eval_grid(&[vec![x], ys.clone()], 1).unwrap();
        let p = m.eval_grid(&[vec![x + h], ys.clone()], 0).unwrap().value;
        let q = m.eval_grid(&[vec![x - h], ys.clone()], 0).unwrap().value;
        for i in 0..f.value.len() {
            let fd = (p.data()[i] - q.data()[i]) / (2.0 * h);
            let a = f.partial(0).unwrap().data()[i];
            assert!((a - fd).abs() / a.abs().max(fd.abs()) < 1e-4, "{a} vs {fd}");
        }
    }
}

#[test]
fn laplacian_matches_five_point_stencil() {
    let m = model(Mode::Tt, net(ActivationKind::Sine { omega0: 30.0 }), 2, 6);
    let h = 1e-3;
    for i in 0..10 {
        let (x, y) = (-0.3 + 0.17 * i as f64, 1.2 - 0.13 * i as f64);
        let f = m.eval_points(&[vec![x, y]], 2).unwrap();
        let lap = f.laplacian().unwrap();
        let at = |dx: f64, dy: f64| m.eval_points(&[vec![x + dx, y + dy]], 0).unwrap().value;
        let mut stencil = [0.0; 2];
        for (ex, ey) in [(1.0, 0.0), (0.0, 1.0)] {
            let v = |s: f64| at(s * h * ex, s * h * ey);
            let (p2, p1, c, m1, m2) = (v(2.0), v(1.0), v(0.0), v(-1.0), v(-2.0));
            for ch in 0..2 {
                stencil[ch] += (-p2.data()[ch] + 16.0 * p1.data()[ch] - 30.0 * c.data()[ch]
                    + 16.0 * m1.data()[ch]
                    - m2.data()[ch])
                    / (12.0 * h * h);
            }
        }
        for ch in 0..2 {
            let a = lap.data()[ch];
            let rel = (a - stencil[ch]).abs() / a.abs().max(stencil[ch].abs());
            assert!(rel < 1e-3, "{a} vs {}", stencil[ch]);
        }
    }
}

#[test]
fn laplacian_is_the_explicit_sum() {
    let m = model(Mode::Tucker, net(ActivationKind::Tanh), 3, 1);
    let coords = vec![linspace(-0.5, 1.5, 3); 3];
    let f = m.eval_grid(&coords, 2).unwrap();
    let lap = f.laplacian().unwrap();
    for i in 0..lap.len() {
        let s = f.second(0).unwrap().data()[i] + f.second(1).unwrap().data()[i] + f.second(2).unwrap().data()[i];
        assert_eq!(lap.data()[i], s);
    }
}

#[test]
fn parameter_counts() {
    let (m, r) = (7, 5);
    let one_layer = SubNetworkSpec::new(ActivationKind::Relu, r).with_shape(1, m);
    assert_eq!(one_layer.param_count(), (m + m) + (m * r + r));

    let base = SubNetworkSpec::new(ActivationKind::Relu, 1).with_shape(1, 4);
    let spec = FInrSpec::with_ranks(Mode::Tucker, vec![2, 3, 4], 2, base, vec![(0.0, 1.0); 3]).unwrap();
    let model = FInrModel::init(spec.clone(), 0).unwrap();
    let nets: usize = spec.axes.iter().map(SubNetworkSpec::param_count).sum();
    assert_eq!(model.param_count(), nets + 48);
}

#[test]
fn factorized_models_with_narrower_networks_are_smaller() {
    let mono = MonolithicSpec {
        channels: 3,
        layers: 4,
        width: 256,
        activation: ActivationKind::Relu,
        domains: vec![(0.0, 1.0); 3],
    };
    let mono_count = MonolithicModel::init(mono.clone(), 0).unwrap().param_count();
    assert_eq!(mono_count, mono.param_count());
    // one 4×256 network per axis triples the weights ...
    let wide = FInrSpec::new(Mode::Cp, 64, 3, SubNetworkSpec::new(ActivationKind::Relu, 1), vec![(0.0, 1.0); 3]).unwrap();
    assert!(FInrModel::init(wide, 0).unwrap().param_count() > mono_count);
    // ... while halving each axis network's width undercuts the monolith
    let narrow = FInrSpec::new(
        Mode::Cp,
        64,
        3,
        SubNetworkSpec::new(ActivationKind::Relu, 1).with_shape(4, 128),
        vec![(0.0, 1.0); 3],
    )
    .unwrap();
    assert!(FInrModel::init(narrow, 0).unwrap().param_count() < mono_count);
}

#[test]
fn feature_grid_cannot_deliver_second_derivatives() {
    let m = model(Mode::Cp, net(ActivationKind::Relu).with_encoding(Encoding::DEFAULT_GRID), 2, 0);
    let coords = vec![linspace(-0.5, 1.5, 3); 2];
    assert!(m.eval_grid(&coords, 1).is_ok());
    assert!(matches!(m.eval_grid(&coords, 2), Err(Error::Capability(_))));
}

#[test]
fn out_of_domain_coordinates_are_rejected() {
    let m = model(Mode::Cp, net(ActivationKind::Tanh), 2, 0);
    let err = m.eval_points(&[vec![0.0, 1.6]], 0).unwrap_err();
    assert!(matches!(err, Error::Input(_)));
}

#[test]
fn same_seed_same_model() {
    let coords = vec![linspace(-0.5, 1.5, 4); 2];
    let a = model(Mode::Tt, net(ActivationKind::Sine { omega0: 30.0 }), 2, 77);
    let b = model(Mode::Tt, net(ActivationKind::Sine { omega0: 30.0 }), 2, 77);
    let c = model(Mode::Tt, net(ActivationKind::Sine { omega0: 30.0 }), 2, 78);
    assert_eq!(a.eval_grid(&coords, 2).unwrap(), b.eval_grid(&coords, 2).unwrap());
    assert_ne!(a.eval_grid(&coords, 0).unwrap(), c.eval_grid(&coords, 0).unwrap());
}

#[test]
fn monolithic_grid_evaluation_is_chunk_invariant() {
    let spec = MonolithicSpec {
        channels: 2,
        layers: 2,
        width: 8,
        activation: ActivationKind::Tanh,
        domains: vec![(0.0, 1.0); 2],
    };
    let m = MonolithicModel::init(spec, 3).unwrap();
    let coords = vec![linspace(0.0, 1.0, 5), linspace(0.0, 1.0, 7)];
    let a = m.eval_grid(&coords, 1000).unwrap();
    let b = m.eval_grid(&coords, 4).unwrap();
    assert_eq!(a.shape(), &[5, 7, 2]);
    assert!(a.max_abs_diff(&b).unwrap() < 1e-14);
}
