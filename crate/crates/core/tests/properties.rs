//! Randomized invariants of the tensor kernels, the autodiff engine, the
//! backends, the model and the task metrics.

use finr::autodiff::{ParamRole, ParamStore, Tape};
use finr::backends::{forward_axis, init_subnetwork, ActivationKind, Encoding, SubNetworkSpec};
use finr::cli::render::{error_map, quantize};
use finr::model::{linspace, FInrModel, FInrSpec};
use finr::tasks::{iou, ns_residual, psnr, ssim, synthetic_image, taylor_green_field};
use finr::tensor::ftnr::{self, Dtype};
use finr::tensor::{compose, contract_point, reference_compose, DenseTensor, FactorSet, Mode};
use finr::train::{Adam, Checkpoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

fn factor_set(mode: Mode, n: &[usize], r: usize, c: usize, seed: u64) -> FactorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = n.len();
    match mode {
        Mode::Cp => FactorSet::cp(n.iter().map(|&k| random_tensor(&mut rng, &[k, r])).collect(), random_tensor(&mut rng, &[r, c])),
        Mode::Tt => {
            let factors = (0..d)
                .map(|k| {
                    if k == 0 || k == d - 1 {
                        random_tensor(&mut rng, &[n[k], r])
                    } else {
                        random_tensor(&mut rng, &[n[k], r, r])
                    }
                })
                .collect();
            FactorSet::tt(factors, random_tensor(&mut rng, &[r, c]))
        }
        Mode::Tucker => {
            let mut core = vec![r; d];
            core.push(c);
            FactorSet::tucker(n.iter().map(|&k| random_tensor(&mut rng, &[k, r])).collect(), random_tensor(&mut rng, &core))
        }
    }
    .unwrap()
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Cp), Just(Mode::Tt), Just(Mode::Tucker)]
}

fn extents() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=8, 2..=3)
}

fn relative(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.max_abs_diff(b).unwrap() / b.max_abs().max(1e-300)
}

fn activation_strategy() -> impl Strategy<Value = ActivationKind> {
    prop_oneof![
        Just(ActivationKind::Relu),
        Just(ActivationKind::Tanh),
        (1.0f64..40.0).prop_map(|omega0| ActivationKind::Sine { omega0 }),
        (1.0f64..40.0, 1.0f64..20.0).prop_map(|(omega0, s0)| ActivationKind::Gabor { omega0, s0 }),
        (1.0f64..40.0, 0.1f64..2.0).prop_map(|(omega0, bias_k)| ActivationKind::Finer { omega0, bias_k }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_kernels_match_the_reference(mode in mode_strategy(), n in extents(), r in 1usize..=4,
                                        c in prop_oneof![Just(1usize), Just(3)], seed: u64) {
        let fs = factor_set(mode, &n, r, c, seed);
        let diff = compose(&fs).unwrap().max_abs_diff(&reference_compose(&fs).unwrap()).unwrap();
        prop_assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn composition_is_linear_in_each_factor(mode in mode_strategy(), n in extents(), r in 1usize..=4,
                                            seed: u64, alpha in -3.0f64..3.0, axis_pick: usize) {
        let fs = factor_set(mode, &n, r, 2, seed);
        let k = axis_pick % n.len();
        let scaled = fs.with_axis_factor(k, fs.axis_factors()[k].scaled(alpha)).unwrap();
        let lhs = compose(&scaled).unwrap();
        let rhs = compose(&fs).unwrap().scaled(alpha);
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn tucker_with_a_diagonal_core_is_cp(n in extents(), r in 1usize..=4, seed: u64) {
        let cp = factor_set(Mode::Cp, &n, r, 3, seed);
        let mix = cp.channel_mix().unwrap();
        let d = n.len();
        let mut shape = vec![r; d];
        shape.push(3);
        let core = DenseTensor::from_fn(&shape, |i| {
            if i[..d].iter().all(|&v| v == i[0]) { mix.get(&[i[0], i[d]]) } else { 0.0 }
        }).unwrap();
        let tucker = FactorSet::tucker(cp.axis_factors().to_vec(), core).unwrap();
        prop_assert!(relative(&compose(&tucker).unwrap(), &compose(&cp).unwrap()) <= 1e-12);
    }

    #[test]
    fn contract_point_reads_one_entry(mode in mode_strategy(), n in extents(), r in 1usize..=4, seed: u64, pick: u64) {
        let fs = factor_set(mode, &n, r, 3, seed);
        let full = compose(&fs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let idx: Vec<usize> = n.iter().map(|&k| rng.gen_range(0..k)).collect();
        let rows: Vec<&[f64]> = fs.axis_factors().iter().zip(&idx).map(|(f, &i)| {
            let w = f.len() / f.shape()[0];
            &f.data()[i * w..(i + 1) * w]
        }).collect();
        let entry = contract_point(&fs, &rows).unwrap();
        for (ch, v) in entry.iter().enumerate() {
            let mut at = idx.clone();
            at.push(ch);
            prop_assert!((full.get(&at) - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn backward_is_linear_in_the_loss(seed: u64, alpha in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let w = store.add("w", ParamRole::Weight, random_tensor(&mut rng, &[3, 2]));
        let x = random_tensor(&mut rng, &[4, 3]);
        let grads = |scale: f64, store: &mut ParamStore| {
            store.zero_grad();
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let wv = tape.param(store, w);
            let z = tape.matmul(xv, wv).unwrap();
            let a = tape.activation(z, ActivationKind::Tanh, 0).unwrap();
            let sq = tape.square(a);
            let m = tape.mean(sq);
            let l = tape.scale(m, scale);
            tape.backward(l, store).unwrap();
            store.grad(w).clone()
        };
        let base = grads(1.0, &mut store);
        let scaled = grads(alpha, &mut store);
        prop_assert!(scaled.max_abs_diff(&base.scaled(alpha)).unwrap() <= 1e-12 * base.max_abs().max(1e-300) * alpha.abs().max(1.0));
    }

    #[test]
    fn activation_derivatives_match_differences(kind in activation_strategy(), z in -2.0f64..2.0) {
        prop_assume!(!(matches!(kind, ActivationKind::Relu) && z.abs() < 1e-3));
        // finer has a curvature jump at z = 0
        prop_assume!(!(matches!(kind, ActivationKind::Finer { .. }) && z.abs() < 1e-3));
        let h = 1e-6 / kind.omega0().unwrap_or(1.0);
        for order in 1..=3 {
            let fd = (kind.derivative(order - 1, z + h) - kind.derivative(order - 1, z - h)) / (2.0 * h);
            let exact = kind.derivative(order, z);
            let scale = (0..=order).map(|o| kind.derivative(o, z).abs()).fold(1e-3, f64::max)
                * kind.omega0().unwrap_or(1.0).powi(order as i32).max(1.0);
            prop_assert!((fd - exact).abs() <= 1e-6 * scale, "{kind:?} order {order} at {z}: {exact} vs {fd}");
        }
    }

    #[test]
    fn forward_axis_is_permutation_equivariant(kind in activation_strategy(), seed: u64, shuffle: u64) {
        let spec = SubNetworkSpec::new(kind, 3).with_shape(2, 16);
        let mut store = ParamStore::new();
        let net = init_subnetwork(&spec, seed, &mut store, "a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        let xs: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut perm: Vec<usize> = (0..xs.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let ys: Vec<f64> = perm.iter().map(|&p| xs[p]).collect();
        let a = forward_axis(&net, &store, &xs, 2).unwrap();
        let b = forward_axis(&net, &store, &ys, 2).unwrap();
        for (row, &p) in perm.iter().enumerate() {
            for (ta, tb) in [(&a.value, &b.value), (a.d1.as_ref().unwrap(), b.d1.as_ref().unwrap()), (a.d2.as_ref().unwrap(), b.d2.as_ref().unwrap())] {
                prop_assert_eq!(ta.row(p), tb.row(row));
            }
        }
    }

    #[test]
    fn feature_grid_has_no_curvature(seed: u64, xs in prop::collection::vec(0.0f64..1.0, 1..16)) {
        let enc = Encoding::DEFAULT_GRID;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables: Vec<DenseTensor> = enc.table_shapes().iter().map(|s| random_tensor(&mut rng, s)).collect();
        let out = enc.encode(&finr::autodiff::Jet::coordinate(&xs, 2).unwrap(), &tables).unwrap();
        prop_assert!(out.d2.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_and_points_agree(mode in mode_strategy(), kind in activation_strategy(), seed: u64,
                             n in prop::collection::vec(1usize..=4, 2..=3)) {
        let d = n.len();
        let spec = FInrSpec::new(mode, 2, 2, SubNetworkSpec::new(kind, 1).with_shape(2, 8), vec![(-1.0, 2.0); d]).unwrap();
        let m = FInrModel::init(spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let coords: Vec<Vec<f64>> = n.iter().map(|&k| (0..k).map(|_| rng.gen_range(-1.0..2.0)).collect()).collect();
        let grid = m.eval_grid(&coords, 2).unwrap();
        let mut points = Vec::new();
        let total: usize = n.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = coords[k][rem % n[k]];
                rem /= n[k];
            }
            points.push(p);
        }
        let pts = m.eval_points(&points, 2).unwrap();
        let close = |a: &DenseTensor, b: &DenseTensor| a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= 1e-10);
        prop_assert!(close(&grid.value, &pts.value));
        for k in 0..d {
            prop_assert!(close(grid.partial(k).unwrap(), pts.partial(k).unwrap()));
            prop_assert!(close(grid.second(k).unwrap(), pts.second(k).unwrap()));
        }
    }

    #[test]
    fn self_comparisons_are_perfect(h in 11usize..20, w in 11usize..20, seed: u64) {
        let img = synthetic_image(h, w, 3, 3, seed).unwrap();
        prop_assert_eq!(psnr(&img, &img, 1.0).unwrap(), f64::INFINITY);
        prop_assert_eq!(ssim(&img, &img).unwrap(), 1.0);
        let sdf = img.map(|v| v - 0.5);
        prop_assert_eq!(iou(&sdf, &sdf, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn taylor_green_has_no_residual(nu in 1e-3f64..0.5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 3]> = (0..32).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0)]).collect();
        let r = ns_residual(&taylor_green_field(&pts, nu).unwrap(), nu).unwrap();
        for t in [&r.momentum, &r.divergence, &r.definition] {
            prop_assert!(t.max_abs() <= 1e-8);
        }
    }

    #[test]
    fn error_map_pixels_are_exact(pred in prop::collection::vec(0.0f64..1.0, 12), truth in prop::collection::vec(0.0f64..1.0, 12)) {
        let p = DenseTensor::new(vec![3, 4], pred.clone()).unwrap();
        let t = DenseTensor::new(vec![3, 4], truth.clone()).unwrap();
        let e = error_map(&p, &t).unwrap();
        for i in 0..12 {
            let expect = (8.0 * (pred[i] - truth[i]).abs()).clamp(0.0, 1.0);
            prop_assert_eq!(e.data()[i], expect);
            prop_assert_eq!(quantize(e.data()[i]), (expect * 255.0).round() as u8);
        }
    }

    #[test]
    fn ftnr_round_trips(shape in prop::collection::vec(1usize..5, 1..5), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&mut rng, &shape);
        let back = ftnr::read(&ftnr::to_bytes(&t, Dtype::F64)[..]).unwrap();
        prop_assert_eq!(back, t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoints_round_trip_byte_for_byte(mode in mode_strategy(), kind in activation_strategy(), seed: u64, step in 0u64..1000) {
        let spec = FInrSpec::new(mode, 2, 1, SubNetworkSpec::new(kind, 1).with_shape(1, 4), vec![(0.0, 1.0); 2]).unwrap();
        let model = FInrModel::init(spec.clone(), seed).unwrap();
        let adam = Adam::new(1e-3, model.params());
        let ck = Checkpoint {
            spec,
            params: model.params().clone(),
            adam,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step,
            meta: "prop".into(),
        };
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let coords = vec![linspace(0.0, 1.0, 3); 2];
        prop_assert_eq!(back.model().unwrap().eval_grid(&coords, 0).unwrap(), model.eval_grid(&coords, 0).unwrap());
    }
}
