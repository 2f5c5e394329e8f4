//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Input derivatives needed by Eikonal and PDE losses are carried forward as
//! [`Jet`] channels built from ordinary tape nodes, so parameter gradients
//! of derivative-bearing losses come out of a single reverse sweep.

mod gradcheck;
mod jet;
mod params;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use jet::Jet;
pub use params::{Param, ParamId, ParamRole, ParamStore};
pub use tape::{Adjoints, Tape, Var};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ActivationKind;
    use crate::error::Error;
    use crate::tensor::DenseTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[Vec<f64>]) -> DenseTensor {
        DenseTensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_forward_and_adjoints() {
        let mut tape = Tape::new();
        let a = tape.constant(mat(&[vec![1.0, 2.0]]));
        let b = tape.constant(mat(&[vec![3.0], vec![4.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
        let adj = tape.adjoints(c).unwrap();
        assert_eq!(adj.get(a).unwrap().data(), &[3.0, 4.0]);
        assert_eq!(adj.get(b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.constant(DenseTensor::ones(&[2, 3]).unwrap());
        let b = tape.constant(DenseTensor::ones(&[2, 3]).unwrap());
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut store = ParamStore::new();
        let a = store.add("a", ParamRole::Weight, DenseTensor::from_fn(&[4, 3], |_| rng.gen_range(-1.0..1.0)).unwrap());
        let b = store.add("b", ParamRole::Weight, DenseTensor::from_fn(&[3, 2], |_| rng.gen_range(-1.0..1.0)).unwrap());
        let w = DenseTensor::from_fn(&[4, 2], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let report = grad_check(&mut store, 1e-5, |tape, s| {
            let (va, vb) = (tape.param(s, a), tape.param(s, b));
            let c = tape.matmul(va, vb)?;
            let wv = tape.constant(w.clone());
            let weighted = tape.mul(c, wv)?;
            Ok(tape.sum(weighted))
        })
        .unwrap();
        assert_eq!(report.checked, 18);
        assert!(report.max_relative_error < 1e-7, "{report:?}");
    }

    fn jet_through(kind: ActivationKind, v: f64) -> (f64, f64, f64) {
        let mut tape = Tape::new();
        let x = tape.jet_constant(Jet::coordinate(&[v], 2).unwrap());
        let y = tape.jet_activation(&x, kind).unwrap();
        let vals = tape.jet_values(&y);
        (
            vals.value.data()[0],
            vals.d1.unwrap().data()[0],
            vals.d2.unwrap().data()[0],
        )
    }

    #[test]
    fn activation_jets_at_origin() {
        assert_eq!(jet_through(ActivationKind::Sine { omega0: 1.0 }, 0.0), (0.0, 1.0, 0.0));
        assert_eq!(jet_through(ActivationKind::Tanh, 0.0), (0.0, 1.0, 0.0));
    }

    #[test]
    fn gaussian_jet_matches_finite_differences() {
        let kind = ActivationKind::Gaussian { s: 1.0 };
        let (v, d1, d2) = jet_through(kind, 0.3);
        let h = 1e-4;
        let f = |x: f64| (-(x * x)).exp();
        let fd1 = (f(0.3 + h) - f(0.3 - h)) / (2.0 * h);
        let fd2 = (f(0.3 + h) - 2.0 * v + f(0.3 - h)) / (h * h);
        assert!((d1 - fd1).abs() / d1.abs() < 1e-6);
        assert!((d2 - fd2).abs() / d2.abs() < 1e-6);
    }

    #[test]
    fn backward_of_square() {
        let mut store = ParamStore::new();
        let p = store.add("p", ParamRole::Weight, DenseTensor::filled(&[1], 3.0).unwrap());
        let unused = store.add("unused", ParamRole::Bias, DenseTensor::filled(&[2], 1.0).unwrap());
        let mut tape = Tape::new();
        let pv = tape.param(&store, p);
        let _ = tape.param(&store, unused);
        let loss = tape.square(pv);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(p).data(), &[6.0]);
        assert_eq!(store.grad(unused).data(), &[0.0, 0.0]);
        // accumulation contract: a second sweep without zeroing doubles
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(p).data(), &[12.0]);
        store.zero_grad();
        assert_eq!(store.grad(p).data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let x = tape.constant(DenseTensor::ones(&[2, 2]).unwrap());
        assert!(matches!(tape.backward(x, &mut store), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_is_linear_in_the_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let w = store.add("w", ParamRole::Weight, DenseTensor::from_fn(&[3, 3], |_| rng.gen_range(-1.0..1.0)).unwrap());
        let x = DenseTensor::from_fn(&[5, 3], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let grads = |store: &mut ParamStore, alpha: f64| {
            store.zero_grad();
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let wv = tape.param(store, w);
            let y = tape.matmul(xv, wv).unwrap();
            let a = tape.activation(y, ActivationKind::Tanh, 0).unwrap();
            let sq = tape.square(a);
            let l = tape.mean(sq);
            let scaled = tape.scale(l, alpha);
            tape.backward(scaled, store).unwrap();
            store.grad(w).clone()
        };
        let g1 = grads(&mut store, 1.0);
        let g3 = grads(&mut store, -2.5);
        for (a, b) in g1.data().iter().zip(g3.data()) {
            assert!((b - (-2.5) * a).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn grad_check_on_linear_function() {
        let mut store = ParamStore::new();
        let p = store.add("p", ParamRole::Weight, DenseTensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        let report = grad_check(&mut store, 1e-5, |tape, s| {
            let v = tape.param(s, p);
            let c = tape.constant(DenseTensor::new(vec![3], vec![1.0, 2.0, -3.0]).unwrap());
            let m = tape.mul(v, c)?;
            Ok(tape.sum(m))
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-10, "{report:?}");
        assert_eq!(store.value(p).data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn composed_toy_loss_matches_finite_differences() {
        // mse of a rank-one CP composition of two 1×1 factors against a target
        let mut store = ParamStore::new();
        let p1 = store.add("p1", ParamRole::Weight, DenseTensor::filled(&[1, 1], 1.3).unwrap());
        let p2 = store.add("p2", ParamRole::Weight, DenseTensor::filled(&[1, 1], -0.7).unwrap());
        let report = grad_check(&mut store, 1e-5, |tape, s| {
            let a = tape.param(s, p1);
            let b = tape.param(s, p2);
            let mix = tape.constant(DenseTensor::ones(&[1, 1]).unwrap());
            let z = tape.rowkron(b, mix)?;
            let out = tape.matmul(a, z)?;
            let target = tape.constant(DenseTensor::filled(&[1, 1], 3.0).unwrap());
            tape.mse(out, target)
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn structural_ops_have_consistent_adjoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let x = store.add("x", ParamRole::Weight, DenseTensor::from_fn(&[2, 3, 4], |_| rng.gen_range(-1.0..1.0)).unwrap());
        let v = store.add("v", ParamRole::Weight, DenseTensor::from_fn(&[3, 2], |_| rng.gen_range(-1.0..1.0)).unwrap());
        let report = grad_check(&mut store, 1e-5, |tape, s| {
            let xv = tape.param(s, x);
            let sw = tape.swap01(xv)?; // [3, 2, 4]
            let m = tape.reshape(sw, &[3, 8])?;
            let vv = tape.param(s, v);
            let bc = tape.bcontract(vv, m)?; // 3 × 4
            let t = tape.transpose(bc)?; // 4 × 3
            let g = tape.gather_rows(t, &[3, 0, 3])?;
            let c = tape.column(g, 1)?;
            let cat = tape.concat_cols(&[g, c])?;
            let sq = tape.square(cat);
            let ab = tape.abs(cat);
            let both = tape.add(sq, ab)?;
            let r = tape.sqrt(both);
            Ok(tape.mean(r))
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }
}
