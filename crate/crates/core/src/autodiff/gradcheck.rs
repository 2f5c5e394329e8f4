use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|analytic − numeric| / max(|analytic|, |numeric|, 1e-12)`.
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Checks every scalar parameter of `store` against a central difference of
/// step `eps`. `loss` rebuilds the scalar loss on a fresh tape from the
/// current parameter values. Gradients in `store` are zeroed before and
/// after the check; parameter values are restored exactly.
pub fn grad_check<F>(store: &mut ParamStore, eps: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let out = loss(&mut tape, store)?;
    tape.backward(out, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grad();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss(&mut tape, store)?;
        Ok(tape.scalar_value(out))
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let ids: Vec<_> = store.iter().map(|p| p.id).collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for j in 0..store.value(id).len() {
            let original = store.value(id).data()[j];
            store.get_mut(id).value.data_mut()[j] = original + eps;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[j] = original - eps;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][j];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error || report.worst_param.is_empty() {
                report.max_relative_error = rel;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = j;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
