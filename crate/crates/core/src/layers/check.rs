use super::params::{ParamId, ParamStore, Session};
use crate::autodiff::{relative_error, Primitive, Var};
use crate::error::{Error, Result};

/// Max relative error between analytic and central-difference gradients,
/// for each parameter of `store` that `loss` uses.
///
/// `fault` corrupts one backward rule in the analytic pass only.
pub fn param_gradient_errors<F>(
    store: &ParamStore,
    loss: F,
    eps: f64,
    fault: Option<Primitive>,
) -> Result<Vec<(ParamId, f64)>>
where
    F: Fn(&mut Session) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Contract(format!("finite-difference eps {eps} outside [1e-7, 1e-3]")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut s = Session::new(store);
        let out = loss(&mut s)?;
        let v = s.graph.value(out);
        if !v.is_scalar() {
            return Err(Error::Contract(format!("loss has shape {:?}, not a scalar", v.shape())));
        }
        Ok(v.item())
    };

    let mut s = Session::new(store).with_fault(fault);
    let out = loss(&mut s)?;
    s.graph.backward(out)?;
    let analytic = s.param_grads()?;
    drop(s);

    let mut probe = store.clone();
    let mut report = Vec::new();
    for id in store.ids() {
        let mut worst = 0.0f64;
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            worst = worst.max(relative_error(analytic[id.index()][i], (plus - minus) / (2.0 * eps)));
        }
        report.push((id, worst));
    }
    Ok(report)
}
