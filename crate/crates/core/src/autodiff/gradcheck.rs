use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Relative error used throughout gradient verification:
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Contract(format!("finite-difference eps {eps} outside [1e-7, 1e-3]")));
    }
    Ok(())
}

fn eval_scalar<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let v = g.value(out);
    if !v.is_scalar() {
        return Err(Error::Contract(format!("checked function returned shape {:?}, not a scalar", v.shape())));
    }
    Ok(v.item())
}

/// Central-difference check of `f` with respect to each of `inputs`.
/// Returns the max relative error per input.
pub fn finite_difference_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_eps(eps)?;
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| g.grad(v).unwrap_or_default().to_vec()).collect();

    let mut errors = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for i in 0..inputs[which].len() {
            let orig = inputs[which].data()[i];
            probe[which].data_mut()[i] = orig + eps;
            let plus = eval_scalar(&f, &probe)?;
            probe[which].data_mut()[i] = orig - eps;
            let minus = eval_scalar(&f, &probe)?;
            probe[which].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grad[i], numeric));
        }
        errors.push(worst);
    }
    Ok(errors)
}

/// Central-difference check of scalar `f` at `x`; returns the max relative
/// error over coordinates.
pub fn finite_difference_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let errs = finite_difference_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(x), eps)?;
    Ok(errs[0])
}
