use crate::error::{Error, Result};
use crate::layers::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments per parameter, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One bias-corrected Adam update. `grads` is indexed like `params`.
pub fn adam_step(params: &mut ParamStore, grads: &[Vec<f64>], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "{} gradients and {} moment slots for {} parameters",
            grads.len(),
            state.m.len(),
            params.len()
        )));
    }
    for id in params.ids() {
        let g = &grads[id.index()];
        if g.len() != params.get(id).len() {
            return Err(Error::Contract(format!("gradient of `{}` has the wrong length", params.name(id))));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient for parameter `{}`", params.name(id))));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let k = id.index();
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (i, w) in params.get_mut(id).data_mut().iter_mut().enumerate() {
            let g = grads[k][i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
