use super::params::{Initializer, ParamId, ParamStore, Session};
use crate::autodiff::{Tensor, Var};
use crate::error::{dim_err, Result};

/// Parameters of one GRU direction.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
}

impl GruCell {
    fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d_in: usize, d_h: usize) -> Self {
        let mut w = |store: &mut ParamStore, t: &str, rows: usize| store.add(format!("{name}.{t}"), init.glorot(rows, d_h));
        let w_z = w(store, "w_z", d_in);
        let w_r = w(store, "w_r", d_in);
        let w_h = w(store, "w_h", d_in);
        let u_z = w(store, "u_z", d_h);
        let u_r = w(store, "u_r", d_h);
        let u_h = w(store, "u_h", d_h);
        let b_z = store.add(format!("{name}.b_z"), Tensor::zeros(&[d_h]));
        let b_r = store.add(format!("{name}.b_r"), Tensor::zeros(&[d_h]));
        let b_h = store.add(format!("{name}.b_h"), Tensor::zeros(&[d_h]));
        GruCell { w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h }
    }

    /// Runs the recurrence over `order` (row indices of `x`), returning the
    /// hidden state emitted at each visited row, in visiting order.
    fn run(&self, s: &mut Session, x: Var, order: &[usize], d_h: usize) -> Result<Vec<Var>> {
        if order.is_empty() {
            return Ok(Vec::new());
        }
        let proj = |s: &mut Session, w: ParamId, b: ParamId| -> Result<Var> {
            let w = s.param(w);
            let b = s.param(b);
            let xw = s.graph.matmul(x, w)?;
            s.graph.add(xw, b)
        };
        let xz = proj(s, self.w_z, self.b_z)?;
        let xr = proj(s, self.w_r, self.b_r)?;
        let xh = proj(s, self.w_h, self.b_h)?;
        let (u_z, u_r, u_h) = (s.param(self.u_z), s.param(self.u_r), s.param(self.u_h));

        let mut h = s.constant(Tensor::zeros(&[1, d_h]));
        let mut outputs = Vec::with_capacity(order.len());
        for &t in order {
            let g = &mut s.graph;
            let xz_t = g.slice(xz, 0, t, 1)?;
            let xr_t = g.slice(xr, 0, t, 1)?;
            let xh_t = g.slice(xh, 0, t, 1)?;
            let hz = g.matmul(h, u_z)?;
            let z_in = g.add(xz_t, hz)?;
            let z = g.sigmoid(z_in);
            let hr = g.matmul(h, u_r)?;
            let r_in = g.add(xr_t, hr)?;
            let r = g.sigmoid(r_in);
            let rh = g.mul(r, h)?;
            let rhu = g.matmul(rh, u_h)?;
            let cand_in = g.add(xh_t, rhu)?;
            let cand = g.tanh(cand_in);
            // h' = (1 - z)⊙h + z⊙h̃ = h + z⊙(h̃ - h)
            let diff = g.sub(cand, h)?;
            let step = g.mul(z, diff)?;
            h = g.add(h, step)?;
            outputs.push(h);
        }
        Ok(outputs)
    }
}

/// Bidirectional GRU over the utterances of one video.
#[derive(Debug, Clone)]
pub struct BiGruLayer {
    pub forward: GruCell,
    pub backward: GruCell,
    pub d_in: usize,
    pub d_h: usize,
}

impl BiGruLayer {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d_in: usize, d_h: usize) -> Self {
        let forward = GruCell::new(store, init, &format!("{name}.fwd"), d_in, d_h);
        let backward = GruCell::new(store, init, &format!("{name}.bwd"), d_in, d_h);
        BiGruLayer { forward, backward, d_in, d_h }
    }

    /// Same layer with the two directions' parameter sets exchanged.
    pub fn swapped(&self) -> Self {
        BiGruLayer { forward: self.backward.clone(), backward: self.forward.clone(), ..self.clone() }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.d_h
    }

    /// `x` is `[N×d_in]`; `mask[i]` marks real utterances, which must
    /// precede all padding. Padded rows emit zeros and leave both
    /// recurrences untouched.
    pub fn forward(&self, s: &mut Session, x: Var, mask: &[bool]) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.d_in {
            return Err(dim_err(format!("BiGRU expects [N×{}], got {:?}", self.d_in, shape)));
        }
        let n = shape[0];
        if mask.len() != n {
            return Err(dim_err(format!("mask length {} does not match {} utterances", mask.len(), n)));
        }
        let valid = valid_prefix(mask)?;

        let order: Vec<usize> = (0..valid).collect();
        let fwd = self.forward.run(s, x, &order, self.d_h)?;
        let rev: Vec<usize> = order.iter().rev().copied().collect();
        let mut bwd = self.backward.run(s, x, &rev, self.d_h)?;
        bwd.reverse();

        let mut rows = Vec::with_capacity(n);
        for (f, b) in fwd.into_iter().zip(bwd) {
            rows.push(s.graph.concat(&[f, b], 1)?);
        }
        if valid < n {
            rows.push(s.constant(Tensor::zeros(&[n - valid, 2 * self.d_h])));
        }
        if rows.is_empty() {
            return Ok(s.constant(Tensor::zeros(&[0, 2 * self.d_h])));
        }
        s.graph.concat(&rows, 0)
    }
}

/// Number of leading real positions; errors if padding is not trailing.
pub fn valid_prefix(mask: &[bool]) -> Result<usize> {
    let valid = mask.iter().take_while(|&&m| m).count();
    if mask[valid..].iter().any(|&m| m) {
        return Err(dim_err("mask padding must trail real positions"));
    }
    Ok(valid)
}
