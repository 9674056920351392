use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{Tensor, Var, NORM_EPS};

type Mat = Vec<Vec<f64>>;

/// Plain nested-`Vec` reference implementations, independent of the graph.
mod oracle {
    use super::Mat;

    pub fn mm(a: &Mat, b: &Mat) -> Mat {
        a.iter()
            .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect())
            .collect()
    }

    pub fn add(a: &Mat, b: &Mat) -> Mat {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
    }

    pub fn add_bias(a: &Mat, b: &[f64]) -> Mat {
        a.iter().map(|r| r.iter().zip(b).map(|(x, y)| x + y).collect()).collect()
    }

    pub fn transpose(a: &Mat) -> Mat {
        (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
    }

    pub fn layer_norm(a: &Mat, gain: &[f64], offset: &[f64]) -> Mat {
        a.iter()
            .map(|r| {
                let d = r.len() as f64;
                let mean = r.iter().sum::<f64>() / d;
                let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
                r.iter()
                    .zip(gain.iter().zip(offset))
                    .map(|(x, (g, o))| (x - mean) / (var + super::NORM_EPS).sqrt() * g + o)
                    .collect()
            })
            .collect()
    }

    pub struct Head {
        pub q: Mat,
        pub k: Mat,
        pub v: Mat,
    }

    pub fn attention(heads: &[Head], wo: &Mat, q: &Mat, k: &Mat, v: &Mat, mask: &[bool]) -> Mat {
        let d_k = heads[0].q[0].len() as f64;
        let mut joined: Mat = vec![Vec::new(); q.len()];
        for h in heads {
            let qh = mm(q, &h.q);
            let kh = mm(k, &h.k);
            let vh = mm(v, &h.v);
            let scores = mm(&qh, &transpose(&kh));
            for (i, srow) in scores.iter().enumerate() {
                let logits: Vec<f64> = srow
                    .iter()
                    .zip(mask)
                    .map(|(s, &m)| if m { s / d_k.sqrt() } else { f64::NEG_INFINITY })
                    .collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for c in 0..vh[0].len() {
                    joined[i].push(exps.iter().zip(&vh).map(|(e, vr)| e / z * vr[c]).sum());
                }
            }
        }
        mm(&joined, wo)
    }

    pub struct Ffn {
        pub w1: Mat,
        pub b1: Vec<f64>,
        pub w2: Mat,
        pub b2: Vec<f64>,
    }

    pub fn ffn(f: &Ffn, x: &Mat) -> Mat {
        let h: Mat = add_bias(&mm(x, &f.w1), &f.b1).into_iter().map(|r| r.into_iter().map(|v| v.max(0.0)).collect()).collect();
        add_bias(&mm(&h, &f.w2), &f.b2)
    }
}

fn mat(store: &ParamStore, id: ParamId) -> Mat {
    let t = store.get(id);
    let (r, c) = t.dims2().unwrap();
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn vec_of(store: &ParamStore, id: ParamId) -> Vec<f64> {
    store.get(id).data().to_vec()
}

fn heads(store: &ParamStore, mha: &MultiHeadAttention) -> Vec<oracle::Head> {
    mha.heads
        .iter()
        .map(|h| oracle::Head { q: mat(store, h.query), k: mat(store, h.key), v: mat(store, h.value) })
        .collect()
}

fn ffn(store: &ParamStore, f: &FeedForward) -> oracle::Ffn {
    oracle::Ffn {
        w1: mat(store, f.inner.weight),
        b1: vec_of(store, f.inner.bias),
        w2: mat(store, f.outer.weight),
        b2: vec_of(store, f.outer.bias),
    }
}

fn ln(store: &ParamStore, x: &Mat, n: &LayerNorm) -> Mat {
    oracle::layer_norm(x, &vec_of(store, n.gain), &vec_of(store, n.offset))
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Randomizes biases, gains and offsets so oracles exercise them.
fn jitter(store: &mut ParamStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in store.ids().collect::<Vec<_>>() {
        let t = store.get_mut(id);
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
}

fn to_tensor(m: &Mat) -> Tensor {
    Tensor::from_rows(m).unwrap()
}

fn assert_close(got: &Tensor, want: &Mat, tol: f64) {
    let flat: Vec<f64> = want.iter().flatten().copied().collect();
    assert_eq!(got.len(), flat.len());
    for (a, b) in got.data().iter().zip(&flat) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }
}

fn stack(store: &mut ParamStore, d_model: usize, heads: usize, layers: usize, positional: bool, seed: u64) -> TransformerStack {
    let cfg = StackConfig { d_model, heads, d_ff: 2 * d_model, layers, positional };
    TransformerStack::new(store, &mut Initializer::new(seed), "tf", cfg).unwrap()
}

#[test]
fn positional_encoding_examples() {
    let pe = positional_encoding(6, 8).unwrap();
    for i in 0..4 {
        assert_eq!(pe.row(0)[2 * i], 0.0);
        assert_eq!(pe.row(0)[2 * i + 1], 1.0);
    }
    assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!((pe.row(1)[0] - 0.8414709848078965).abs() < 1e-12);
    assert!(positional_encoding(3, 5).is_err());
}

#[test]
fn encoder_preserves_shape() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 8, 2, 2, true, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in [1, 3, 7] {
        let mut s = Session::new(&store);
        let x = s.constant(to_tensor(&random_mat(&mut rng, n, 8)));
        let y = tf.encode(&mut s, x, &vec![true; n]).unwrap();
        assert_eq!(s.graph.shape(y), &[n, 8]);
    }
}

#[test]
fn encoder_ignores_padded_rows() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 4, 2, 2, true, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let valid = random_mat(&mut rng, 3, 4);
    let mask = [true, true, true, false, false];
    let mut outs = Vec::new();
    for _ in 0..2 {
        let mut rows = valid.clone();
        rows.extend(random_mat(&mut rng, 2, 4).into_iter().map(|r| r.into_iter().map(|v| v * 10.0).collect()));
        let mut s = Session::new(&store);
        let x = s.constant(to_tensor(&rows));
        let y = tf.encode(&mut s, x, &mask).unwrap();
        outs.push(s.graph.value(y).data()[..12].to_vec());
    }
    for (a, b) in outs[0].iter().zip(&outs[1]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn encoder_matches_composed_oracle() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 2, 1, 1, false, 2);
    jitter(&mut store, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_mat(&mut rng, 3, 2);

    let layer = &tf.encoder[0];
    let a = oracle::attention(&heads(&store, &layer.self_attn), &mat(&store, layer.self_attn.output), &x, &x, &x, &[true; 3]);
    let h = ln(&store, &oracle::add(&x, &a), &layer.norm1);
    let f = oracle::ffn(&ffn(&store, &layer.ffn), &h);
    let want = ln(&store, &oracle::add(&h, &f), &layer.norm2);

    let mut s = Session::new(&store);
    let xv = s.constant(to_tensor(&x));
    let y = tf.encode(&mut s, xv, &[true; 3]).unwrap();
    assert_close(s.graph.value(y), &want, 1e-10);
}

#[test]
fn decoder_matches_composed_oracle() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 2, 1, 1, false, 3);
    jitter(&mut store, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y0 = random_mat(&mut rng, 2, 2);
    let mem = random_mat(&mut rng, 2, 2);
    let mem_mask = [true, false];

    let layer = &tf.decoder[0];
    let a = oracle::attention(&heads(&store, &layer.self_attn), &mat(&store, layer.self_attn.output), &y0, &y0, &y0, &[true; 2]);
    let h1 = ln(&store, &oracle::add(&y0, &a), &layer.norm1);
    let c = oracle::attention(&heads(&store, &layer.cross_attn), &mat(&store, layer.cross_attn.output), &h1, &mem, &mem, &mem_mask);
    let h2 = ln(&store, &oracle::add(&h1, &c), &layer.norm2);
    let f = oracle::ffn(&ffn(&store, &layer.ffn), &h2);
    let want = ln(&store, &oracle::add(&h2, &f), &layer.norm3);

    let mut s = Session::new(&store);
    let yv = s.constant(to_tensor(&y0));
    let mv = s.constant(to_tensor(&mem));
    let out = tf.decode(&mut s, yv, mv, &[true; 2], &mem_mask).unwrap();
    assert_close(s.graph.value(out), &want, 1e-10);
}

#[test]
fn decoder_output_shape_and_width_errors() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 4, 2, 1, true, 4);
    let mut s = Session::new(&store);
    let t = s.constant(Tensor::full(&[3, 4], 0.2));
    let m = s.constant(Tensor::full(&[3, 4], -0.1));
    let y = tf.decode(&mut s, t, m, &[true; 3], &[true; 3]).unwrap();
    assert_eq!(s.graph.shape(y), &[3, 4]);
    let narrow = s.constant(Tensor::zeros(&[3, 2]));
    assert!(tf.decode(&mut s, t, narrow, &[true; 3], &[true; 3]).is_err());
}

#[test]
fn decoder_ignores_fully_masked_memory() {
    let mut store = ParamStore::new();
    let tf = stack(&mut store, 4, 2, 2, true, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tgt = to_tensor(&random_mat(&mut rng, 3, 4));
    let mut outs = Vec::new();
    for _ in 0..2 {
        let mut s = Session::new(&store);
        let t = s.constant(tgt.clone());
        let m = s.constant(to_tensor(&random_mat(&mut rng, 3, 4)));
        let y = tf.decode(&mut s, t, m, &[true; 3], &[false; 3]).unwrap();
        outs.push(s.graph.value(y).clone());
    }
    for (a, b) in outs[0].data().iter().zip(outs[1].data()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn layer_norm_output_moments_before_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let store = ParamStore::new();
    let mut s = Session::new(&store);
    let x = s.constant(to_tensor(&random_mat(&mut rng, 4, 8)));
    let y = s.graph.normalize_rows(x).unwrap();
    for r in 0..4 {
        let row = s.graph.value(y).row(r);
        let mean = row.iter().sum::<f64>() / 8.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-6);
    }
}

/// Adds `inputs` to the store as pseudo-parameters so one finite-difference
/// sweep covers both layer parameters and layer inputs.
fn check_all(store: &ParamStore, loss: impl Fn(&mut Session) -> crate::Result<Var>) {
    for (id, err) in param_gradient_errors(store, loss, 1e-5, None).unwrap() {
        assert!(err < 1e-4, "{}: {err}", store.name(id));
    }
}

fn weighted(s: &mut Session, y: Var, seed: u64) -> crate::Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = s.graph.shape(y).to_vec();
    let n = shape.iter().product();
    let w = s.constant(Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?);
    let p = s.graph.mul(y, w)?;
    Ok(s.graph.sum(p))
}

#[test]
fn every_layer_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &n in &[1usize, 2, 5] {
        for &d in &[4usize, 8] {
            let mut store = ParamStore::new();
            let mut init = Initializer::new(n as u64 * 31 + d as u64);
            let dense = DenseLayer::new(&mut store, &mut init, "dense", d, 3);
            let gru = BiGruLayer::new(&mut store, &mut init, "gru", d, 3);
            let mha = MultiHeadAttention::new(&mut store, &mut init, "mha", d, 2).unwrap();
            let cfg = StackConfig { d_model: d, heads: 2, d_ff: 6, layers: 1, positional: true };
            let tf = TransformerStack::new(&mut store, &mut init, "tf", cfg).unwrap();
            jitter(&mut store, n as u64);
            let x = store.add("input.x", to_tensor(&random_mat(&mut rng, n, d)));
            let m = store.add("input.memory", to_tensor(&random_mat(&mut rng, n, d)));
            let mask = vec![true; n];

            check_all(&store, |s| {
                let xv = s.param(x);
                let y = dense.forward(s, xv)?;
                weighted(s, y, 1)
            });
            check_all(&store, |s| {
                let xv = s.param(x);
                let y = gru.forward(s, xv, &mask)?;
                weighted(s, y, 2)
            });
            check_all(&store, |s| {
                let (xv, mv) = (s.param(x), s.param(m));
                let y = mha.forward(s, xv, mv, mv, &mask)?;
                weighted(s, y, 3)
            });
            check_all(&store, |s| {
                let xv = s.param(x);
                let enc = tf.encode(s, xv, &mask)?;
                let mv = s.param(m);
                let y = tf.decode(s, mv, enc, &mask, &mask)?;
                weighted(s, y, 4)
            });
        }
    }
}

#[test]
fn appended_padding_never_changes_valid_rows() {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(8);
    let gru = BiGruLayer::new(&mut store, &mut init, "gru", 4, 3);
    let mha = MultiHeadAttention::new(&mut store, &mut init, "mha", 4, 2).unwrap();
    let tf = stack(&mut store, 4, 2, 1, true, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_mat(&mut rng, 3, 4);
    let mut xp = x.clone();
    xp.extend(random_mat(&mut rng, 3, 4));
    let mask = [true; 3];
    let pmask = [true, true, true, false, false, false];

    let mut s = Session::new(&store);
    let (xv, xpv) = (s.constant(to_tensor(&x)), s.constant(to_tensor(&xp)));
    let pairs = [
        (gru.forward(&mut s, xv, &mask).unwrap(), gru.forward(&mut s, xpv, &pmask).unwrap()),
        (mha.forward(&mut s, xv, xv, xv, &mask).unwrap(), mha.forward(&mut s, xpv, xpv, xpv, &pmask).unwrap()),
        (tf.encode(&mut s, xv, &mask).unwrap(), tf.encode(&mut s, xpv, &pmask).unwrap()),
        (
            tf.decode(&mut s, xv, xv, &mask, &mask).unwrap(),
            tf.decode(&mut s, xpv, xpv, &pmask, &pmask).unwrap(),
        ),
    ];
    for (a, b) in pairs {
        let (a, b) = (s.graph.value(a), s.graph.value(b));
        let w = a.shape()[1];
        for (p, q) in a.data().iter().zip(&b.data()[..3 * w]) {
            assert!((p - q).abs() < 1e-9);
        }
    }
}
