//! Minimal reverse-mode differentiable tensor engine.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{finite_difference_check, finite_difference_check_many, relative_error};
pub use graph::{sigmoid, Graph, Primitive, Var, NORM_EPS};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let mut g = Graph::new();
        let eye = g.constant(m(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let b = g.constant(m(&[vec![3.0, 4.0], vec![5.0, 6.0]]));
        let c = g.matmul(eye, b).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = g.constant(m(&[vec![1.0, 2.0]]));
        let z = g.constant(m(&[vec![0.0], vec![0.0]]));
        let c = g.matmul(a, z).unwrap();
        assert_eq!(g.value(c).data(), &[0.0]);

        let a = g.constant(m(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = g.constant(m(&[vec![5.0], vec![6.0]]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3] and [2, 3]"), "{err}");
    }

    #[test]
    fn pointwise_examples() {
        let mut g = Graph::new();
        let zero = g.constant(Tensor::vector(vec![0.0]));
        let t = g.tanh(zero);
        let s = g.sigmoid(zero);
        assert_eq!(g.value(t).item(), 0.0);
        assert_eq!(g.value(s).item(), 0.5);
        let x = g.constant(Tensor::vector(vec![-3.5]));
        let a = g.abs(x);
        assert_eq!(g.value(a).item(), 3.5);
    }

    #[test]
    fn pointwise_shape_mismatch() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[3, 2]));
        assert!(g.add(a, b).is_err());
        assert!(g.mul(a, b).is_err());
        let bias = g.constant(Tensor::zeros(&[2]));
        assert!(g.add(a, bias).is_err());
        let bias = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = g.add(a, bias).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = g.softmax(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);

        let x = g.constant(Tensor::vector(vec![1000.0; 3]));
        let y = g.softmax(x).unwrap();
        for &p in g.value(y).data() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }

        let x = g.constant(Tensor::vector(vec![0.0, 3f64.ln()]));
        let y = g.softmax(x).unwrap();
        assert_abs_diff_eq!(g.value(y).data()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g.value(y).data()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn softmax_rejects_nan() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.0, f64::NAN]));
        assert!(matches!(g.softmax(x), Err(crate::Error::Numeric(_))));
    }

    #[test]
    fn concat_examples() {
        let mut g = Graph::new();
        let a = g.constant(m(&[vec![1.0]]));
        let b = g.constant(m(&[vec![2.0]]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).shape(), &[1, 2]);
        assert_eq!(g.value(c).data(), &[1.0, 2.0]);

        let single = g.concat(&[a], 0).unwrap();
        assert_eq!(g.value(single), g.value(a));

        let a = g.constant(m(&[vec![1.0, 2.0]]));
        let b = g.constant(m(&[vec![3.0, 4.0]]));
        let c = g.concat(&[a, b], 0).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 2]);
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);

        let wide = g.constant(m(&[vec![1.0, 2.0, 3.0]]));
        assert!(g.concat(&[a, wide], 0).is_err());
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]), true);
        let l = g.sum(x);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![2.0, -1.0]), true);
        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0, -2.0]);

        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.0]), true);
        let t = g.tanh(x);
        let l = g.sum(t);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let y = g.tanh(x);
        assert!(matches!(g.backward(y), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn leaf_used_twice_accumulates() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.7]), true);
        let y = g.add(x, x).unwrap();
        let l = g.sum(y);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_grad() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let unused = g.leaf(Tensor::vector(vec![5.0, 5.0, 5.0]), true);
        let l = g.sum(x);
        g.backward(l).unwrap();
        assert_eq!(g.grad(unused).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn abs_subgradient_at_zero_is_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.0, -2.0, 3.0]), true);
        let a = g.abs(x);
        let l = g.sum(a);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, -1.0, 1.0]);
    }

    #[test]
    fn fd_check_quadratic_and_constant() {
        let x = Tensor::vector(vec![0.3, -1.7, 2.5, 10.0]);
        let err = finite_difference_check(
            |g, x| {
                let sq = g.mul(x, x)?;
                Ok(g.sum(sq))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");

        let err = finite_difference_check(|g, _| Ok(g.constant(Tensor::scalar(4.0))), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn fd_check_contracts() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        assert!(finite_difference_check(|g, x| Ok(g.tanh(x)), &x, 1e-5).is_err());
        assert!(finite_difference_check(|g, x| Ok(g.sum(x)), &x, 1e-1).is_err());
        assert!(finite_difference_check(|g, x| Ok(g.sum(x)), &x, 1e-9).is_err());
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Reduces `y` to a scalar with fixed random weights so every output
    /// coordinate contributes a distinct sensitivity.
    fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> crate::Result<Var> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = g.shape(y).to_vec();
        let n = shape.iter().product();
        let w = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let w = g.constant(w);
        let p = g.mul(y, w)?;
        Ok(g.sum(p))
    }

    type UnaryCase = (&'static str, fn(&mut Graph, Var) -> crate::Result<Var>);

    #[test]
    fn every_primitive_passes_fd_at_random_points() {
        let smooth: Vec<UnaryCase> = vec![
            ("tanh", |g, x| Ok(g.tanh(x))),
            ("sigmoid", |g, x| Ok(g.sigmoid(x))),
            ("scale", |g, x| Ok(g.scale(x, -2.5))),
            ("softmax", |g, x| g.softmax(x)),
            ("log_softmax", |g, x| g.log_softmax(x)),
            ("transpose", |g, x| g.transpose(x)),
            ("normalize_rows", |g, x| g.normalize_rows(x)),
            ("slice0", |g, x| g.slice(x, 0, 1, 2)),
            ("slice1", |g, x| g.slice(x, 1, 1, 2)),
            ("gather", |g, x| g.gather(x, &[0, 5, 5, 7])),
            ("mean", |g, x| Ok(g.mean(x))),
        ];
        let kinked: Vec<UnaryCase> = vec![("abs", |g, x| Ok(g.abs(x))), ("relu", |g, x| Ok(g.relu(x)))];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10u64 {
            let x = random_matrix(&mut rng, 3, 4);
            for (name, op) in &smooth {
                let err = finite_difference_check(|g, x| { let y = op(g, x)?; weighted_sum(g, y, trial) }, &x, 1e-5).unwrap();
                assert!(err < 1e-6, "{name}: {err}");
            }
            for (name, op) in &kinked {
                let err = finite_difference_check(|g, x| { let y = op(g, x)?; weighted_sum(g, y, trial) }, &x, 1e-5).unwrap();
                assert!(err < 1e-4, "{name}: {err}");
            }
            let a = random_matrix(&mut rng, 3, 4);
            let b = random_matrix(&mut rng, 4, 2);
            let same = random_matrix(&mut rng, 3, 4);
            let bias = Tensor::vector((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
            type BinaryCase = (&'static str, Tensor, fn(&mut Graph, Var, Var) -> crate::Result<Var>);
            let binaries: Vec<BinaryCase> = vec![
                ("matmul", b.clone(), |g, a, b| g.matmul(a, b)),
                ("add", same.clone(), |g, a, b| g.add(a, b)),
                ("sub", same.clone(), |g, a, b| g.sub(a, b)),
                ("mul", same.clone(), |g, a, b| g.mul(a, b)),
                ("add_bias", bias.clone(), |g, a, b| g.add(a, b)),
                ("mul_bias", bias.clone(), |g, a, b| g.mul(a, b)),
                ("concat0", same.clone(), |g, a, b| g.concat(&[a, b], 0)),
                ("concat1", same.clone(), |g, a, b| g.concat(&[a, b, a], 1)),
            ];
            for (name, rhs, op) in &binaries {
                let errs = finite_difference_check_many(
                    |g, v| {
                        let y = op(g, v[0], v[1])?;
                        weighted_sum(g, y, trial)
                    },
                    &[a.clone(), rhs.clone()],
                    1e-5,
                )
                .unwrap();
                for e in errs {
                    assert!(e < 1e-6, "{name}: {e}");
                }
            }
        }
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut g = Graph::new();
            let a = g.leaf(random_matrix(&mut rng, 4, 3), true);
            let b = g.leaf(random_matrix(&mut rng, 3, 5), true);
            let c = g.matmul(a, b).unwrap();
            let s = g.softmax(c).unwrap();
            let t = g.tanh(s);
            let l = g.sum(t);
            g.backward(l).unwrap();
            (g.grad(a).unwrap().to_vec(), g.grad(b).unwrap().to_vec())
        };
        let (a1, b1) = run();
        let (a2, b2) = run();
        assert!(a1.iter().zip(&a2).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(b1.iter().zip(&b2).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn normalize_rows_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = Graph::new();
        let x = g.constant(random_matrix(&mut rng, 6, 8));
        let y = g.normalize_rows(x).unwrap();
        for r in 0..6 {
            let row = g.value(y).row(r);
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn injected_fault_is_visible_to_fd() {
        let x = Tensor::vector(vec![0.3, -0.2]);
        let mut g = Graph::new();
        g.inject_fault(Primitive::Tanh);
        let v = g.leaf(x.clone(), true);
        let t = g.tanh(v);
        let l = g.sum(t);
        g.backward(l).unwrap();
        let expected: Vec<f64> = x.data().iter().map(|x| 1.0 - x.tanh().powi(2)).collect();
        let got = g.grad(v).unwrap();
        assert!((got[0] - expected[0]).abs() > 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn softmax_rows_are_distributions(vals in proptest::collection::vec(-50.0f64..50.0, 1..24), d in 1usize..6) {
            let rows = vals.len() / d;
            proptest::prop_assume!(rows > 0);
            let t = Tensor::new(vec![rows, d], vals[..rows * d].to_vec()).unwrap();
            let mut g = Graph::new();
            let x = g.constant(t);
            let y = g.softmax(x).unwrap();
            for r in 0..rows {
                let row = g.value(y).row(r);
                proptest::prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                proptest::prop_assert!(row.iter().all(|&p| p > 0.0));
            }
        }
    }
}
