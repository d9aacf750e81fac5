use mil_audit::nn::{
    gradient_check, softmax, softmax_cross_entropy, Activation, AdamConfig, AdamState, Matrix, Mlp,
};
use mil_audit::rng::rng_from;
use proptest::prelude::*;

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
    }
}

/// Per-element loop forward pass.
fn naive_forward(net: &Mlp, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = net.layers().len();
    input
        .iter()
        .map(|row| {
            let mut x = row.clone();
            for (li, layer) in net.layers().iter().enumerate() {
                let a = if li + 1 == n { net.output_activation() } else { net.hidden_activation() };
                let (out, inp) = layer.weight.shape();
                let mut y = vec![0.0; out];
                for o in 0..out {
                    let mut s = layer.bias[o];
                    for i in 0..inp {
                        s += layer.weight.get(o, i) * x[i];
                    }
                    y[o] = act(a, s);
                }
                x = y;
            }
            x
        })
        .collect()
}

fn widths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_loop_oracle(dims in widths(), seed in any::<u64>(), rows in 1usize..5, tanh in any::<bool>()) {
        let hidden = if tanh { Activation::Tanh } else { Activation::Relu };
        let mut rng = rng_from(seed);
        let net = Mlp::glorot(&dims, hidden, Activation::Identity, &mut rng).unwrap();
        let input: Vec<Vec<f64>> = (0..rows)
            .map(|r| (0..dims[0]).map(|c| ((seed % 97) as f64 * 0.01 + r as f64 - c as f64 * 0.7).sin()).collect())
            .collect();
        let out = net.predict(&Matrix::from_rows(&input).unwrap()).unwrap();
        let expect = naive_forward(&net, &input);
        for (r, row) in expect.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let got = out.get(r, c);
                prop_assert!((got - v).abs() <= 1e-12 * v.abs().max(1.0), "{got} vs {v}");
            }
        }
    }

    #[test]
    fn mlp_gradients_match_finite_differences(dims in widths(), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let net = Mlp::glorot(&dims, Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let input = Matrix::from_vec(3, dims[0], (0..3 * dims[0]).map(|i| (i as f64 * 0.37).cos()).collect()).unwrap();
        let flat: Vec<f64> = net.params().concat();
        let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
        let err = gradient_check(
            |p| {
                let mut m = net.clone();
                let mut off = 0;
                for (dst, &len) in m.params_mut().into_iter().zip(&sizes) {
                    dst.copy_from_slice(&p[off..off + len]);
                    off += len;
                }
                let (out, cache) = m.forward(&input).unwrap();
                // f = Σ out²/2, so df/dout = out
                let f = out.data().iter().map(|v| v * v / 2.0).sum();
                let (g, _) = m.backward(&cache, &out).unwrap();
                (f, g.slices().concat())
            },
            &flat,
            1e-5,
        );
        prop_assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn cross_entropy_matches_formula(logits in prop::collection::vec(-30.0f64..30.0, 2..6), label_seed in any::<usize>()) {
        let k = logits.len();
        let label = label_seed % k;
        let (loss, grad) = softmax_cross_entropy(&Matrix::from_vec(1, k, logits.clone()).unwrap(), &[label]).unwrap();
        // log-sum-exp shifted by the label logit rather than the max
        let shifted: f64 = logits.iter().map(|l| (l - logits[label]).exp()).sum();
        let expect = shifted.ln();
        prop_assert!((loss - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        for (j, &l) in logits.iter().enumerate() {
            let p = l.exp() / z;
            let want = p - if j == label { 1.0 } else { 0.0 };
            prop_assert!((grad.get(0, j) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_distribution(scores in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let p = softmax(&scores);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = scores.iter().rev().copied().collect();
        let q = softmax(&rev);
        for (a, b) in p.iter().zip(q.iter().rev()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn adam_matches_scalar_loop(x0 in -5.0f64..5.0, lr in 0.0001f64..0.1, wd in 0.0f64..0.01) {
        let mut state = AdamState::new(AdamConfig::new(lr, wd), &[1]).unwrap();
        let mut x = [x0];
        let (mut p, mut m, mut v) = (x0, 0.0f64, 0.0f64);
        for t in 1..=3 {
            // f = (x - 1)², gradient 2(x - 1)
            let g = [2.0 * (x[0] - 1.0)];
            state.step(&mut [&mut x[..]], &[&g[..]]).unwrap();
            let gi = 2.0 * (p - 1.0) + wd * p;
            m = 0.9 * m + 0.1 * gi;
            v = 0.999 * v + 0.001 * gi * gi;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= lr * mh / (vh.sqrt() + 1e-8);
            prop_assert!((x[0] - p).abs() <= 1e-12, "step {t}: {} vs {p}", x[0]);
        }
    }

    #[test]
    fn matmul_agrees_with_transpose(r in 1usize..6, k in 1usize..6, c in 1usize..6, seed in any::<u64>()) {
        let f = |i: usize| ((seed % 1000) as f64 + i as f64 * 1.3).sin();
        let a = Matrix::from_vec(r, k, (0..r * k).map(f).collect()).unwrap();
        let b = Matrix::from_vec(c, k, (0..c * k).map(|i| f(i + 77)).collect()).unwrap();
        let x = a.matmul_transposed(&b).unwrap();
        let y = a.matmul(&b.transpose()).unwrap();
        for (p, q) in x.data().iter().zip(y.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_logits_examples() {
    let (loss, grad) = softmax_cross_entropy(&Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap(), &[0]).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(grad.data(), &[-0.5, 0.5]);
    let (_, grad) = softmax_cross_entropy(&Matrix::from_vec(2, 2, vec![0.0; 4]).unwrap(), &[0, 0]).unwrap();
    assert_eq!(grad.row(0), &[-0.25, 0.25]);
}
