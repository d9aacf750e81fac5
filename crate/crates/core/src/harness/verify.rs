//! Self-tests run by the `verify` command: analytic gradients against
//! finite differences, permutation invariance, and the metric oracles.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::ensemble::average_attention;
use crate::eval::auroc;
use crate::model::{AttentionProfile, MilModel, ModelConfig};
use crate::nn::{gradient_check_detailed, Activation, Matrix};
use crate::rng::{derived_rng, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// (featurizer depth, classifier depth) pairs occurring in any search grid.
pub fn grid_architectures() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for fd in 0..=3 {
        for cd in 1..=3 {
            out.push((fd, cd));
        }
    }
    out
}

fn toy_config(input: usize, k: usize, l: usize, fd: usize, cd: usize) -> ModelConfig {
    ModelConfig {
        input_dim: input,
        embed_dim: k,
        attention_dim: l,
        featurizer_depth: fd,
        classifier_depth: cd,
        learning_rate: 0.01,
        epochs: 1,
        batch_size: 2,
        weight_decay: 0.0,
        hidden_activation: Activation::Relu,
    }
    .normalized()
}

fn random_bag(m: usize, d: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .expect("sized by construction")
}

fn random_model(config: &ModelConfig, rng: &mut Rng) -> MilModel {
    let mut model = MilModel::init(config, rng.random()).expect("valid toy config");
    let flat: Vec<f64> = model.to_flat().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    model.set_flat(&flat).expect("same length");
    model
}

/// Largest relative error between analytic and central-difference
/// gradients over every grid architecture with attention sizes 1, 2, 4 and
/// hidden sizes 2, 3.
pub fn gradient_max_error(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for (fd, cd) in grid_architectures() {
        for l in [1, 2, 4] {
            for k in [2, 3] {
                let mut rng = derived_rng(seed, &[fd as u64, cd as u64, l as u64, k as u64]);
                let config = toy_config(3, k, l, fd, cd);
                let model = random_model(&config, &mut rng);
                let bags = [random_bag(4, 3, &mut rng), random_bag(3, 3, &mut rng)];
                let refs: Vec<&Matrix> = bags.iter().collect();
                let labels = [1, 0];
                let check = gradient_check_detailed(
                    |p| {
                        let mut m = model.clone();
                        m.set_flat(p).expect("same length");
                        let (loss, g) = m.loss_and_grads(&refs, &labels).expect("finite toy loss");
                        (loss, g.to_flat())
                    },
                    &model.to_flat(),
                    1e-5,
                );
                worst = worst.max(check.max_relative_error);
            }
        }
    }
    worst
}

/// Over `n` random (model, bag, permutation) triples: the largest logit
/// difference and whether every attention vector was permuted exactly.
pub fn permutation_check(n: usize, seed: u64) -> (f64, bool) {
    let archs = grid_architectures();
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for t in 0..n {
        let mut rng = derived_rng(seed, &[t as u64]);
        let (fd, cd) = archs[t % archs.len()];
        let config = toy_config(4, rng.random_range(2..6), rng.random_range(1..5), fd, cd);
        let model = random_model(&config, &mut rng);
        let m = rng.random_range(1..20);
        let bag = random_bag(m, 4, &mut rng);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let (la, aa) = model.predict_bag(&bag).expect("valid bag");
        let (lb, ab) = model.predict_bag(&bag.select_rows(&order)).expect("valid bag");
        worst = worst.max((la[0] - lb[0]).abs()).max((la[1] - lb[1]).abs());
        exact &= order
            .iter()
            .enumerate()
            .all(|(i, &o)| ab.weights()[i].to_bits() == aa.weights()[o].to_bits());
    }
    (worst, exact)
}

/// Brute-force AUROC: fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
pub fn pair_count_auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Number of random tied score sets on which `auroc` disagrees with pair
/// counting.
pub fn auroc_mismatches(n: usize, seed: u64) -> usize {
    let mut bad = 0;
    for t in 0..n {
        let mut rng = derived_rng(seed, &[t as u64]);
        let len = rng.random_range(2..16);
        let scores: Vec<f64> = (0..len).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
        let labels: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect();
        let ok = match (auroc(&scores, &labels), pair_count_auroc(&scores, &labels)) {
            (Ok(a), Some(b)) => a == b,
            (Err(_), None) => true,
            _ => false,
        };
        bad += usize::from(!ok);
    }
    bad
}

/// Largest |Σ − 1| of averaged random attention profiles.
pub fn average_sum_error(n: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let mut rng = derived_rng(seed, &[t as u64]);
        let m = rng.random_range(1..30);
        let k = rng.random_range(1..8);
        let profiles: Vec<AttentionProfile> = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                AttentionProfile::new(raw.iter().map(|v| v / s).collect()).expect("normalised")
            })
            .collect();
        let refs: Vec<&AttentionProfile> = profiles.iter().collect();
        let avg = average_attention(&refs).expect("equal lengths");
        worst = worst.max((avg.weights().iter().sum::<f64>() - 1.0).abs());
    }
    worst
}

pub fn run_self_tests() -> Vec<SelfTest> {
    let grad = gradient_max_error(1);
    let (logit_diff, exact) = permutation_check(1000, 2);
    let auroc_bad = auroc_mismatches(1000, 3);
    let sum_err = average_sum_error(1000, 4);
    vec![
        SelfTest {
            name: "gradients",
            passed: grad <= 1e-4,
            detail: format!("max relative error {grad:.3e} over {} architectures", grid_architectures().len()),
        },
        SelfTest {
            name: "permutation-invariance",
            passed: logit_diff <= 1e-9 && exact,
            detail: format!("max logit difference {logit_diff:.3e}, attention exactly permuted: {exact}"),
        },
        SelfTest {
            name: "auroc-oracle",
            passed: auroc_bad == 0,
            detail: format!("{auroc_bad} of 1000 random tied sets disagree with pair counting"),
        },
        SelfTest {
            name: "average-attention",
            passed: sum_err <= 1e-6,
            detail: format!("max |sum - 1| {sum_err:.3e}"),
        },
    ]
}
