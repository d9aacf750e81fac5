use mil_audit::data::{generate_dataset, GaussianSpec, InstanceSource, ProblemKind, SplitSizes};
use mil_audit::model::{evaluate, train, MilModel, ModelConfig};
use mil_audit::nn::{Activation, Matrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn config(k: usize, l: usize, fd: usize, cd: usize) -> ModelConfig {
    ModelConfig {
        input_dim: 4,
        embed_dim: k,
        attention_dim: l,
        featurizer_depth: fd,
        classifier_depth: cd,
        learning_rate: 0.01,
        epochs: 5,
        batch_size: 10,
        weight_decay: 1e-4,
        hidden_activation: Activation::Relu,
    }
    .normalized()
}

fn bag(m: usize, seed: u64) -> Matrix {
    Matrix::from_vec(m, 4, (0..m * 4).map(|i| ((i as u64 * 31 + seed) as f64 * 0.13).sin() * 2.0).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permutation_invariance(k in 1usize..6, l in 1usize..5, fd in 0usize..4, cd in 1usize..4,
                              m in 1usize..15, seed in any::<u64>(), shuffle in any::<u64>()) {
        let model = MilModel::init(&config(k, l, fd, cd), seed).unwrap();
        let x = bag(m, seed);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut mil_audit::rng::rng_from(shuffle));
        let (a_logits, a) = model.predict_bag(&x).unwrap();
        let (b_logits, b) = model.predict_bag(&x.select_rows(&order)).unwrap();
        for i in 0..2 {
            prop_assert!((a_logits[i] - b_logits[i]).abs() <= 1e-9);
        }
        for (i, &o) in order.iter().enumerate() {
            prop_assert_eq!(b.weights()[i].to_bits(), a.weights()[o].to_bits());
        }
        prop_assert!((a.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn permuted_batch_has_equal_loss(seed in any::<u64>(), shuffle in any::<u64>()) {
        let model = MilModel::init(&config(4, 2, 1, 2), seed).unwrap();
        let bags: Vec<Matrix> = (0..4).map(|i| bag(6, seed.wrapping_add(i))).collect();
        let mut rng = mil_audit::rng::rng_from(shuffle);
        let permuted: Vec<Matrix> = bags
            .iter()
            .map(|b| {
                let mut o: Vec<usize> = (0..b.rows()).collect();
                o.shuffle(&mut rng);
                b.select_rows(&o)
            })
            .collect();
        let labels = [0, 1, 1, 0];
        let (l1, _) = model.loss_and_grads(&bags.iter().collect::<Vec<_>>(), &labels).unwrap();
        let (l2, _) = model.loss_and_grads(&permuted.iter().collect::<Vec<_>>(), &labels).unwrap();
        prop_assert!((l1 - l2).abs() <= 1e-9);
    }
}

fn small_data(problem: ProblemKind, train: usize) -> mil_audit::data::Dataset {
    let sizes = SplitSizes { train, validation: 100, test: 40, bag_size: 50 };
    generate_dataset(InstanceSource::Gaussian(&GaussianSpec::default()), problem, sizes, 0.5, 11).unwrap()
}

#[test]
fn training_is_deterministic() {
    let data = small_data(ProblemKind::Mil, 40);
    let c = config(4, 2, 1, 1);
    let (m1, r1) = train(&c, "c", 5, &data).unwrap();
    let (m2, r2) = train(&c, "c", 5, &data).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(r1, r2);
    assert_eq!(r1.test_attention.len(), data.test.len());
    assert_eq!(r1.validation_curve.len(), 5);
}

#[test]
fn zero_epochs_is_chance_level() {
    let data = small_data(ProblemKind::Mil, 20);
    let mut c = config(4, 2, 1, 1);
    c.epochs = 0;
    let accs: Vec<f64> = (0..10)
        .map(|s| train(&c, "c", s, &data).unwrap().1.validation_accuracy)
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.15, "mean untrained accuracy {mean}");
    let model = MilModel::init(&c, 0).unwrap();
    let ev = evaluate(&model, &data.validation).unwrap();
    assert_eq!(ev.predictions.len(), data.validation.len());
}

#[test]
fn default_split_reaches_high_validation_accuracy() {
    let sizes = SplitSizes::default();
    let data = generate_dataset(
        InstanceSource::Gaussian(&GaussianSpec::default()),
        ProblemKind::Mil,
        sizes,
        0.5,
        1,
    )
    .unwrap();
    let mut c = config(8, 4, 1, 1);
    c.epochs = 100;
    c.batch_size = 100;
    let (_, record) = train(&c, "e100-lr0.01-k8-l4-fd1-cd1", 1, &data).unwrap();
    assert!(record.validation_accuracy >= 0.95, "{}", record.validation_accuracy);
    assert!(!record.training_diverged);
}
