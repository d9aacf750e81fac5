use mil_audit::data::{Bag, ProblemKind};
use mil_audit::ensemble::{
    average_attention, bad_ensemble_curve, build_ensembles, ensemble_iauc, CurveSettings,
    EnsembleSpec, Strategy,
};
use mil_audit::eval::iauc_of_run;
use mil_audit::model::{AttentionProfile, RunRecord};
use mil_audit::nn::Matrix;
use mil_audit::rng::rng_from;
use proptest::prelude::*;
use rand::Rng;

fn bags(n: usize, m: usize, seed: u64) -> Vec<Bag> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            let mut labels: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 1;
            labels[1] = 0;
            Bag { instances: Matrix::zeros(m, 1), instance_labels: labels, label: 1 }
        })
        .collect()
}

fn random_profile(m: usize, rng: &mut impl Rng) -> AttentionProfile {
    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    AttentionProfile::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

fn key_aligned(bag: &Bag) -> AttentionProfile {
    let k = bag.instance_labels.iter().filter(|&&l| l == 1).count() as f64;
    AttentionProfile::new(bag.instance_labels.iter().map(|&l| if l == 1 { 1.0 / k } else { 0.0 }).collect()).unwrap()
}

fn run(id: &str, seed: u64, attention: Vec<AttentionProfile>) -> RunRecord {
    RunRecord {
        config_id: id.into(),
        seed,
        validation_accuracy: 1.0,
        test_accuracy: 1.0,
        validation_curve: vec![],
        final_train_loss: 0.0,
        test_iauc: None,
        training_diverged: false,
        test_attention: attention,
    }
}

fn pair_count(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut w, mut n) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                n += 1.0;
                w += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
            }
        }
    }
    w / n
}

proptest! {
    #[test]
    fn average_is_the_elementwise_mean(m in 1usize..20, k in 1usize..8, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let profiles: Vec<AttentionProfile> = (0..k).map(|_| random_profile(m, &mut rng)).collect();
        let refs: Vec<&AttentionProfile> = profiles.iter().collect();
        let avg = average_attention(&refs).unwrap();
        for i in 0..m {
            let direct = profiles.iter().map(|p| p.weights()[i]).sum::<f64>() / k as f64;
            prop_assert!((avg.weights()[i] - direct).abs() <= 1e-15);
        }
        prop_assert!((avg.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        let rev: Vec<&AttentionProfile> = profiles.iter().rev().collect();
        let other = average_attention(&rev).unwrap();
        for (a, b) in avg.weights().iter().zip(other.weights()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn single_member_and_duplicated_ensembles(seed in any::<u64>()) {
        let test = bags(6, 8, seed);
        let mut rng = rng_from(seed ^ 1);
        let runs: Vec<RunRecord> = (0..3)
            .map(|s| run("c", s, test.iter().map(|b| random_profile(b.len(), &mut rng)).collect()))
            .collect();
        let pool: Vec<&RunRecord> = runs.iter().collect();
        for (i, r) in runs.iter().enumerate() {
            let single = EnsembleSpec { members: vec![i], strategy: Strategy::SingleConfig };
            prop_assert_eq!(
                ensemble_iauc(&single, &pool, &test, ProblemKind::Mil).unwrap(),
                iauc_of_run(&r.test_attention, &test, ProblemKind::Mil).unwrap()
            );
        }
        let pair = EnsembleSpec { members: vec![0, 2], strategy: Strategy::MultiConfig };
        let doubled = EnsembleSpec { members: vec![0, 0, 2, 2], strategy: Strategy::MultiConfig };
        let a = ensemble_iauc(&pair, &pool, &test, ProblemKind::Mil).unwrap();
        let b = ensemble_iauc(&doubled, &pool, &test, ProblemKind::Mil).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn three_member_hand_case() {
    let test = vec![
        Bag { instances: Matrix::zeros(4, 1), instance_labels: vec![1, 0, 0, 1], label: 1 },
        Bag { instances: Matrix::zeros(3, 1), instance_labels: vec![0, 1, 0], label: 1 },
    ];
    let p = |w: &[f64]| AttentionProfile::new(w.to_vec()).unwrap();
    let runs = [
        run("a", 0, vec![p(&[0.1, 0.2, 0.3, 0.4]), p(&[0.5, 0.25, 0.25])]),
        run("b", 0, vec![p(&[0.4, 0.3, 0.2, 0.1]), p(&[0.2, 0.6, 0.2])]),
        run("c", 0, vec![p(&[0.25, 0.25, 0.25, 0.25]), p(&[0.1, 0.1, 0.8])]),
    ];
    let pool: Vec<&RunRecord> = runs.iter().collect();
    let e = EnsembleSpec { members: vec![0, 1, 2], strategy: Strategy::MultiConfig };
    let mut expect = 0.0;
    for (b, bag) in test.iter().enumerate() {
        let avg: Vec<f64> = (0..bag.len())
            .map(|i| runs.iter().map(|r| r.test_attention[b].weights()[i]).sum::<f64>() / 3.0)
            .collect();
        let keys: Vec<bool> = bag.instance_labels.iter().map(|&l| l == 1).collect();
        expect += pair_count(&avg, &keys) / 2.0;
    }
    let got = ensemble_iauc(&e, &pool, &test, ProblemKind::Mil).unwrap();
    assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
}

#[test]
fn identical_members_keep_the_run_iauc() {
    let test = bags(5, 10, 3);
    let mut rng = rng_from(4);
    let attention: Vec<AttentionProfile> = test.iter().map(|b| random_profile(b.len(), &mut rng)).collect();
    let runs: Vec<RunRecord> = (0..4).map(|s| run("c", s, attention.clone())).collect();
    let pool: Vec<&RunRecord> = runs.iter().collect();
    let e = EnsembleSpec { members: vec![0, 1, 2, 3], strategy: Strategy::SingleConfig };
    let single = iauc_of_run(&attention, &test, ProblemKind::Mil).unwrap();
    assert!((ensemble_iauc(&e, &pool, &test, ProblemKind::Mil).unwrap() - single).abs() < 1e-12);
}

#[test]
fn ensembles_sample_distinct_members() {
    let runs: Vec<RunRecord> = (0..100).map(|s| run("c", s, vec![])).collect();
    let pool: Vec<&RunRecord> = runs.iter().collect();
    let a = build_ensembles(&pool, Strategy::SingleConfig, 20, 30, &mut rng_from(1)).unwrap();
    assert_eq!(a.len(), 30);
    for e in &a {
        let mut m = e.members.clone();
        m.sort_unstable();
        m.dedup();
        assert_eq!(m.len(), 20);
    }
    assert_eq!(a, build_ensembles(&pool, Strategy::SingleConfig, 20, 30, &mut rng_from(1)).unwrap());
    assert_ne!(a, build_ensembles(&pool, Strategy::SingleConfig, 20, 30, &mut rng_from(2)).unwrap());
}

#[test]
fn averaging_repairs_a_mostly_good_pool() {
    let test = bags(10, 12, 8);
    let runs: Vec<RunRecord> = (0..100)
        .map(|s| {
            let attention = if s % 10 < 3 {
                test.iter().map(|b| AttentionProfile::uniform(b.len())).collect()
            } else {
                test.iter().map(key_aligned).collect()
            };
            run(if s % 2 == 0 { "x" } else { "y" }, s, attention)
        })
        .collect();
    let pool: Vec<&RunRecord> = runs.iter().collect();
    let settings = CurveSettings { sizes: vec![1, 20], n_ensembles: 30, repetitions: 5, seed: 6 };
    let multi = bad_ensemble_curve(&pool, Strategy::MultiConfig, &settings, &test, ProblemKind::Mil).unwrap();
    let (n1, n20) = (multi.points[0].bad_fraction, multi.points[1].bad_fraction);
    assert!(n1 > 0.1, "N=1 bad fraction {n1}");
    assert!(n20 < n1, "N=20 {n20} vs N=1 {n1}");
    assert!(multi.points[0].ci_low <= n1 && n1 <= multi.points[0].ci_high);
    let single = bad_ensemble_curve(&pool, Strategy::SingleConfig, &settings, &test, ProblemKind::Mil).unwrap();
    assert_eq!(single.per_config.len(), 2);
    assert!(single.points[1].bad_fraction < single.points[0].bad_fraction);
}
