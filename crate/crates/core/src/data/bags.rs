use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::labels::{bag_label_of, sample_presence_pattern, Presence, ProblemKind};
use super::pool::InstanceSource;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::derived_rng;

/// One bag. `instance_labels` are ground truth for auditing only; training
/// reads `instances` and `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub instances: Matrix,
    pub instance_labels: Vec<u8>,
    pub label: u8,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.instance_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_labels.is_empty()
    }

    pub fn presence(&self) -> Presence {
        Presence::of(&self.instance_labels)
    }

    pub fn population_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for &y in &self.instance_labels {
            c[y as usize] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub bag_size: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 500,
            validation: 100,
            test: 100,
            bag_size: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: ProblemKind,
    pub train: Vec<Bag>,
    pub validation: Vec<Bag>,
    pub test: Vec<Bag>,
}

impl Dataset {
    pub fn input_dim(&self) -> usize {
        self.train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .next()
            .map_or(0, |b| b.instances.cols())
    }
}

fn draw_population<R: Rng + ?Sized>(cumulative: &[f64; 3], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(2) as u8
}

/// Assembles one bag whose populations are restricted to `pattern`.
///
/// Instance populations are i.i.d. from the problem's mixing probabilities
/// renormalised over the present populations; the draw is repeated if the
/// realised label differs from the pattern's label.
pub fn compose_bag<R: Rng + ?Sized>(
    pattern: Presence,
    problem: ProblemKind,
    bag_size: usize,
    source: InstanceSource<'_>,
    rng: &mut R,
) -> Result<Bag> {
    if pattern.is_empty() {
        return Err(Error::Input("presence pattern is empty".into()));
    }
    if bag_size == 0 {
        return Err(Error::Config("bag size must be positive".into()));
    }
    let mix = problem.mixing_probabilities();
    let mut weights = [0.0; 3];
    for p in 0..3u8 {
        if pattern.contains(p) {
            weights[p as usize] = mix[p as usize];
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Input(format!("pattern {pattern} has no mass under {problem}")));
    }
    let mut cumulative = [0.0; 3];
    let mut acc = 0.0;
    for p in 0..3 {
        acc += weights[p] / total;
        cumulative[p] = if weights[p] > 0.0 { acc } else { f64::NEG_INFINITY };
    }
    // last present population absorbs rounding
    if let Some(last) = (0..3).rev().find(|&p| weights[p] > 0.0) {
        cumulative[last] = f64::INFINITY;
    }
    if let InstanceSource::Pool(pool) = source {
        for p in pattern.populations() {
            if pool.population(p).rows() == 0 {
                return Err(Error::Data(format!("population {p} of the pool is empty")));
            }
        }
    }

    let target = pattern.label(problem);
    let labels = loop {
        let labels: Vec<u8> = (0..bag_size).map(|_| draw_population(&cumulative, rng)).collect();
        if bag_label_of(&labels, problem)? == target {
            break labels;
        }
    };

    let dim = source.dim();
    let mut data = Vec::with_capacity(bag_size * dim);
    match source {
        InstanceSource::Gaussian(spec) => {
            for &y in &labels {
                for &mu in &spec.means[y as usize] {
                    let n: f64 = StandardNormal.sample(rng);
                    data.push(mu + spec.std * n);
                }
            }
        }
        InstanceSource::Pool(pool) => {
            for &y in &labels {
                let src = pool.population(y);
                let idx = rng.random_range(0..src.rows());
                data.extend_from_slice(src.row(idx));
            }
        }
    }
    Ok(Bag {
        instances: Matrix::from_vec(bag_size, dim, data)?,
        instance_labels: labels,
        label: target,
    })
}

const DATA_STREAM: u64 = 0xDA7A;
const LABEL_ORDER: u64 = u64::MAX;

/// Generates the train/validation/test splits. Each split has exactly
/// `round(n * balance)` positive bags; bag `i` of split `s` is drawn from its
/// own stream `mix(master_seed, DATA, s, i)`, so the result is a pure
/// function of the arguments.
pub fn generate_dataset(
    source: InstanceSource<'_>,
    problem: ProblemKind,
    sizes: SplitSizes,
    balance: f64,
    master_seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&balance) {
        return Err(Error::Config(format!("balance must lie in [0, 1], got {balance}")));
    }
    let split = |index: u64, n: usize| -> Result<Vec<Bag>> {
        let positives = (n as f64 * balance).round() as usize;
        let mut targets: Vec<u8> = (0..n).map(|i| (i < positives) as u8).collect();
        targets.shuffle(&mut derived_rng(master_seed, &[DATA_STREAM, index, LABEL_ORDER]));
        targets
            .iter()
            .enumerate()
            .map(|(i, &target)| {
                let mut rng = derived_rng(master_seed, &[DATA_STREAM, index, i as u64]);
                let pattern = sample_presence_pattern(problem, target, &mut rng);
                compose_bag(pattern, problem, sizes.bag_size, source, &mut rng)
            })
            .collect()
    };
    Ok(Dataset {
        problem,
        train: split(0, sizes.train)?,
        validation: split(1, sizes.validation)?,
        test: split(2, sizes.test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GaussianSpec, PopulationPool};
    use crate::rng::rng_from;

    #[test]
    fn negative_only_pattern() {
        let g = GaussianSpec::default();
        let mut rng = rng_from(1);
        for problem in ProblemKind::ALL {
            let bag =
                compose_bag(Presence::of(&[0]), problem, 50, InstanceSource::Gaussian(&g), &mut rng)
                    .unwrap();
            assert!(bag.instance_labels.iter().all(|&y| y == 0));
            assert_eq!(bag.label, 0);
        }
    }

    #[test]
    fn gaussian_mil_positive_bag_statistics() {
        let g = GaussianSpec::default();
        let mut rng = rng_from(2);
        let bag = compose_bag(
            Presence::of(&[0, 1]),
            ProblemKind::Mil,
            250,
            InstanceSource::Gaussian(&g),
            &mut rng,
        )
        .unwrap();
        let counts = bag.population_counts();
        let frac = counts[1] as f64 / 250.0;
        assert!((frac - 0.5).abs() <= 0.1, "fraction {frac}");
        for d in 0..4 {
            let mean: f64 = (0..250)
                .filter(|&m| bag.instance_labels[m] == 1)
                .map(|m| bag.instances.get(m, d))
                .sum::<f64>()
                / counts[1] as f64;
            assert!((mean - 1.0).abs() <= 0.2, "dim {d} mean {mean}");
        }
    }

    #[test]
    fn and_positive_population_counts() {
        let g = GaussianSpec::default();
        let mut rng = rng_from(3);
        let bag = compose_bag(
            Presence::of(&[0, 1, 2]),
            ProblemKind::And,
            250,
            InstanceSource::Gaussian(&g),
            &mut rng,
        )
        .unwrap();
        let c = bag.population_counts();
        for (got, want) in c.iter().zip([100.0, 75.0, 75.0]) {
            assert!((*got as f64 - want).abs() <= 25.0, "{c:?}");
        }
    }

    #[test]
    fn empty_pool_population_is_a_data_error() {
        let pool = PopulationPool::from_rows(1, vec![(0, vec![0.0]), (1, vec![1.0])]).unwrap();
        let mut rng = rng_from(4);
        let err = compose_bag(
            Presence::of(&[0, 2]),
            ProblemKind::Xor,
            10,
            InstanceSource::Pool(&pool),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn dataset_balance_and_determinism() {
        let g = GaussianSpec::default();
        let sizes = SplitSizes {
            train: 100,
            validation: 10,
            test: 11,
            bag_size: 20,
        };
        let a = generate_dataset(InstanceSource::Gaussian(&g), ProblemKind::Xor, sizes, 0.5, 9)
            .unwrap();
        let b = generate_dataset(InstanceSource::Gaussian(&g), ProblemKind::Xor, sizes, 0.5, 9)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.iter().filter(|b| b.label == 1).count(), 50);
        assert_eq!(a.test.len(), 11);
        for bag in a.train.iter().chain(&a.validation).chain(&a.test) {
            assert_eq!(bag_label_of(&bag.instance_labels, ProblemKind::Xor).unwrap(), bag.label);
        }
        let c = generate_dataset(InstanceSource::Gaussian(&g), ProblemKind::Xor, sizes, 0.5, 10)
            .unwrap();
        assert_ne!(a, c);
    }
}
