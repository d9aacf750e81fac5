//! Attention-averaging ensembles.
//!
//! An ensemble's attention for a bag is the element-wise mean of its
//! members' attention for that bag, which is again a distribution. Ensemble
//! explanation quality is the IAUC of the averaged attention.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, ProblemKind};
use crate::error::{Error, Result};
use crate::eval::{iauc_of_run, BAD_IAUC};
use crate::model::{AttentionProfile, RunRecord};
use crate::rng::{derived_rng, fnv1a};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Members are repetitions of one configuration.
    SingleConfig,
    /// Members are drawn from the pooled runs of several configurations.
    MultiConfig,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::SingleConfig => "single",
            Strategy::MultiConfig => "multi",
        }
    }
}

/// Members are indices into the run pool the ensemble was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<usize>,
    pub strategy: Strategy,
}

impl EnsembleSpec {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

pub fn average_attention(profiles: &[&AttentionProfile]) -> Result<AttentionProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::Input("cannot average zero attention profiles".into()))?;
    let mut mean = vec![0.0; first.len()];
    for p in profiles {
        if p.len() != mean.len() {
            return Err(Error::Dimension {
                context: "average_attention",
                expected: mean.len(),
                actual: p.len(),
            });
        }
        for (m, w) in mean.iter_mut().zip(p.weights()) {
            *m += w;
        }
    }
    let n = profiles.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(AttentionProfile::new_unchecked(mean))
}

/// Samples `count` ensembles of `size` distinct runs each. Runs are reused
/// across ensembles but never within one. For `SingleConfig` every run in
/// `pool` must share one configuration.
pub fn build_ensembles<R: Rng + ?Sized>(
    pool: &[&RunRecord],
    strategy: Strategy,
    size: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<EnsembleSpec>> {
    if size == 0 {
        return Err(Error::Sizing("ensemble size must be positive".into()));
    }
    if size > pool.len() {
        return Err(Error::Sizing(format!(
            "cannot draw {size} distinct members from a pool of {}",
            pool.len()
        )));
    }
    if strategy == Strategy::SingleConfig {
        if let Some(first) = pool.first() {
            if pool.iter().any(|r| r.config_id != first.config_id) {
                return Err(Error::Input(
                    "single-configuration ensembles need runs of one configuration".into(),
                ));
            }
        }
    }
    Ok((0..count)
        .map(|_| {
            let mut members = sample(rng, pool.len(), size).into_vec();
            members.sort_unstable();
            EnsembleSpec { members, strategy }
        })
        .collect())
}

/// Per-bag averaged attention of the selected members.
pub fn ensemble_attention(
    ensemble: &EnsembleSpec,
    pool: &[&RunRecord],
    n_bags: usize,
) -> Result<Vec<AttentionProfile>> {
    let members: Vec<&RunRecord> = ensemble
        .members
        .iter()
        .map(|&i| {
            pool.get(i)
                .copied()
                .ok_or_else(|| Error::Data(format!("ensemble member {i} is not in the pool")))
        })
        .collect::<Result<_>>()?;
    for m in &members {
        if m.test_attention.len() != n_bags {
            return Err(Error::Data(format!(
                "run {} seed {} stores attention for {} of {n_bags} test bags",
                m.config_id,
                m.seed,
                m.test_attention.len()
            )));
        }
    }
    (0..n_bags)
        .map(|b| {
            let profiles: Vec<&AttentionProfile> =
                members.iter().map(|m| &m.test_attention[b]).collect();
            average_attention(&profiles)
        })
        .collect()
}

pub fn ensemble_iauc(
    ensemble: &EnsembleSpec,
    pool: &[&RunRecord],
    test_bags: &[Bag],
    problem: ProblemKind,
) -> Result<f64> {
    let attention = ensemble_attention(ensemble, pool, test_bags.len())?;
    iauc_of_run(&attention, test_bags, problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    /// Mean fraction of ensembles with IAUC ≤ 0.65.
    pub bad_fraction: f64,
    /// Normal-approximation 95% interval of the mean.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The fractions the mean is taken over: one per repetition
    /// (multi-config) or one per configuration (single-config).
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigCurve {
    pub config_id: String,
    /// Bad fraction per entry of the curve's sizes.
    pub bad_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadEnsembleCurve {
    pub strategy: Strategy,
    pub n_ensembles: usize,
    pub points: Vec<CurvePoint>,
    /// Individual configuration curves (single-config only).
    pub per_config: Vec<ConfigCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSettings {
    pub sizes: Vec<usize>,
    pub n_ensembles: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings {
            sizes: vec![1, 2, 5, 10, 20],
            n_ensembles: 30,
            repetitions: 5,
            seed: 0,
        }
    }
}

fn mean_ci(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, mean, mean);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

fn bad_fraction<R: Rng + ?Sized>(
    pool: &[&RunRecord],
    strategy: Strategy,
    size: usize,
    count: usize,
    rng: &mut R,
    bags: &[Bag],
    problem: ProblemKind,
) -> Result<f64> {
    let ensembles = build_ensembles(pool, strategy, size, count, rng)?;
    let mut bad = 0usize;
    for e in &ensembles {
        if ensemble_iauc(e, pool, bags, problem)? <= BAD_IAUC {
            bad += 1;
        }
    }
    Ok(bad as f64 / count.max(1) as f64)
}

/// Fraction of bad ensembles (IAUC ≤ 0.65) against ensemble size.
///
/// Multi-config: the whole sampling is repeated `repetitions` times over the
/// pooled runs and the points report the mean and 95% interval over
/// repetitions. Single-config: one curve per configuration in `pool`
/// (first-appearance order) and their average.
pub fn bad_ensemble_curve(
    pool: &[&RunRecord],
    strategy: Strategy,
    settings: &CurveSettings,
    bags: &[Bag],
    problem: ProblemKind,
) -> Result<BadEnsembleCurve> {
    let stream = fnv1a(strategy.name());
    match strategy {
        Strategy::MultiConfig => {
            let mut points = Vec::with_capacity(settings.sizes.len());
            for &size in &settings.sizes {
                let samples = (0..settings.repetitions.max(1))
                    .map(|rep| {
                        let mut rng =
                            derived_rng(settings.seed, &[stream, size as u64, rep as u64]);
                        bad_fraction(pool, strategy, size, settings.n_ensembles, &mut rng, bags, problem)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (mean, lo, hi) = mean_ci(&samples);
                points.push(CurvePoint {
                    size,
                    bad_fraction: mean,
                    ci_low: lo,
                    ci_high: hi,
                    samples,
                });
            }
            Ok(BadEnsembleCurve {
                strategy,
                n_ensembles: settings.n_ensembles,
                points,
                per_config: Vec::new(),
            })
        }
        Strategy::SingleConfig => {
            let mut order: Vec<&str> = Vec::new();
            let mut groups: HashMap<&str, Vec<&RunRecord>> = HashMap::new();
            for r in pool {
                groups
                    .entry(r.config_id.as_str())
                    .or_insert_with(|| {
                        order.push(r.config_id.as_str());
                        Vec::new()
                    })
                    .push(r);
            }
            let mut per_config = Vec::with_capacity(order.len());
            for id in &order {
                let runs = &groups[id];
                let bad_fractions = settings
                    .sizes
                    .iter()
                    .map(|&size| {
                        let mut rng =
                            derived_rng(settings.seed, &[stream, fnv1a(id), size as u64]);
                        bad_fraction(runs, strategy, size, settings.n_ensembles, &mut rng, bags, problem)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                per_config.push(ConfigCurve {
                    config_id: id.to_string(),
                    bad_fractions,
                });
            }
            if per_config.is_empty() {
                return Err(Error::Sizing("empty run pool".into()));
            }
            let points = settings
                .sizes
                .iter()
                .enumerate()
                .map(|(i, &size)| {
                    let samples: Vec<f64> = per_config.iter().map(|c| c.bad_fractions[i]).collect();
                    let (mean, lo, hi) = mean_ci(&samples);
                    CurvePoint {
                        size,
                        bad_fraction: mean,
                        ci_low: lo,
                        ci_high: hi,
                        samples,
                    }
                })
                .collect();
            Ok(BadEnsembleCurve {
                strategy,
                n_ensembles: settings.n_ensembles,
                points,
                per_config,
            })
        }
    }
}
