//! Explanation-quality metrics.
//!
//! All rank-based statistics use midranks for ties, so uniform attention
//! scores an IAUC of exactly 0.5.

use serde::{Deserialize, Serialize};

use crate::data::{Bag, ProblemKind};
use crate::error::{Error, Result};
use crate::model::AttentionProfile;

/// Runs with an IAUC below this value are bad.
pub const BAD_IAUC: f64 = 0.65;
/// A configuration is bad when at least this fraction of its runs are bad.
pub const BAD_FRACTION: f64 = 0.10;

/// 1-based ranks, ties sharing the mean of the ranks they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney rank sum.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            context: "auroc",
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("auroc scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "auroc needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let n_pos = n_pos as f64;
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

pub fn key_instance_labels(instance_labels: &[u8], problem: ProblemKind) -> Vec<bool> {
    instance_labels.iter().map(|&y| problem.is_key(y)).collect()
}

/// Which bags contribute to the IAUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Eligibility {
    /// MIL: positive bags. AND/XOR: any bag holding both key and non-key
    /// instances.
    #[default]
    MixedBags,
    /// Positive bags only, for every problem.
    PositiveBags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IaucMode {
    /// Unweighted mean of per-bag AUROCs.
    #[default]
    PerBag,
    /// One AUROC over the instances of all eligible bags.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IaucOptions {
    pub eligibility: Eligibility,
    pub mode: IaucMode,
}

fn is_eligible(bag: &Bag, keys: &[bool], problem: ProblemKind, eligibility: Eligibility) -> bool {
    let mixed = keys.iter().any(|&k| k) && keys.iter().any(|&k| !k);
    let label_ok = match (problem, eligibility) {
        (ProblemKind::Mil, _) | (_, Eligibility::PositiveBags) => bag.label == 1,
        (_, Eligibility::MixedBags) => true,
    };
    mixed && label_ok
}

/// IAUC of a run with the default options (per-bag mean over mixed bags).
pub fn iauc_of_run(profiles: &[AttentionProfile], bags: &[Bag], problem: ProblemKind) -> Result<f64> {
    iauc_with(profiles, bags, problem, IaucOptions::default())
}

pub fn iauc_with(
    profiles: &[AttentionProfile],
    bags: &[Bag],
    problem: ProblemKind,
    options: IaucOptions,
) -> Result<f64> {
    if profiles.len() != bags.len() {
        return Err(Error::Dimension {
            context: "iauc profiles per bag",
            expected: bags.len(),
            actual: profiles.len(),
        });
    }
    let mut per_bag = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_keys = Vec::new();
    for (profile, bag) in profiles.iter().zip(bags) {
        if profile.len() != bag.len() {
            return Err(Error::Dimension {
                context: "iauc attention length",
                expected: bag.len(),
                actual: profile.len(),
            });
        }
        let keys = key_instance_labels(&bag.instance_labels, problem);
        if !is_eligible(bag, &keys, problem, options.eligibility) {
            continue;
        }
        match options.mode {
            IaucMode::PerBag => per_bag.push(auroc(profile.weights(), &keys)?),
            IaucMode::Pooled => {
                pooled_scores.extend_from_slice(profile.weights());
                pooled_keys.extend(keys);
            }
        }
    }
    match options.mode {
        IaucMode::PerBag if per_bag.is_empty() => {
            Err(Error::UndefinedMetric("no eligible bags for IAUC".into()))
        }
        IaucMode::PerBag => Ok(per_bag.iter().sum::<f64>() / per_bag.len() as f64),
        IaucMode::Pooled if pooled_keys.is_empty() => {
            Err(Error::UndefinedMetric("no eligible bags for IAUC".into()))
        }
        IaucMode::Pooled => auroc(&pooled_scores, &pooled_keys),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_id: String,
    pub iauc_values: Vec<f64>,
    pub mean_iauc: f64,
    pub bad_fraction: f64,
    pub is_bad: bool,
}

pub fn summarize_config(config_id: &str, iauc_values: &[f64]) -> Result<ConfigSummary> {
    if iauc_values.is_empty() {
        return Err(Error::Input(format!("no IAUC values for {config_id}")));
    }
    let n = iauc_values.len() as f64;
    let mean_iauc = iauc_values.iter().sum::<f64>() / n;
    let bad = iauc_values.iter().filter(|&&v| v < BAD_IAUC).count();
    let bad_fraction = bad as f64 / n;
    Ok(ConfigSummary {
        config_id: config_id.to_string(),
        iauc_values: iauc_values.to_vec(),
        mean_iauc,
        bad_fraction,
        // compare counts, not floats: 10 of 100 must be bad
        is_bad: bad as f64 >= BAD_FRACTION * n - 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Set when either variable is constant; `rho` is then reported as 0.
    pub degenerate: bool,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            context: "spearman",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Input("spearman needs at least two points".into()));
    }
    Ok(match pearson(&midranks(xs), &midranks(ys)) {
        Some(rho) => Spearman {
            rho,
            degenerate: false,
        },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Percentile with linear interpolation between order statistics
/// (`q` in [0, 1]).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Spread (max - min) of IAUC among runs whose validation accuracy reaches
/// the 90th percentile. `runs` holds `(validation_accuracy, iauc)` pairs.
pub fn delta_iauc(runs: &[(f64, f64)]) -> Result<f64> {
    if runs.len() < 10 {
        return Err(Error::Input(format!(
            "delta_iauc needs at least 10 runs, got {}",
            runs.len()
        )));
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let cut = percentile(&accs, 0.9);
    let top = runs.iter().filter(|r| r.0 >= cut).map(|r| r.1);
    let (lo, hi) = top.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    Ok(hi - lo)
}

pub fn accuracy<T: PartialEq>(predictions: &[T], labels: &[T]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            context: "accuracy",
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}
