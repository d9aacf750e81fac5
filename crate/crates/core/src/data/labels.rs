use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bag-labelling rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Positive iff at least one population-1 instance is present.
    Mil,
    /// Positive iff populations 1 and 2 are both present.
    And,
    /// Positive iff exactly one of populations 1 and 2 is present.
    Xor,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Mil, ProblemKind::And, ProblemKind::Xor];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Mil => "MIL",
            ProblemKind::And => "AND",
            ProblemKind::Xor => "XOR",
        }
    }

    pub fn num_populations(self) -> usize {
        match self {
            ProblemKind::Mil => 2,
            ProblemKind::And | ProblemKind::Xor => 3,
        }
    }

    /// Whether instances of `population` determine the bag label.
    pub fn is_key(self, population: u8) -> bool {
        match self {
            ProblemKind::Mil => population == 1,
            ProblemKind::And | ProblemKind::Xor => population == 1 || population == 2,
        }
    }

    /// Instance mixing probabilities for populations 0, 1, 2.
    pub fn mixing_probabilities(self) -> [f64; 3] {
        match self {
            ProblemKind::Mil => [0.5, 0.5, 0.0],
            ProblemKind::And | ProblemKind::Xor => [0.4, 0.3, 0.3],
        }
    }

    fn label_of_presence(self, has1: bool, has2: bool) -> u8 {
        let positive = match self {
            ProblemKind::Mil => has1,
            ProblemKind::And => has1 && has2,
            ProblemKind::Xor => has1 != has2,
        };
        positive as u8
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mil" => Ok(ProblemKind::Mil),
            "and" => Ok(ProblemKind::And),
            "xor" => Ok(ProblemKind::Xor),
            other => Err(Error::Input(format!("unknown problem kind {other:?}"))),
        }
    }
}

/// Bag label from hidden instance labels.
pub fn bag_label_of(instance_labels: &[u8], problem: ProblemKind) -> Result<u8> {
    let mut present = [false; 3];
    for &y in instance_labels {
        match (y, problem) {
            (0 | 1, _) | (2, ProblemKind::And | ProblemKind::Xor) => present[y as usize] = true,
            (2, ProblemKind::Mil) => {
                return Err(Error::Input("instance label 2 is not valid for MIL".into()))
            }
            _ => return Err(Error::Input(format!("instance label {y} out of range"))),
        }
    }
    Ok(problem.label_of_presence(present[1], present[2]))
}

/// Which populations a bag contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Presence([bool; 3]);

impl Presence {
    pub fn of(populations: &[u8]) -> Self {
        let mut p = [false; 3];
        for &pop in populations {
            p[pop as usize] = true;
        }
        Presence(p)
    }

    pub fn contains(&self, population: u8) -> bool {
        self.0.get(population as usize).copied().unwrap_or(false)
    }

    pub fn populations(&self) -> Vec<u8> {
        (0..3u8).filter(|&p| self.contains(p)).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn label(&self, problem: ProblemKind) -> u8 {
        problem.label_of_presence(self.0[1], self.0[2])
    }
}

impl fmt::Display for Presence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.populations().iter().map(u8::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Draws a set of present populations consistent with `target_label`.
///
/// | problem | label 1 | label 0 |
/// |---------|---------|---------|
/// | MIL | {0,1} | {0} |
/// | AND | {0,1,2} | uniform over {0}, {0,1}, {0,2} |
/// | XOR | uniform over {0,1}, {0,2} | uniform over {0}, {0,1,2} |
pub fn sample_presence_pattern<R: Rng + ?Sized>(
    problem: ProblemKind,
    target_label: u8,
    rng: &mut R,
) -> Presence {
    let choices: &[&[u8]] = match (problem, target_label != 0) {
        (ProblemKind::Mil, true) => &[&[0, 1]],
        (ProblemKind::Mil, false) => &[&[0]],
        (ProblemKind::And, true) => &[&[0, 1, 2]],
        (ProblemKind::And, false) => &[&[0], &[0, 1], &[0, 2]],
        (ProblemKind::Xor, true) => &[&[0, 1], &[0, 2]],
        (ProblemKind::Xor, false) => &[&[0], &[0, 1, 2]],
    };
    let pick = if choices.len() == 1 {
        0
    } else {
        rng.random_range(0..choices.len())
    };
    Presence::of(choices[pick])
}
