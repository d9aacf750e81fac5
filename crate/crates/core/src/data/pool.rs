use serde::{Deserialize, Serialize};

use super::labels::ProblemKind;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Gaussian instance populations: `N(μ_pop, σ² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub means: [Vec<f64>; 3],
    pub std: f64,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        GaussianSpec {
            means: [
                vec![0.0, 0.0, 0.0, 0.0],
                vec![1.0, 1.0, 1.0, 1.0],
                vec![-1.0, 1.0, 1.0, 1.0],
            ],
            std: 1.0,
        }
    }
}

impl GaussianSpec {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(Error::Config(format!("gaussian std must be positive, got {}", self.std)));
        }
        if self.means.iter().any(|m| m.len() != self.dim()) || self.dim() == 0 {
            return Err(Error::Config("gaussian means must share a positive dimension".into()));
        }
        Ok(())
    }
}

/// Empirical source instances grouped by population (0, 1, 2).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPool {
    dim: usize,
    populations: [Matrix; 3],
}

impl PopulationPool {
    pub fn new(dim: usize, populations: [Matrix; 3]) -> Result<Self> {
        for (p, m) in populations.iter().enumerate() {
            if m.rows() > 0 && m.cols() != dim {
                return Err(Error::Dimension {
                    context: if p == 0 { "pool population 0" } else { "pool population" },
                    expected: dim,
                    actual: m.cols(),
                });
            }
        }
        Ok(PopulationPool { dim, populations })
    }

    pub fn from_rows(dim: usize, rows: Vec<(u8, Vec<f64>)>) -> Result<Self> {
        let mut data: [Vec<f64>; 3] = Default::default();
        let mut counts = [0usize; 3];
        for (pop, row) in rows {
            if pop > 2 {
                return Err(Error::Input(format!("population {pop} out of range")));
            }
            if row.len() != dim {
                return Err(Error::Dimension {
                    context: "pool row",
                    expected: dim,
                    actual: row.len(),
                });
            }
            data[pop as usize].extend(row);
            counts[pop as usize] += 1;
        }
        let [a, b, c] = data;
        PopulationPool::new(
            dim,
            [
                Matrix::from_vec(counts[0], dim, a)?,
                Matrix::from_vec(counts[1], dim, b)?,
                Matrix::from_vec(counts[2], dim, c)?,
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn population(&self, p: u8) -> &Matrix {
        &self.populations[p as usize]
    }

    pub fn sizes(&self) -> [usize; 3] {
        [
            self.populations[0].rows(),
            self.populations[1].rows(),
            self.populations[2].rows(),
        ]
    }

    /// The pool as seen by `problem`: for MIL, population 2 has no special
    /// role and is merged into population 0.
    pub fn for_problem(&self, problem: ProblemKind) -> PopulationPool {
        match problem {
            ProblemKind::Mil => {
                let mut merged = self.populations[0].data().to_vec();
                merged.extend_from_slice(self.populations[2].data());
                let rows = self.populations[0].rows() + self.populations[2].rows();
                PopulationPool {
                    dim: self.dim,
                    populations: [
                        Matrix::from_vec(rows, self.dim, merged).expect("sized by construction"),
                        self.populations[1].clone(),
                        Matrix::zeros(0, self.dim),
                    ],
                }
            }
            _ => self.clone(),
        }
    }

    /// Rescales every column to zero mean and unit variance over the whole
    /// pool. Columns with variance below 1e-12 become all zeros.
    pub fn standardize(&mut self) {
        let n: usize = self.sizes().iter().sum();
        if n == 0 {
            return;
        }
        let mut mean = vec![0.0; self.dim];
        for m in &self.populations {
            for r in 0..m.rows() {
                for (acc, v) in mean.iter_mut().zip(m.row(r)) {
                    *acc += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = vec![0.0; self.dim];
        for m in &self.populations {
            for r in 0..m.rows() {
                for ((acc, v), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|v| {
                let v = v / n as f64;
                if v < 1e-12 {
                    0.0
                } else {
                    1.0 / v.sqrt()
                }
            })
            .collect();
        for m in &mut self.populations {
            for r in 0..m.rows() {
                for ((v, mu), s) in m.row_mut(r).iter_mut().zip(&mean).zip(&scale) {
                    *v = (*v - mu) * s;
                }
            }
        }
    }
}

/// Where instance vectors come from.
#[derive(Debug, Clone, Copy)]
pub enum InstanceSource<'a> {
    Gaussian(&'a GaussianSpec),
    Pool(&'a PopulationPool),
}

impl InstanceSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            InstanceSource::Gaussian(g) => g.dim(),
            InstanceSource::Pool(p) => p.dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_constant_column_to_zero() {
        let mut pool = PopulationPool::from_rows(
            2,
            vec![(0, vec![1.0, 5.0]), (1, vec![3.0, 5.0]), (2, vec![5.0, 5.0])],
        )
        .unwrap();
        pool.standardize();
        for p in 0..3 {
            assert_eq!(pool.population(p).get(0, 1), 0.0);
        }
        let col: Vec<f64> = (0..3).map(|p| pool.population(p).get(0, 0)).collect();
        let s = (1.5f64).sqrt();
        assert!((col[0] + s).abs() < 1e-12 && col[1].abs() < 1e-12 && (col[2] - s).abs() < 1e-12);
    }

    #[test]
    fn mil_view_merges_population_two() {
        let pool = PopulationPool::from_rows(
            1,
            vec![(0, vec![0.0]), (1, vec![1.0]), (2, vec![2.0]), (2, vec![2.5])],
        )
        .unwrap();
        assert_eq!(pool.for_problem(ProblemKind::Mil).sizes(), [3, 1, 0]);
        assert_eq!(pool.for_problem(ProblemKind::And).sizes(), [1, 1, 2]);
    }

    #[test]
    fn default_gaussian() {
        let g = GaussianSpec::default();
        g.validate().unwrap();
        assert_eq!(g.dim(), 4);
        assert!(GaussianSpec { std: 0.0, ..g }.validate().is_err());
    }
}
