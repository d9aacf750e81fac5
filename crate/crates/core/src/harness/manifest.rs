//! Experiment manifests (TOML) and the resolved campaign plan.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Modality, ProblemKind, SplitSizes};
use crate::ensemble::CurveSettings;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::Activation;

/// Hyperparameter grid. Every field lists the values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub hidden_size: Vec<usize>,
    pub attention_size: Vec<usize>,
    pub featurizer_depth: Vec<usize>,
    pub classifier_depth: Vec<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: Vec<usize>,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: Vec<f64>,
}

fn default_batch() -> Vec<usize> {
    vec![100]
}

fn default_weight_decay() -> Vec<f64> {
    vec![1e-4]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub config_id: String,
    pub config: ModelConfig,
}

impl Grid {
    /// The full search grid used for each data modality.
    pub fn full(modality: Modality) -> Grid {
        let lr = vec![0.001, 0.005, 0.01, 0.02];
        match modality {
            Modality::Gaussian => Grid {
                epochs: vec![100, 200, 500],
                learning_rate: lr,
                hidden_size: vec![2, 4, 8],
                attention_size: vec![1, 2, 4, 8],
                featurizer_depth: vec![0, 1, 2],
                classifier_depth: vec![1, 2, 3],
                batch_size: default_batch(),
                weight_decay: default_weight_decay(),
            },
            Modality::Mnist => Grid {
                epochs: vec![500],
                learning_rate: lr,
                hidden_size: vec![8, 16, 32, 64],
                attention_size: vec![1, 2, 4, 8, 10],
                featurizer_depth: vec![1, 2],
                classifier_depth: vec![1, 2],
                batch_size: default_batch(),
                weight_decay: default_weight_decay(),
            },
            Modality::Cytof | Modality::CytofSynthetic => Grid {
                epochs: vec![500],
                learning_rate: lr,
                hidden_size: vec![4, 8, 16],
                attention_size: vec![1, 2, 4, 8],
                featurizer_depth: vec![1, 2, 3],
                classifier_depth: vec![1, 2, 3],
                batch_size: default_batch(),
                weight_decay: default_weight_decay(),
            },
        }
    }

    /// 12-point sub-grid of [`Grid::full`] for desk-scale campaigns.
    pub fn desk(modality: Modality) -> Grid {
        let (epochs, hidden) = match modality {
            Modality::Gaussian => (100, vec![4, 8]),
            Modality::Mnist => (500, vec![8, 16]),
            Modality::Cytof | Modality::CytofSynthetic => (500, vec![4, 8]),
        };
        Grid {
            epochs: vec![epochs],
            learning_rate: vec![0.005, 0.01, 0.02],
            hidden_size: hidden,
            attention_size: vec![2, 4],
            featurizer_depth: vec![1],
            classifier_depth: vec![2],
            batch_size: default_batch(),
            weight_decay: default_weight_decay(),
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
            * self.learning_rate.len()
            * self.hidden_size.len()
            * self.attention_size.len()
            * self.featurizer_depth.len()
            * self.classifier_depth.len()
            * self.batch_size.len()
            * self.weight_decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("every grid field needs at least one value".into()));
        }
        Ok(())
    }

    /// All grid points in nested order (epochs outermost, weight decay
    /// innermost). Identifiers name the grid values; with featurizer depth 0
    /// the trained width is forced to `input_dim` but the identifier keeps
    /// the grid's hidden size, so every grid point stays distinct.
    pub fn expand(&self, input_dim: usize) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &epochs in &self.epochs {
            for &lr in &self.learning_rate {
                for &k in &self.hidden_size {
                    for &l in &self.attention_size {
                        for &fd in &self.featurizer_depth {
                            for &cd in &self.classifier_depth {
                                for &batch in &self.batch_size {
                                    for &wd in &self.weight_decay {
                                        let config = ModelConfig {
                                            input_dim,
                                            embed_dim: k,
                                            attention_dim: l,
                                            featurizer_depth: fd,
                                            classifier_depth: cd,
                                            learning_rate: lr,
                                            epochs,
                                            batch_size: batch,
                                            weight_decay: wd,
                                            hidden_activation: Activation::Relu,
                                        }
                                        .normalized();
                                        out.push(GridPoint {
                                            config_id: format!(
                                                "e{epochs}-lr{lr}-k{k}-l{l}-fd{fd}-cd{cd}-b{batch}-wd{wd}"
                                            ),
                                            config,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub train: Option<usize>,
    pub validation: Option<usize>,
    pub test: Option<usize>,
    pub bag_size: Option<usize>,
    pub balance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskSection {
    pub grid: Option<Grid>,
    pub seeds_per_config: Option<usize>,
    pub n_repetitions: Option<usize>,
    pub top_k: Option<usize>,
    pub train: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub sizes: Option<Vec<usize>>,
    pub n_ensembles: Option<usize>,
    pub repetitions: Option<usize>,
}

/// Source files for the MNIST and CyTOF modalities. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub cytof_table: Option<PathBuf>,
    pub cytof_delimiter: Option<char>,
    pub cytof_cluster_column: Option<String>,
}

/// A manifest as written by the user. Unset fields take the full-scale
/// defaults, or the desk-scale preset when `--desk-scale` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub modality: Modality,
    pub problem: ProblemKind,
    #[serde(default)]
    pub master_seed: u64,
    pub seeds_per_config: Option<usize>,
    pub n_repetitions: Option<usize>,
    pub top_k: Option<usize>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSection,
    pub grid: Option<Grid>,
    #[serde(default)]
    pub desk_scale: DeskSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub sources: Sources,
}

impl Manifest {
    pub fn new(modality: Modality, problem: ProblemKind) -> Manifest {
        Manifest {
            modality,
            problem,
            master_seed: 0,
            seeds_per_config: None,
            n_repetitions: None,
            top_k: None,
            output_dir: None,
            dataset: DatasetSection::default(),
            grid: None,
            desk_scale: DeskSection::default(),
            ensemble: EnsembleSection::default(),
            sources: Sources::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Manifest> {
        toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Manifest::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let s = &mut m.sources;
        for p in [&mut s.mnist_images, &mut s.mnist_labels, &mut s.cytof_table]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = m.output_dir.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("manifest serialisation: {e}")))
    }

    /// Applies the defaults (full or desk scale) and an optional seed
    /// override.
    pub fn resolve(&self, desk_scale: bool, seed: Option<u64>) -> Result<Plan> {
        let desk = &self.desk_scale;
        let pick = |desk_value: Option<usize>, full: Option<usize>, desk_default, full_default| {
            if desk_scale {
                desk_value.unwrap_or(desk_default)
            } else {
                full.unwrap_or(full_default)
            }
        };
        let full_sizes = SplitSizes::default();
        let sizes = SplitSizes {
            train: if desk_scale {
                desk.train.unwrap_or(DESK_TRAIN_BAGS)
            } else {
                self.dataset.train.unwrap_or(full_sizes.train)
            },
            validation: self.dataset.validation.unwrap_or(full_sizes.validation),
            test: self.dataset.test.unwrap_or(full_sizes.test),
            bag_size: self.dataset.bag_size.unwrap_or(full_sizes.bag_size),
        };
        let grid = if desk_scale {
            desk.grid.clone().unwrap_or_else(|| Grid::desk(self.modality))
        } else {
            self.grid.clone().unwrap_or_else(|| Grid::full(self.modality))
        };
        let master_seed = seed.unwrap_or(self.master_seed);
        let defaults = CurveSettings::default();
        let plan = Plan {
            modality: self.modality,
            problem: self.problem,
            master_seed,
            desk_scale,
            seeds_per_config: pick(desk.seeds_per_config, self.seeds_per_config, 3, 5),
            n_repetitions: pick(desk.n_repetitions, self.n_repetitions, 30, 100),
            top_k: pick(desk.top_k, self.top_k, 2, 5),
            sizes,
            balance: self.dataset.balance.unwrap_or(0.5),
            grid,
            ensemble: CurveSettings {
                sizes: self.ensemble.sizes.clone().unwrap_or(defaults.sizes),
                n_ensembles: self.ensemble.n_ensembles.unwrap_or(defaults.n_ensembles),
                repetitions: self.ensemble.repetitions.unwrap_or(defaults.repetitions),
                seed: master_seed,
            },
            sources: self.sources.clone(),
        };
        plan.validate()?;
        Ok(plan)
    }
}

pub const DESK_TRAIN_BAGS: usize = 200;

/// Fully resolved campaign settings; stored as `plan.json` in the campaign
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub modality: Modality,
    pub problem: ProblemKind,
    pub master_seed: u64,
    pub desk_scale: bool,
    pub seeds_per_config: usize,
    pub n_repetitions: usize,
    pub top_k: usize,
    pub sizes: SplitSizes,
    pub balance: f64,
    pub grid: Grid,
    pub ensemble: CurveSettings,
    pub sources: Sources,
}

impl Plan {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.seeds_per_config == 0 || self.top_k == 0 {
            return Err(Error::Config("seeds_per_config and top_k must be positive".into()));
        }
        let s = self.sizes;
        if s.train == 0 || s.validation == 0 || s.test == 0 || s.bag_size == 0 {
            return Err(Error::Config("dataset splits and bag size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.balance) {
            return Err(Error::Config(format!("balance {} outside [0, 1]", self.balance)));
        }
        if self.ensemble.sizes.is_empty() || self.ensemble.sizes.contains(&0) {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        Ok(())
    }
}
