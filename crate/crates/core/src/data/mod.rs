//! Synthetic multiple-instance tasks: bag labelling rules, presence-first
//! bag construction, and ingestion of MNIST / single-cell source pools.

mod bags;
mod cytof;
mod labels;
mod mnist;
mod pool;
mod store;

use serde::{Deserialize, Serialize};

pub use bags::{compose_bag, generate_dataset, Bag, Dataset, SplitSizes};
pub use cytof::{
    load_cytof_table, synth_cytof_means, synth_cytof_pool, ClusterMapping, CytofTableOptions,
    CYTOF_MARKERS, SYNTH_CELLS, SYNTH_STD,
};
pub use labels::{bag_label_of, sample_presence_pattern, Presence, ProblemKind};
pub use mnist::{digit_population, encode_idx, load_mnist_idx, read_idx_images, read_idx_labels};
pub use pool::{GaussianSpec, InstanceSource, PopulationPool};
pub use store::{load_dataset, load_dataset_manifest, save_dataset, DatasetManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Gaussian,
    Mnist,
    Cytof,
    CytofSynthetic,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Gaussian => "Gaussian",
            Modality::Mnist => "MNIST",
            Modality::Cytof => "CyTOF",
            Modality::CytofSynthetic => "CyTOF-synthetic",
        }
    }
}
