//! Dataset directories: `dataset.json` plus, per split, three arrays
//! (`<split>.instances.bin` f64 [bags, M, dim], `<split>.instance_labels.bin`
//! u8 [bags, M], `<split>.bag_labels.bin` u8 [bags]).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bag, Dataset, Modality, ProblemKind, SplitSizes};
use crate::binio;
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub modality: Modality,
    pub problem: ProblemKind,
    pub master_seed: u64,
    pub sizes: SplitSizes,
    pub balance: f64,
    pub input_dim: usize,
}

const SPLITS: [&str; 3] = ["train", "validation", "test"];

pub fn save_dataset(dir: &Path, manifest: &DatasetManifest, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bags) in SPLITS.iter().zip([&data.train, &data.validation, &data.test]) {
        let m = manifest.sizes.bag_size;
        let mut inst = Vec::with_capacity(bags.len() * m * manifest.input_dim);
        let mut labels = Vec::with_capacity(bags.len() * m);
        for b in bags.iter() {
            inst.extend_from_slice(b.instances.data());
            labels.extend_from_slice(&b.instance_labels);
        }
        let bag_labels: Vec<u8> = bags.iter().map(|b| b.label).collect();
        binio::write_atomic(
            &dir.join(format!("{name}.instances.bin")),
            &binio::encode_f64(&[bags.len(), m, manifest.input_dim], &inst),
        )?;
        binio::write_atomic(
            &dir.join(format!("{name}.instance_labels.bin")),
            &binio::encode_u8(&[bags.len(), m], &labels),
        )?;
        binio::write_atomic(
            &dir.join(format!("{name}.bag_labels.bin")),
            &binio::encode_u8(&[bags.len()], &bag_labels),
        )?;
    }
    let json = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    binio::write_atomic(&dir.join("dataset.json"), json.as_bytes())
}

pub fn load_dataset_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("dataset.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Dataset)> {
    let manifest = load_dataset_manifest(dir)?;
    let mut splits = Vec::with_capacity(3);
    for name in SPLITS {
        let ip = dir.join(format!("{name}.instances.bin"));
        let (dims, inst) = binio::read_f64(&ip)?;
        let (ldims, labels) = binio::read_u8(&dir.join(format!("{name}.instance_labels.bin")))?;
        let (bdims, bag_labels) = binio::read_u8(&dir.join(format!("{name}.bag_labels.bin")))?;
        if dims.len() != 3 || ldims != dims[..2] || bdims != dims[..1] {
            return Err(Error::format(&ip, "inconsistent split array shapes"));
        }
        let (n, m, d) = (dims[0], dims[1], dims[2]);
        let bags = (0..n)
            .map(|i| {
                Ok(Bag {
                    instances: Matrix::from_vec(m, d, inst[i * m * d..(i + 1) * m * d].to_vec())?,
                    instance_labels: labels[i * m..(i + 1) * m].to_vec(),
                    label: bag_labels[i],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        splits.push(bags);
    }
    let test = splits.pop().expect("three splits");
    let validation = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok((
        manifest.clone(),
        Dataset {
            problem: manifest.problem,
            train,
            validation,
            test,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, GaussianSpec, InstanceSource};

    #[test]
    fn save_then_load() {
        let sizes = SplitSizes {
            train: 4,
            validation: 2,
            test: 2,
            bag_size: 5,
        };
        let g = GaussianSpec::default();
        let data =
            generate_dataset(InstanceSource::Gaussian(&g), ProblemKind::And, sizes, 0.5, 1).unwrap();
        let manifest = DatasetManifest {
            modality: Modality::Gaussian,
            problem: ProblemKind::And,
            master_seed: 1,
            sizes,
            balance: 0.5,
            input_dim: 4,
        };
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &manifest, &data).unwrap();
        let (m2, d2) = load_dataset(dir.path()).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(d2, data);
    }
}
