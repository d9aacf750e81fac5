//! Campaign directories: dataset materialisation, grid search, repetition
//! runs and the persisted results they produce.
//!
//! Layout under the campaign directory:
//!
//! ```text
//! plan.json                      resolved settings
//! index.json                     completed jobs and the search ranking
//! dataset/                       train/validation/test splits
//! runs/search/<config>/seed-<i>.json, .params.bin
//! runs/repeat/<config>/rep-<i>.json, .params.bin, .attn.bin
//! ```
//!
//! A run's `.json` record is written last, so its presence marks the job
//! as complete.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{GridPoint, Plan};
use crate::binio;
use crate::data::{
    generate_dataset, load_cytof_table, load_dataset, load_mnist_idx, save_dataset,
    synth_cytof_pool, ClusterMapping, CytofTableOptions, Dataset, DatasetManifest, GaussianSpec,
    InstanceSource, Modality, PopulationPool,
};
use crate::error::{Error, Result};
use crate::model::{train, AttentionProfile, ModelConfig, RunRecord};
use crate::rng::{fnv1a, mix_seed};

const SEARCH_STREAM: u64 = 0x5EA7C4;
const REPEAT_STREAM: u64 = 0x4E9EA7;
const POOL_STREAM: u64 = 0x9001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Search,
    Repeat,
}

impl Phase {
    fn dir_name(self) -> &'static str {
        match self {
            Phase::Search => "search",
            Phase::Repeat => "repeat",
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            Phase::Search => "seed",
            Phase::Repeat => "rep",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Phase::Search => SEARCH_STREAM,
            Phase::Repeat => REPEAT_STREAM,
        }
    }
}

/// Training seed of run `index` of `config_id` in `phase`.
pub fn run_seed(master_seed: u64, phase: Phase, config_id: &str, index: usize) -> u64 {
    mix_seed(master_seed, &[phase.stream(), fnv1a(config_id), index as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub config_id: String,
    /// Mean over non-diverged runs; `None` when every run diverged.
    pub mean_validation_accuracy: Option<f64>,
    pub runs: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignIndex {
    pub search: BTreeMap<String, BTreeSet<usize>>,
    pub repeat: BTreeMap<String, BTreeSet<usize>>,
    pub ranking: Vec<RankEntry>,
}

pub struct Campaign {
    dir: PathBuf,
    plan: Plan,
    index: Mutex<CampaignIndex>,
    verbose: bool,
}

struct Job {
    phase: Phase,
    config_id: String,
    config: ModelConfig,
    index: usize,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Internal(format!("serialising {}: {e}", path.display())))?;
    bytes.push(b'\n');
    binio::write_atomic(path, &bytes)
}

impl Campaign {
    /// Prepares `dir` for `plan`. An existing campaign directory must hold
    /// the same plan; its index is kept.
    pub fn create(dir: &Path, plan: Plan) -> Result<Campaign> {
        plan.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let plan_path = dir.join("plan.json");
        if plan_path.exists() {
            let stored: Plan = read_json(&plan_path)?;
            if stored != plan {
                return Err(Error::Config(format!(
                    "{} holds a campaign with different settings",
                    dir.display()
                )));
            }
        }
        write_json(&plan_path, &plan)?;
        let index_path = dir.join("index.json");
        let index = if index_path.exists() {
            read_json(&index_path)?
        } else {
            CampaignIndex::default()
        };
        let campaign = Campaign {
            dir: dir.to_path_buf(),
            plan,
            index: Mutex::new(index),
            verbose: false,
        };
        campaign.save_index()?;
        Ok(campaign)
    }

    /// Opens an existing campaign directory.
    pub fn open(dir: &Path) -> Result<Campaign> {
        let plan: Plan = read_json(&dir.join("plan.json"))?;
        let index_path = dir.join("index.json");
        let index = if index_path.exists() {
            read_json(&index_path)?
        } else {
            CampaignIndex::default()
        };
        Ok(Campaign {
            dir: dir.to_path_buf(),
            plan,
            index: Mutex::new(index),
            verbose: false,
        })
    }

    /// Prints one line per finished job to stderr.
    pub fn verbose(mut self, on: bool) -> Self {
        self.verbose = on;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn index(&self) -> CampaignIndex {
        self.index.lock().expect("index lock").clone()
    }

    fn save_index(&self) -> Result<()> {
        let index = self.index.lock().expect("index lock");
        write_json(&self.dir.join("index.json"), &*index)
    }

    fn source_pool(&self) -> Result<Option<PopulationPool>> {
        let plan = &self.plan;
        let missing = |what: &str| Error::Config(format!("manifest [sources] needs {what}"));
        let pool = match plan.modality {
            Modality::Gaussian => return Ok(None),
            Modality::Mnist => {
                let images = plan.sources.mnist_images.as_ref().ok_or_else(|| missing("mnist_images"))?;
                let labels = plan.sources.mnist_labels.as_ref().ok_or_else(|| missing("mnist_labels"))?;
                load_mnist_idx(images, labels)?
            }
            Modality::Cytof => {
                let table = plan.sources.cytof_table.as_ref().ok_or_else(|| missing("cytof_table"))?;
                let mut options = CytofTableOptions {
                    mapping: ClusterMapping::default(),
                    ..CytofTableOptions::default()
                };
                if let Some(d) = plan.sources.cytof_delimiter {
                    options.delimiter = u8::try_from(d)
                        .map_err(|_| Error::Config(format!("delimiter {d:?} is not a single byte")))?;
                }
                if let Some(c) = &plan.sources.cytof_cluster_column {
                    options.cluster_column = c.clone();
                }
                load_cytof_table(table, &options)?
            }
            Modality::CytofSynthetic => synth_cytof_pool(mix_seed(plan.master_seed, &[POOL_STREAM])),
        };
        Ok(Some(pool.for_problem(plan.problem)))
    }

    fn dataset_manifest(&self, input_dim: usize) -> DatasetManifest {
        DatasetManifest {
            modality: self.plan.modality,
            problem: self.plan.problem,
            master_seed: self.plan.master_seed,
            sizes: self.plan.sizes,
            balance: self.plan.balance,
            input_dim,
        }
    }

    /// Builds the dataset from the plan and writes it to `dataset/`.
    pub fn generate(&self) -> Result<Dataset> {
        let gaussian = GaussianSpec::default();
        let pool = self.source_pool()?;
        let source = match &pool {
            Some(p) => InstanceSource::Pool(p),
            None => InstanceSource::Gaussian(&gaussian),
        };
        let data = generate_dataset(
            source,
            self.plan.problem,
            self.plan.sizes,
            self.plan.balance,
            self.plan.master_seed,
        )?;
        let manifest = self.dataset_manifest(source.dim());
        save_dataset(&self.dir.join("dataset"), &manifest, &data)?;
        Ok(data)
    }

    /// The stored dataset, generated first if absent or stale.
    pub fn dataset(&self) -> Result<Dataset> {
        let dir = self.dir.join("dataset");
        if dir.join("dataset.json").exists() {
            let (manifest, data) = load_dataset(&dir)?;
            if manifest == self.dataset_manifest(manifest.input_dim) {
                return Ok(data);
            }
        }
        self.generate()
    }

    pub fn grid_points(&self, input_dim: usize) -> Vec<GridPoint> {
        self.plan.grid.expand(input_dim)
    }

    fn run_path(&self, phase: Phase, config_id: &str, index: usize, ext: &str) -> PathBuf {
        self.dir
            .join("runs")
            .join(phase.dir_name())
            .join(config_id)
            .join(format!("{}-{index}.{ext}", phase.file_stem()))
    }

    fn execute(&self, jobs: Vec<Job>, data: &Dataset, threads: usize) -> Result<()> {
        let total = jobs.len();
        let done = Mutex::new(0usize);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
        let results: Vec<Result<()>> = pool.install(|| {
            jobs.par_iter()
                .map(|job| {
                    let record = self.run_job(job, data)?;
                    {
                        let mut index = self.index.lock().expect("index lock");
                        let map = match job.phase {
                            Phase::Search => &mut index.search,
                            Phase::Repeat => &mut index.repeat,
                        };
                        map.entry(job.config_id.clone()).or_default().insert(job.index);
                    }
                    self.save_index()?;
                    if self.verbose {
                        let mut n = done.lock().expect("progress lock");
                        *n += 1;
                        eprintln!(
                            "[{} {}/{}] {} #{} val_acc={:.3} iauc={}{}",
                            job.phase.dir_name(),
                            *n,
                            total,
                            job.config_id,
                            job.index,
                            record.validation_accuracy,
                            record.test_iauc.map_or("n/a".into(), |v| format!("{v:.3}")),
                            if record.training_diverged { " diverged" } else { "" },
                        );
                    }
                    Ok(())
                })
                .collect()
        });
        results.into_iter().collect()
    }

    fn run_job(&self, job: &Job, data: &Dataset) -> Result<RunRecord> {
        let seed = run_seed(self.plan.master_seed, job.phase, &job.config_id, job.index);
        let (model, record) = train(&job.config, &job.config_id, seed, data)?;
        let record_path = self.run_path(job.phase, &job.config_id, job.index, "json");
        let dir = record_path.parent().expect("run path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let flat = model.to_flat();
        binio::write_atomic(
            &self.run_path(job.phase, &job.config_id, job.index, "params.bin"),
            &binio::encode_f64(&[flat.len()], &flat),
        )?;
        if job.phase == Phase::Repeat {
            let m = data.test.first().map_or(0, |b| b.len());
            let mut flat = Vec::with_capacity(record.test_attention.len() * m);
            for p in &record.test_attention {
                flat.extend_from_slice(p.weights());
            }
            binio::write_atomic(
                &self.run_path(job.phase, &job.config_id, job.index, "attn.bin"),
                &binio::encode_f64(&[record.test_attention.len(), m], &flat),
            )?;
        }
        write_json(&record_path, &record)?;
        Ok(record)
    }

    fn completed(&self, phase: Phase, config_id: &str, index: usize) -> bool {
        self.run_path(phase, config_id, index, "json").exists()
    }

    /// Trains every grid point with `seeds_per_config` seeds and ranks the
    /// configurations by mean validation accuracy. With `resume`, runs whose
    /// records already exist are kept.
    pub fn search(&self, threads: usize, resume: bool) -> Result<Vec<RankEntry>> {
        let data = self.dataset()?;
        let points = self.grid_points(data.input_dim());
        let mut jobs = Vec::new();
        for p in &points {
            for i in 0..self.plan.seeds_per_config {
                if resume && self.completed(Phase::Search, &p.config_id, i) {
                    self.mark(Phase::Search, &p.config_id, i);
                    continue;
                }
                jobs.push(Job {
                    phase: Phase::Search,
                    config_id: p.config_id.clone(),
                    config: p.config.clone(),
                    index: i,
                });
            }
        }
        self.execute(jobs, &data, threads)?;
        let ranking = self.rank(&points)?;
        self.index.lock().expect("index lock").ranking = ranking.clone();
        self.save_index()?;
        Ok(ranking)
    }

    fn mark(&self, phase: Phase, config_id: &str, index: usize) {
        let mut idx = self.index.lock().expect("index lock");
        let map = match phase {
            Phase::Search => &mut idx.search,
            Phase::Repeat => &mut idx.repeat,
        };
        map.entry(config_id.to_string()).or_default().insert(index);
    }

    fn rank(&self, points: &[GridPoint]) -> Result<Vec<RankEntry>> {
        let mut ranking = Vec::with_capacity(points.len());
        for p in points {
            let records = self.search_records_of(&p.config_id)?;
            let ok: Vec<f64> = records
                .iter()
                .filter(|r| !r.training_diverged)
                .map(|r| r.validation_accuracy)
                .collect();
            ranking.push(RankEntry {
                config_id: p.config_id.clone(),
                mean_validation_accuracy: (!ok.is_empty())
                    .then(|| ok.iter().sum::<f64>() / ok.len() as f64),
                runs: records.len(),
                diverged: records.len() - ok.len(),
            });
        }
        // stable: ties keep grid order
        ranking.sort_by(|a, b| {
            let key = |e: &RankEntry| e.mean_validation_accuracy.unwrap_or(f64::NEG_INFINITY);
            key(b).total_cmp(&key(a))
        });
        Ok(ranking)
    }

    /// The ranking stored by the last completed search.
    pub fn ranking(&self) -> Vec<RankEntry> {
        self.index.lock().expect("index lock").ranking.clone()
    }

    /// The `top_k` best-ranked configurations.
    pub fn top_configs(&self) -> Result<Vec<String>> {
        let ranking = self.ranking();
        if ranking.is_empty() {
            return Err(Error::Config("no search ranking yet; run `search` first".into()));
        }
        Ok(ranking
            .iter()
            .take(self.plan.top_k)
            .map(|e| e.config_id.clone())
            .collect())
    }

    /// Trains `n` repetitions (default `n_repetitions`) of each configuration
    /// (default: the top-ranked ones).
    pub fn repeat(
        &self,
        config_ids: Option<&[String]>,
        n: Option<usize>,
        threads: usize,
        resume: bool,
    ) -> Result<Vec<RunRecord>> {
        let data = self.dataset()?;
        let ids = match config_ids {
            Some(ids) => ids.to_vec(),
            None => self.top_configs()?,
        };
        let n = n.unwrap_or(self.plan.n_repetitions);
        let points = self.grid_points(data.input_dim());
        let mut jobs = Vec::new();
        for id in &ids {
            let point = points
                .iter()
                .find(|p| &p.config_id == id)
                .ok_or_else(|| Error::Config(format!("{id} is not a configuration of this campaign")))?;
            for i in 0..n {
                if resume && self.completed(Phase::Repeat, id, i) {
                    self.mark(Phase::Repeat, id, i);
                    continue;
                }
                jobs.push(Job {
                    phase: Phase::Repeat,
                    config_id: id.clone(),
                    config: point.config.clone(),
                    index: i,
                });
            }
        }
        self.execute(jobs, &data, threads)?;
        let mut out = Vec::new();
        for id in &ids {
            let mut records = self.repetition_records(id)?;
            records.truncate(n);
            out.extend(records);
        }
        Ok(out)
    }

    fn load_record(&self, phase: Phase, config_id: &str, index: usize) -> Result<RunRecord> {
        let mut record: RunRecord = read_json(&self.run_path(phase, config_id, index, "json"))?;
        if phase == Phase::Repeat {
            let path = self.run_path(phase, config_id, index, "attn.bin");
            let (dims, flat) = binio::read_f64(&path)?;
            if dims.len() != 2 {
                return Err(Error::format(&path, "attention array must have rank 2"));
            }
            record.test_attention = flat
                .chunks(dims[1].max(1))
                .take(dims[0])
                .map(|w| AttentionProfile::new(w.to_vec()))
                .collect::<Result<_>>()
                .map_err(|e| Error::format(&path, e))?;
        }
        Ok(record)
    }

    fn records(&self, phase: Phase, config_id: &str) -> Result<Vec<RunRecord>> {
        let indices: Vec<usize> = {
            let idx = self.index.lock().expect("index lock");
            let map = match phase {
                Phase::Search => &idx.search,
                Phase::Repeat => &idx.repeat,
            };
            map.get(config_id).map(|s| s.iter().copied().collect()).unwrap_or_default()
        };
        indices
            .into_iter()
            .map(|i| self.load_record(phase, config_id, i))
            .collect()
    }

    fn search_records_of(&self, config_id: &str) -> Result<Vec<RunRecord>> {
        self.records(Phase::Search, config_id)
    }

    /// Every grid-search record, in grid then seed order.
    pub fn search_records(&self) -> Result<Vec<RunRecord>> {
        let ids: Vec<String> = self.index.lock().expect("index lock").search.keys().cloned().collect();
        let mut out = Vec::new();
        for id in ids {
            out.extend(self.search_records_of(&id)?);
        }
        Ok(out)
    }

    /// Repetition records of one configuration, with test attention, in
    /// repetition order.
    pub fn repetition_records(&self, config_id: &str) -> Result<Vec<RunRecord>> {
        self.records(Phase::Repeat, config_id)
    }

    /// Configurations with repetition runs, in ranking order (unranked ones
    /// last, by name).
    pub fn repeated_configs(&self) -> Vec<String> {
        let idx = self.index.lock().expect("index lock");
        let mut ids: Vec<String> = idx
            .ranking
            .iter()
            .filter(|e| idx.repeat.contains_key(&e.config_id))
            .map(|e| e.config_id.clone())
            .collect();
        for id in idx.repeat.keys() {
            if !ids.contains(id) {
                ids.push(id.clone());
            }
        }
        ids
    }
}
