//! Single-cell marker tables and a synthetic stand-in.

use std::collections::HashMap;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use super::pool::PopulationPool;
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const CYTOF_MARKERS: usize = 27;

/// How cluster names map to populations. Clusters absent from the map are
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMapping(pub HashMap<String, u8>);

impl Default for ClusterMapping {
    /// Luminal super-clusters (`L1`..`L7`, or names starting with
    /// "luminal") → 0, `B2` → 1, `B1` → 2.
    fn default() -> Self {
        let mut m: HashMap<String, u8> = (1..=7).map(|i| (format!("L{i}"), 0)).collect();
        m.insert("B2".into(), 1);
        m.insert("B1".into(), 2);
        ClusterMapping(m)
    }
}

impl ClusterMapping {
    pub fn population_of(&self, cluster: &str) -> Option<u8> {
        if let Some(&p) = self.0.get(cluster) {
            return Some(p);
        }
        if cluster.to_ascii_lowercase().starts_with("luminal") {
            return Some(0);
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct CytofTableOptions {
    pub delimiter: u8,
    pub cluster_column: String,
    pub mapping: ClusterMapping,
    /// Required number of marker columns; `None` accepts any positive count.
    pub expected_markers: Option<usize>,
}

impl Default for CytofTableOptions {
    fn default() -> Self {
        CytofTableOptions {
            delimiter: b',',
            cluster_column: "cluster".into(),
            mapping: ClusterMapping::default(),
            expected_markers: Some(CYTOF_MARKERS),
        }
    }
}

fn ingest(path: &Path, message: String) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        message,
    }
}

/// Reads a delimited marker table, maps clusters to populations and
/// standardises every marker over the loaded pool.
pub fn load_cytof_table(path: &Path, options: &CytofTableOptions) -> Result<PopulationPool> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| ingest(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| ingest(path, e.to_string()))?
        .clone();
    let cluster_idx = headers
        .iter()
        .position(|h| h.trim() == options.cluster_column)
        .ok_or_else(|| ingest(path, format!("missing column {:?}", options.cluster_column)))?;
    let marker_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != cluster_idx)
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    if marker_cols.is_empty() {
        return Err(ingest(path, "no marker columns".into()));
    }
    if let Some(n) = options.expected_markers {
        if marker_cols.len() != n {
            return Err(ingest(
                path,
                format!("expected {n} marker columns, found {}", marker_cols.len()),
            ));
        }
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let row_no = line + 2; // 1-based, after the header
        let record = record.map_err(|e| ingest(path, format!("row {row_no}: {e}")))?;
        let cluster = record
            .get(cluster_idx)
            .ok_or_else(|| ingest(path, format!("row {row_no}: missing cluster value")))?
            .trim();
        let Some(pop) = options.mapping.population_of(cluster) else {
            continue;
        };
        let mut values = Vec::with_capacity(marker_cols.len());
        for (idx, name) in &marker_cols {
            let raw = record.get(*idx).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                ingest(path, format!("row {row_no}, column {name:?}: non-numeric value {raw:?}"))
            })?;
            if !v.is_finite() {
                return Err(ingest(path, format!("row {row_no}, column {name:?}: non-finite value")));
            }
            values.push(v);
        }
        rows.push((pop, values));
    }
    let mut pool = PopulationPool::from_rows(marker_cols.len(), rows)?;
    pool.standardize();
    Ok(pool)
}

/// Per-marker standard deviation of the synthetic populations.
pub const SYNTH_STD: f64 = 0.6;
/// Cells generated per population.
pub const SYNTH_CELLS: usize = 10_000;

/// Population means of the synthetic pool: population 0 at the origin,
/// population 1 shifted by 0.5 on markers 0..16, population 2 shifted by 0.5
/// on markers 8..24. Every pair of means is 2.0 apart in L2.
pub fn synth_cytof_means() -> [Vec<f64>; 3] {
    let shifted = |range: std::ops::Range<usize>| -> Vec<f64> {
        (0..CYTOF_MARKERS)
            .map(|i| if range.contains(&i) { 0.5 } else { 0.0 })
            .collect()
    };
    [vec![0.0; CYTOF_MARKERS], shifted(0..16), shifted(8..24)]
}

/// Three 27-marker Gaussian populations of [`SYNTH_CELLS`] cells each.
pub fn synth_cytof_pool(seed: u64) -> PopulationPool {
    let mut rng = rng_from(seed);
    let means = synth_cytof_means();
    let mut rows = Vec::with_capacity(3 * SYNTH_CELLS);
    for (pop, mean) in means.iter().enumerate() {
        for _ in 0..SYNTH_CELLS {
            let row = mean
                .iter()
                .map(|&mu| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    mu + SYNTH_STD * n
                })
                .collect();
            rows.push((pop as u8, row));
        }
    }
    PopulationPool::from_rows(CYTOF_MARKERS, rows).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn toy_table(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("cells.csv");
        fs::write(&p, body).unwrap();
        p
    }

    fn opts() -> CytofTableOptions {
        CytofTableOptions {
            expected_markers: None,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_population() {
        let dir = tempfile::tempdir().unwrap();
        let p = toy_table(
            dir.path(),
            "m1,m2,cluster\n1.0,7.0,L3\n2.0,7.0,B2\n3.0,7.0,B1\n9.0,9.0,Tcell\n",
        );
        let pool = load_cytof_table(&p, &opts()).unwrap();
        assert_eq!(pool.sizes(), [1, 1, 1]);
        for pop in 0..3 {
            assert_eq!(pool.population(pop).get(0, 1), 0.0);
        }
    }

    #[test]
    fn errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = toy_table(dir.path(), "m1,m2,cluster\n1.0,abc,L1\n");
        let err = load_cytof_table(&p, &opts()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("m2"), "{err}");

        let p = toy_table(dir.path(), "m1,m2,label\n1.0,2.0,L1\n");
        let err = load_cytof_table(&p, &opts()).unwrap_err().to_string();
        assert!(err.contains("missing column"), "{err}");

        let p = toy_table(dir.path(), "m1,m2,cluster\n1.0,2.0,L1\n");
        assert!(load_cytof_table(&p, &CytofTableOptions::default()).is_err());
    }

    #[test]
    fn custom_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        let p = toy_table(dir.path(), "cluster;m1\nB2;1\nluminal_a;3\n");
        let pool = load_cytof_table(
            &p,
            &CytofTableOptions {
                delimiter: b';',
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(pool.sizes(), [1, 1, 0]);
    }

    #[test]
    fn synthetic_pool_shape_and_separation() {
        let pool = synth_cytof_pool(1);
        assert_eq!(pool.sizes(), [SYNTH_CELLS; 3]);
        assert_eq!(pool.dim(), CYTOF_MARKERS);
        let means = synth_cytof_means();
        for a in 0..3 {
            for b in a + 1..3 {
                let d: f64 = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 1.0);
            }
        }
        assert_eq!(synth_cytof_pool(1), pool);
    }
}
