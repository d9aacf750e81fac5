use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use mil_audit::data::{Bag, Modality, ProblemKind};
use mil_audit::ensemble::{bad_ensemble_curve, Strategy};
use mil_audit::harness::{
    build_report, cli::dispatch, make_reports, run_seed, Campaign, Manifest, Phase,
};
use mil_audit::model::{AttentionProfile, RunRecord};
use mil_audit::nn::Matrix;

const TINY: &str = r#"
modality = "gaussian"
problem = "PROBLEM"
master_seed = 5
[dataset]
train = 16
validation = 10
test = 10
bag_size = 12
[desk_scale]
seeds_per_config = 2
n_repetitions = 3
top_k = 2
train = 16
[desk_scale.grid]
epochs = [3]
learning_rate = [0.01, 0.02]
hidden_size = [2, 4]
attention_size = [1, 2]
featurizer_depth = [1]
classifier_depth = [1]
batch_size = [8]
[ensemble]
sizes = [1, 2, 3]
n_ensembles = 5
repetitions = 2
"#;

fn write_manifest(dir: &Path, problem: &str) -> PathBuf {
    let path = dir.join(format!("{problem}.toml"));
    fs::write(&path, TINY.replace("PROBLEM", problem)).unwrap();
    path
}

fn cli(args: &[&str]) -> i32 {
    dispatch(std::iter::once("mil-audit").chain(args.iter().copied()))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn verify_and_usage_errors() {
    assert_eq!(cli(&["verify"]), 0);
    assert_eq!(cli(&["search", "--bogus"]), 2);
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_ne!(cli(&["search", "--manifest", "/nonexistent/m.toml", "--out", "/tmp/none"]), 0);
    assert_ne!(cli(&["report"]), 0);
}

#[test]
fn pipeline_produces_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), "mil");
    let out = tmp.path().join("c");
    let (m, o) = (m.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(cli(&["generate", "--manifest", m, "--out", o, "--desk-scale"]), 0);
    assert!(out.join("dataset/dataset.json").exists());
    assert_eq!(cli(&["search", "--manifest", m, "--out", o, "--desk-scale", "--jobs", "2"]), 0);
    assert_eq!(cli(&["repeat", "--manifest", m, "--out", o, "--desk-scale"]), 0);
    assert_eq!(cli(&["ensemble", "--out", o]), 0);
    assert!(out.join("reports/table3.csv").exists());
    assert_eq!(cli(&["report", "--out", o]), 0);
    let expected = [
        "table1.csv", "table1.svg", "table2.csv", "table2.svg", "table3.csv", "table3.svg",
        "ensemble_curves.csv", "ensemble_curves_gaussian-mil.svg", "iauc_distribution.csv",
        "iauc_guides.csv", "iauc_distribution_gaussian-mil.svg", "accuracy_iauc.csv",
        "accuracy_iauc_columns.csv", "accuracy_iauc_gaussian-mil.svg", "summary.json",
    ];
    for f in expected {
        assert!(out.join("reports").join(f).exists(), "missing {f}");
    }
    let t1 = fs::read_to_string(out.join("reports/table1.csv")).unwrap();
    assert!(t1.starts_with("data,problem,mean_iauc,bad_configs,configs,runs\nGaussian,MIL,"));
    // the manifest is stored, so later commands can omit it
    assert!(out.join("plan.json").exists());
    // a different manifest cannot reuse the directory
    let other = tmp.path().join("other.toml");
    fs::write(&other, TINY.replace("PROBLEM", "mil").replace("master_seed = 5", "master_seed = 6")).unwrap();
    assert_eq!(cli(&["search", "--manifest", other.to_str().unwrap(), "--out", o, "--desk-scale"]), 2);
}

fn tiny_plan(problem: &str) -> mil_audit::harness::Plan {
    Manifest::from_toml(&TINY.replace("PROBLEM", problem)).unwrap().resolve(true, None).unwrap()
}

#[test]
fn search_ranks_all_configs_and_resumes_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = Campaign::create(&tmp.path().join("a"), tiny_plan("xor")).unwrap();
    let ranking = a.search(2, false).unwrap();
    assert_eq!(ranking.len(), 8);
    assert!(ranking.iter().all(|e| e.runs == 2));
    let means: Vec<f64> = ranking.iter().map(|e| e.mean_validation_accuracy.unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] >= w[1]));

    let b = Campaign::create(&tmp.path().join("b"), tiny_plan("xor")).unwrap();
    b.search(1, false).unwrap();
    // simulate an interruption: drop two finished runs and the index
    let victim = &ranking[3].config_id;
    fs::remove_file(tmp.path().join(format!("b/runs/search/{victim}/seed-1.json"))).unwrap();
    fs::remove_file(tmp.path().join(format!("b/runs/search/{victim}/seed-0.json"))).unwrap();
    fs::remove_file(tmp.path().join("b/index.json")).unwrap();
    let b = Campaign::create(&tmp.path().join("b"), tiny_plan("xor")).unwrap();
    b.search(2, true).unwrap();
    assert_eq!(tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
}

#[test]
fn repetitions_are_counted_seeded_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let c = Campaign::create(tmp.path(), tiny_plan("and")).unwrap();
    c.search(1, false).unwrap();
    let top = c.top_configs().unwrap();
    assert_eq!(top.len(), 2);
    let records = c.repeat(Some(&top), Some(3), 1, false).unwrap();
    assert_eq!(records.len(), 6);
    for id in &top {
        assert_eq!(records.iter().filter(|r| &r.config_id == id).count(), 3);
    }
    let seeds: HashSet<u64> = records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 6);
    let again = c.repeat(Some(&top), Some(3), 2, false).unwrap();
    let iaucs = |r: &[RunRecord]| r.iter().map(|x| x.test_iauc).collect::<Vec<_>>();
    assert_eq!(iaucs(&records), iaucs(&again));
    assert_eq!(records, again);

    let many: HashSet<u64> = (0..5)
        .flat_map(|k| (0..100).map(move |i| run_seed(1, Phase::Repeat, &format!("cfg{k}"), i)))
        .collect();
    assert_eq!(many.len(), 500);
}

#[test]
fn hundred_repetitions_of_five_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("PROBLEM", "mil").replace("epochs = [3]", "epochs = [1]")
        .replace("train = 16\n[desk_scale]", "train = 4\n[desk_scale]")
        .replace("train = 16\n[desk_scale.grid]", "train = 4\n[desk_scale.grid]")
        .replace("bag_size = 12", "bag_size = 3").replace("test = 10", "test = 4").replace("validation = 10", "validation = 2");
    let plan = Manifest::from_toml(&text).unwrap().resolve(true, None).unwrap();
    let c = Campaign::create(tmp.path(), plan).unwrap();
    let data = c.dataset().unwrap();
    let ids: Vec<String> = c.grid_points(data.input_dim()).iter().take(5).map(|p| p.config_id.clone()).collect();
    let records = c.repeat(Some(&ids), Some(100), 1, false).unwrap();
    assert_eq!(records.len(), 500);
}

#[test]
fn table3_matches_direct_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let c = Campaign::create(tmp.path(), tiny_plan("xor")).unwrap();
    c.search(1, false).unwrap();
    c.repeat(None, None, 1, false).unwrap();
    let report = make_reports(&[&c], &tmp.path().join("r")).unwrap();
    let r = &report.campaigns[0];

    let bags = c.dataset().unwrap().test;
    let groups: Vec<Vec<RunRecord>> = c.top_configs().unwrap().iter().map(|id| c.repetition_records(id).unwrap()).collect();
    let pool: Vec<&RunRecord> = groups.iter().flatten().collect();
    let settings = c.plan().ensemble.clone();
    let multi = bad_ensemble_curve(&pool, Strategy::MultiConfig, &settings, &bags, ProblemKind::Xor).unwrap();
    assert_eq!(r.table3.n1.as_ref().unwrap().value, multi.points[0].bad_fraction);
    assert_eq!(r.multi_curve.as_ref().unwrap(), &multi);
    let single = bad_ensemble_curve(&pool, Strategy::SingleConfig, &settings, &bags, ProblemKind::Xor).unwrap();
    assert_eq!(r.single_curve.as_ref().unwrap(), &single);
    // size 20 exceeds the 3 repetitions per config: an explicit gap
    assert!(r.table3.n20_multi.is_none() && r.table3.n20_single.is_none());
    assert!(!r.gaps.is_empty());
    let csv = fs::read_to_string(tmp.path().join("r/table3.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("NA"));

    let iaucs: Vec<f64> = pool.iter().filter_map(|r| r.test_iauc).collect();
    let mean = iaucs.iter().sum::<f64>() / iaucs.len() as f64;
    assert!((r.table1.mean_iauc.unwrap() - mean).abs() < 1e-12);
}

#[test]
fn constant_iauc_campaign_report() {
    let plan = Manifest::new(Modality::Gaussian, ProblemKind::Mil).resolve(true, None).unwrap();
    let bags: Vec<Bag> = (0..4)
        .map(|_| Bag { instances: Matrix::zeros(4, 1), instance_labels: vec![1, 0, 0, 1], label: 1 })
        .collect();
    let groups: Vec<(String, Vec<RunRecord>)> = (0..5)
        .map(|k| {
            let runs = (0..20)
                .map(|s| RunRecord {
                    config_id: format!("c{k}"),
                    seed: s,
                    validation_accuracy: 1.0,
                    test_accuracy: 1.0,
                    validation_curve: vec![],
                    final_train_loss: 0.0,
                    test_iauc: Some(0.75),
                    training_diverged: false,
                    test_attention: vec![AttentionProfile::uniform(4); 4],
                })
                .collect();
            (format!("c{k}"), runs)
        })
        .collect();
    let r = build_report(&plan, &groups, &bags);
    assert_eq!(r.table1.mean_iauc, Some(0.75));
    assert_eq!((r.table1.bad_configs, r.table1.configs), (0, 5));
    assert_eq!(r.table2.spearman_mean, Some(0.0));
    assert_eq!(r.table2.degenerate_configs, 5);
    assert_eq!(r.table2.high_delta_iauc.as_ref().unwrap().1, 0.0);
    // uniform attention scores 0.5, so every ensemble is bad
    assert_eq!(r.table3.n20_multi.as_ref().unwrap().value, 1.0);
    let col = r.heatmap.column_totals.len() - 1;
    assert_eq!(r.heatmap.column_totals[col], 100);
    assert_eq!(r.heatmap.column_fraction(col, 7), 1.0);
}
