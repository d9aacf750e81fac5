//! Report tables (CSV), figures (SVG) and a JSON summary computed from the
//! persisted records of one or more campaigns.
//!
//! Files written to the report directory:
//!
//! | file | content |
//! |---|---|
//! | `table1.csv/.svg` | mean IAUC and bad configurations per task |
//! | `table2.csv/.svg` | Spearman ρ (across-config and bootstrap std) and ΔIAUC extremes |
//! | `table3.csv/.svg` | bad fraction at N=1, N=20 single-config, N=20 multi-config |
//! | `ensemble_curves.csv`, `ensemble_curves_<task>.svg` | bad fraction against ensemble size |
//! | `iauc_distribution.csv`, `iauc_guides.csv`, `iauc_distribution_<task>.svg` | per-config IAUC histograms and cumulative frequencies |
//! | `accuracy_iauc.csv`, `accuracy_iauc_columns.csv`, `accuracy_iauc_<task>.svg` | accuracy × IAUC counts normalised per accuracy column |
//! | `summary.json` | all of the above as structured data |
//!
//! Values that cannot be computed from the available records are written
//! as `NA` and listed under `gaps` in the summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;

use super::campaign::Campaign;
use super::manifest::Plan;
use crate::binio;
use crate::data::Bag;
use crate::ensemble::{bad_ensemble_curve, BadEnsembleCurve, CurveSettings, Strategy};
use crate::error::{Error, Result};
use crate::eval::{delta_iauc, spearman, summarize_config, ConfigSummary, BAD_FRACTION, BAD_IAUC};
use crate::model::RunRecord;
use crate::rng::{derived_rng, fnv1a};

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_STREAM: u64 = 0xB007;
const TABLE3_SIZE: usize = 20;
const HIST_BINS: usize = 20;
const ACC_BINS: usize = 10;
const ACC_LOW: f64 = 0.5;
const IAUC_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub mean_iauc: Option<f64>,
    pub bad_configs: usize,
    pub configs: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub spearman_mean: Option<f64>,
    /// Standard deviation of the per-config ρ values.
    pub spearman_std_configs: Option<f64>,
    /// Standard deviation of the mean ρ over bootstrap resamples of runs.
    pub spearman_std_bootstrap: Option<f64>,
    pub degenerate_configs: usize,
    pub high_delta_iauc: Option<(String, f64)>,
    pub low_delta_iauc: Option<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Row {
    pub n1: Option<Estimate>,
    pub n20_single: Option<Estimate>,
    pub n20_multi: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub config_id: String,
    pub counts: Vec<usize>,
    pub cumulative: Vec<f64>,
    pub fraction_below: f64,
    pub is_bad: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    /// `counts[acc_bin][iauc_bin]`.
    pub counts: Vec<Vec<usize>>,
    pub column_totals: Vec<usize>,
}

impl Heatmap {
    pub fn column_fraction(&self, acc_bin: usize, iauc_bin: usize) -> f64 {
        match self.column_totals[acc_bin] {
            0 => 0.0,
            t => self.counts[acc_bin][iauc_bin] as f64 / t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub data: String,
    pub problem: String,
    pub slug: String,
    pub configs: Vec<ConfigSummary>,
    pub table1: Table1Row,
    pub table2: Table2Row,
    pub table3: Table3Row,
    pub single_curve: Option<BadEnsembleCurve>,
    pub multi_curve: Option<BadEnsembleCurve>,
    pub histograms: Vec<Histogram>,
    pub heatmap: Heatmap,
    pub gaps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSet {
    pub campaigns: Vec<CampaignReport>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Runs with an IAUC, as (validation accuracy, IAUC).
fn scored(records: &[RunRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| r.test_iauc.map(|i| (r.validation_accuracy, i)))
        .collect()
}

fn rho_or_zero(pairs: &[(f64, f64)]) -> Option<(f64, bool)> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    spearman(&xs, &ys).ok().map(|s| (s.rho, s.degenerate))
}

fn table2(groups: &[(String, Vec<(f64, f64)>)], seed: u64) -> Table2Row {
    let usable: Vec<&(String, Vec<(f64, f64)>)> = groups.iter().filter(|g| g.1.len() >= 2).collect();
    let per_config: Vec<(f64, bool)> = usable.iter().filter_map(|g| rho_or_zero(&g.1)).collect();
    let rhos: Vec<f64> = per_config.iter().map(|r| r.0).collect();
    let spearman_std_bootstrap = if usable.is_empty() {
        None
    } else {
        let mut rng = derived_rng(seed, &[BOOTSTRAP_STREAM]);
        let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let rs: Vec<f64> = usable
                    .iter()
                    .map(|g| {
                        let n = g.1.len();
                        let resample: Vec<(f64, f64)> =
                            (0..n).map(|_| g.1[rng.random_range(0..n)]).collect();
                        rho_or_zero(&resample).map_or(0.0, |r| r.0)
                    })
                    .collect();
                mean(&rs)
            })
            .collect();
        sample_std(&means)
    };
    let deltas: Vec<(String, f64)> = groups
        .iter()
        .filter_map(|(id, pairs)| delta_iauc(pairs).ok().map(|d| (id.clone(), d)))
        .collect();
    let pick = |better: fn(f64, f64) -> bool| {
        deltas
            .iter()
            .fold(None::<&(String, f64)>, |best, d| match best {
                Some(b) if !better(d.1, b.1) => Some(b),
                _ => Some(d),
            })
            .cloned()
    };
    Table2Row {
        spearman_mean: (!rhos.is_empty()).then(|| mean(&rhos)),
        spearman_std_configs: sample_std(&rhos).or(if rhos.len() == 1 { Some(0.0) } else { None }),
        spearman_std_bootstrap,
        degenerate_configs: per_config.iter().filter(|r| r.1).count(),
        high_delta_iauc: pick(|a, b| a > b),
        low_delta_iauc: pick(|a, b| a < b),
    }
}

fn histogram(config_id: &str, values: &[f64]) -> Histogram {
    let mut counts = vec![0usize; HIST_BINS];
    for &v in values {
        let b = ((v * HIST_BINS as f64 + 1e-9).floor() as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    let n = values.len().max(1) as f64;
    let mut acc = 0usize;
    let cumulative = counts
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect();
    let below = values.iter().filter(|&&v| v < BAD_IAUC).count();
    Histogram {
        config_id: config_id.to_string(),
        counts,
        cumulative,
        fraction_below: below as f64 / n,
        is_bad: !values.is_empty() && below as f64 >= BAD_FRACTION * values.len() as f64 - 1e-9,
    }
}

fn acc_bin(acc: f64) -> usize {
    let width = (1.0 - ACC_LOW) / ACC_BINS as f64;
    (((acc - ACC_LOW) / width + 1e-9).floor().max(0.0) as usize).min(ACC_BINS - 1)
}

fn iauc_bin(iauc: f64) -> usize {
    ((iauc * IAUC_BINS as f64 + 1e-9).floor().max(0.0) as usize).min(IAUC_BINS - 1)
}

fn heatmap(pairs: &[(f64, f64)]) -> Heatmap {
    let mut counts = vec![vec![0usize; IAUC_BINS]; ACC_BINS];
    for &(acc, iauc) in pairs {
        counts[acc_bin(acc)][iauc_bin(iauc)] += 1;
    }
    let column_totals = counts.iter().map(|c| c.iter().sum()).collect();
    Heatmap {
        counts,
        column_totals,
    }
}

fn estimate(curve: &BadEnsembleCurve, size: usize) -> Option<Estimate> {
    curve.points.iter().find(|p| p.size == size).map(|p| Estimate {
        value: p.bad_fraction,
        ci_low: p.ci_low,
        ci_high: p.ci_high,
    })
}

fn curve_for(
    pool: &[&RunRecord],
    strategy: Strategy,
    settings: &CurveSettings,
    max_size: usize,
    bags: &[Bag],
    problem: crate::data::ProblemKind,
    gaps: &mut Vec<String>,
) -> Option<BadEnsembleCurve> {
    let mut s = settings.clone();
    let dropped: Vec<usize> = s.sizes.iter().copied().filter(|&n| n > max_size).collect();
    s.sizes.retain(|&n| n <= max_size);
    if !dropped.is_empty() {
        gaps.push(format!(
            "{} ensembles of size {dropped:?} exceed the {max_size} available runs",
            strategy.name()
        ));
    }
    if s.sizes.is_empty() {
        return None;
    }
    match bad_ensemble_curve(pool, strategy, &s, bags, problem) {
        Ok(c) => Some(c),
        Err(e) => {
            gaps.push(format!("{} ensemble curve: {e}", strategy.name()));
            None
        }
    }
}

/// Computes every report quantity for one campaign from its stored records.
pub fn campaign_report(campaign: &Campaign) -> Result<CampaignReport> {
    let mut groups = Vec::new();
    for id in campaign.repeated_configs() {
        let records = campaign.repetition_records(&id)?;
        groups.push((id, records));
    }
    let bags = if groups.is_empty() { Vec::new() } else { campaign.dataset()?.test };
    Ok(build_report(campaign.plan(), &groups, &bags))
}

/// Report quantities for repetition records grouped by configuration
/// (ranking order) and evaluated on `test_bags`.
pub fn build_report(plan: &Plan, groups: &[(String, Vec<RunRecord>)], test_bags: &[Bag]) -> CampaignReport {
    let data = plan.modality.name().to_string();
    let problem = plan.problem.name().to_string();
    let slug = format!("{}-{}", plan.modality.name(), plan.problem.name()).to_lowercase();
    let mut gaps = Vec::new();
    if groups.is_empty() {
        gaps.push("no repetition runs".into());
    }
    let pairs: Vec<(String, Vec<(f64, f64)>)> =
        groups.iter().map(|(id, r)| (id.clone(), scored(r))).collect();
    let mut configs = Vec::new();
    for (id, p) in &pairs {
        let iaucs: Vec<f64> = p.iter().map(|x| x.1).collect();
        match summarize_config(id, &iaucs) {
            Ok(s) => configs.push(s),
            Err(_) => gaps.push(format!("{id}: no run has an IAUC")),
        }
    }
    let all: Vec<(f64, f64)> = pairs.iter().flat_map(|p| p.1.iter().copied()).collect();
    let table1 = Table1Row {
        mean_iauc: (!all.is_empty()).then(|| mean(&all.iter().map(|p| p.1).collect::<Vec<_>>())),
        bad_configs: configs.iter().filter(|c| c.is_bad).count(),
        configs: configs.len(),
        runs: all.len(),
    };
    let table2 = table2(&pairs, plan.master_seed ^ fnv1a(&slug));

    let (single_curve, multi_curve) = if groups.is_empty() {
        (None, None)
    } else {
        let bags = test_bags;
        let pool: Vec<&RunRecord> = groups.iter().flat_map(|g| g.1.iter()).collect();
        let smallest = groups.iter().map(|g| g.1.len()).min().unwrap_or(0);
        let single = curve_for(&pool, Strategy::SingleConfig, &plan.ensemble, smallest, bags, plan.problem, &mut gaps);
        let multi = curve_for(&pool, Strategy::MultiConfig, &plan.ensemble, pool.len(), bags, plan.problem, &mut gaps);
        (single, multi)
    };
    let table3 = Table3Row {
        n1: multi_curve.as_ref().and_then(|c| estimate(c, 1)),
        n20_single: single_curve.as_ref().and_then(|c| estimate(c, TABLE3_SIZE)),
        n20_multi: multi_curve.as_ref().and_then(|c| estimate(c, TABLE3_SIZE)),
    };
    if !groups.is_empty() && (table3.n20_single.is_none() || table3.n20_multi.is_none()) {
        gaps.push(format!("table 3 has no ensembles of size {TABLE3_SIZE}"));
    }
    let histograms = configs.iter().map(|c| histogram(&c.config_id, &c.iauc_values)).collect();
    CampaignReport {
        data,
        problem,
        slug,
        configs,
        table1,
        table2,
        table3,
        single_curve,
        multi_curve,
        histograms,
        heatmap: heatmap(&all),
        gaps,
    }
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Table {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let internal = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        w.write_record(&self.header).map_err(internal)?;
        for r in &self.rows {
            w.write_record(r).map_err(internal)?;
        }
        w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))
    }

    fn svg(&self, title: &str) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
                    .max(4)
            })
            .collect();
        let col_x: Vec<usize> = widths
            .iter()
            .scan(10, |x, w| {
                let here = *x;
                *x += w * 7 + 16;
                Some(here)
            })
            .collect();
        let width = col_x.last().copied().unwrap_or(10) + widths.last().copied().unwrap_or(0) * 7 + 20;
        let height = 50 + 18 * (self.rows.len() + 1);
        let mut s = svg_open(width, height);
        let _ = writeln!(s, r#"<text x="10" y="20" font-weight="bold">{}</text>"#, escape(title));
        for (i, row) in std::iter::once(&self.header).chain(&self.rows).enumerate() {
            let y = 44 + 18 * i;
            for (c, cell) in row.iter().enumerate() {
                let weight = if i == 0 { r#" font-weight="bold""# } else { "" };
                let _ = writeln!(s, r#"<text x="{}" y="{y}"{weight}>{}</text>"#, col_x[c], escape(cell));
            }
            if i == 0 {
                let _ = writeln!(s, r##"<line x1="10" y1="{}" x2="{}" y2="{}" stroke="#000"/>"##, y + 5, width - 10, y + 5);
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(width: usize, height: usize) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"#fff\"/>\n"
    )
}

fn est_cells(e: &Option<Estimate>) -> [String; 3] {
    match e {
        Some(e) => [num(e.value), num(e.ci_low), num(e.ci_high)],
        None => ["NA".into(), "NA".into(), "NA".into()],
    }
}

fn pct(e: &Option<Estimate>) -> String {
    e.as_ref().map_or_else(|| "NA".into(), |e| format!("{:.1}", 100.0 * e.value))
}

fn histogram_svg(report: &CampaignReport) -> String {
    let (pw, ph, pad) = (220usize, 160usize, 40usize);
    let n = report.histograms.len().max(1);
    let width = n * (pw + pad) + pad;
    let height = ph + 2 * pad + 20;
    let mut s = svg_open(width, height);
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-weight="bold">{} {}: IAUC distribution per configuration</text>"#, escape(&report.data), escape(&report.problem));
    for (k, h) in report.histograms.iter().enumerate() {
        let x0 = pad + k * (pw + pad);
        let y0 = pad;
        let total: usize = h.counts.iter().sum();
        let max = h.counts.iter().copied().max().unwrap_or(0).max(1);
        let bw = pw as f64 / HIST_BINS as f64;
        let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##);
        for (b, &c) in h.counts.iter().enumerate() {
            let bh = ph as f64 * c as f64 / max as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a9a4a"/>"##,
                x0 as f64 + b as f64 * bw,
                (y0 + ph) as f64 - bh,
                bw,
                bh
            );
        }
        let points: Vec<String> = h
            .cumulative
            .iter()
            .enumerate()
            .map(|(b, c)| format!("{:.2},{:.2}", x0 as f64 + (b + 1) as f64 * bw, (y0 + ph) as f64 - c * ph as f64))
            .collect();
        if total > 0 {
            let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#e08020" stroke-width="2"/>"##, points.join(" "));
        }
        let gx = x0 as f64 + BAD_IAUC * pw as f64;
        let gy = (y0 + ph) as f64 - BAD_FRACTION * ph as f64;
        let _ = writeln!(s, r##"<line x1="{gx:.2}" y1="{y0}" x2="{gx:.2}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##, y0 + ph);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{gy:.2}" x2="{}" y2="{gy:.2}" stroke="#c0c" stroke-dasharray="4 3"/>"##, x0 + pw);
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{}">{}{}</text>"#,
            y0 + ph + 16,
            if h.is_bad { "* " } else { "" },
            escape(&h.config_id)
        );
        let _ = writeln!(s, r#"<text x="{x0}" y="{}">n={total} below 0.65: {:.2}</text>"#, y0 + ph + 30, h.fraction_below);
    }
    s.push_str("</svg>\n");
    s
}

fn heatmap_svg(report: &CampaignReport) -> String {
    let cell = 40usize;
    let (x0, y0) = (60usize, 60usize);
    let width = x0 + ACC_BINS * cell + 20;
    let height = y0 + IAUC_BINS * cell + 50;
    let mut s = svg_open(width, height);
    let _ = writeln!(s, r#"<text x="10" y="20" font-weight="bold">{} {}: validation accuracy x IAUC (fraction per column)</text>"#, escape(&report.data), escape(&report.problem));
    let hm = &report.heatmap;
    let acc_w = (1.0 - ACC_LOW) / ACC_BINS as f64;
    for a in 0..ACC_BINS {
        let x = x0 + a * cell;
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, x + 4, y0 - 6, hm.column_totals[a]);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="9">{:.2}</text>"#, x + 2, y0 + IAUC_BINS * cell + 14, ACC_LOW + a as f64 * acc_w);
        for i in 0..IAUC_BINS {
            let f = hm.column_fraction(a, i);
            let shade = 255 - (f * 200.0).round() as u8;
            let y = y0 + (IAUC_BINS - 1 - i) * cell;
            let _ = writeln!(s, r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#ddd"/>"##);
            if hm.counts[a][i] > 0 {
                let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="9">{f:.2}</text>"#, x + 6, y + cell / 2 + 3);
            }
        }
    }
    for i in 0..=IAUC_BINS {
        let y = y0 + (IAUC_BINS - i) * cell;
        let _ = writeln!(s, r#"<text x="20" y="{}" font-size="9">{:.1}</text>"#, y + 3, i as f64 / IAUC_BINS as f64);
    }
    let _ = writeln!(s, r#"<text x="{x0}" y="{}">validation accuracy</text>"#, height - 10);
    s.push_str("</svg>\n");
    s
}

fn curves_svg(report: &CampaignReport) -> String {
    let (w, h, x0, y0) = (420usize, 260usize, 60usize, 40usize);
    let mut s = svg_open(w + x0 + 180, h + y0 + 50);
    let _ = writeln!(s, r#"<text x="10" y="20" font-weight="bold">{} {}: bad ensembles against ensemble size</text>"#, escape(&report.data), escape(&report.problem));
    let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>"##);
    let sizes: Vec<usize> = report
        .multi_curve
        .iter()
        .chain(&report.single_curve)
        .flat_map(|c| c.points.iter().map(|p| p.size))
        .fold(Vec::new(), |mut v, n| {
            if !v.contains(&n) {
                v.push(n);
            }
            v
        });
    let mut sizes = sizes;
    sizes.sort_unstable();
    let xpos = |n: usize| -> f64 {
        let i = sizes.iter().position(|&m| m == n).unwrap_or(0);
        x0 as f64 + w as f64 * (i as f64 + 0.5) / sizes.len().max(1) as f64
    };
    let ypos = |f: f64| -> f64 { (y0 + h) as f64 - f.clamp(0.0, 1.0) * h as f64 };
    for &n in &sizes {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}">{n}</text>"#, xpos(n) - 4.0, y0 + h + 16);
    }
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="20" y="{:.2}">{t:.1}</text>"#, ypos(t) + 4.0);
    }
    let line = |pts: Vec<(f64, f64)>, style: &str| -> String {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        format!("<polyline points=\"{}\" fill=\"none\" {style}/>\n", p.join(" "))
    };
    if let Some(c) = &report.single_curve {
        for cfg in &c.per_config {
            let pts = c.points.iter().zip(&cfg.bad_fractions).map(|(p, f)| (xpos(p.size), ypos(*f))).collect();
            s.push_str(&line(pts, r##"stroke="#ccc""##));
        }
        let pts = c.points.iter().map(|p| (xpos(p.size), ypos(p.bad_fraction))).collect();
        s.push_str(&line(pts, r##"stroke="#3060c0" stroke-width="2""##));
    }
    if let Some(c) = &report.multi_curve {
        let mut band: Vec<(f64, f64)> = c.points.iter().map(|p| (xpos(p.size), ypos(p.ci_high))).collect();
        band.extend(c.points.iter().rev().map(|p| (xpos(p.size), ypos(p.ci_low))));
        let p: Vec<String> = band.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="#e08020" fill-opacity="0.25"/>"##, p.join(" "));
        let pts = c.points.iter().map(|p| (xpos(p.size), ypos(p.bad_fraction))).collect();
        s.push_str(&line(pts, r##"stroke="#e08020" stroke-width="2""##));
    }
    let lx = x0 + w + 15;
    let _ = writeln!(s, r##"<text x="{lx}" y="{}" fill="#3060c0">single-config mean</text>"##, y0 + 15);
    let _ = writeln!(s, r##"<text x="{lx}" y="{}" fill="#999">single configs</text>"##, y0 + 31);
    let _ = writeln!(s, r##"<text x="{lx}" y="{}" fill="#e08020">multi-config (95% CI)</text>"##, y0 + 47);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}">ensemble size N</text>"#, y0 + h + 40);
    s.push_str("</svg>\n");
    s
}

/// Writes every report artifact for `campaigns` into `out_dir`. The output
/// is a pure function of the stored records and plans.
pub fn make_reports(campaigns: &[&Campaign], out_dir: &Path) -> Result<ReportSet> {
    write_reports(campaigns, out_dir, false)
}

/// Writes only the ensemble artifacts (`table3.*`, `ensemble_curves*`) for
/// one campaign and returns the written paths.
pub fn write_ensemble_reports(campaign: &Campaign, out_dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(write_reports(&[campaign], out_dir, true)?.files)
}

fn write_reports(campaigns: &[&Campaign], out_dir: &Path, ensemble_only: bool) -> Result<ReportSet> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let reports: Vec<CampaignReport> = campaigns.iter().map(|c| campaign_report(c)).collect::<Result<_>>()?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        if ensemble_only && !(name.starts_with("table3") || name.starts_with("ensemble_curves")) {
            return Ok(());
        }
        let path = out_dir.join(name);
        binio::write_atomic(&path, bytes)?;
        files.push(path);
        Ok(())
    };

    let mut t1 = Table::new(&["data", "problem", "mean_iauc", "bad_configs", "configs", "runs"]);
    let mut t2 = Table::new(&[
        "data", "problem", "spearman_rho", "rho_std_across_configs", "rho_std_bootstrap",
        "degenerate_configs", "high_delta_iauc", "high_config", "low_delta_iauc", "low_config",
    ]);
    let mut t3 = Table::new(&[
        "data", "problem", "n1", "n1_ci_low", "n1_ci_high", "n20_single", "n20_single_ci_low",
        "n20_single_ci_high", "n20_multi", "n20_multi_ci_low", "n20_multi_ci_high",
    ]);
    let mut t3_view = Table::new(&["data", "problem", "N=1 %", "N=20 single %", "N=20 multi %"]);
    let mut curves = Table::new(&["data", "problem", "strategy", "series", "size", "bad_fraction", "ci_low", "ci_high"]);
    let mut dist = Table::new(&["data", "problem", "config_id", "bin_low", "bin_high", "count", "cumulative_fraction"]);
    let mut guides = Table::new(&[
        "data", "problem", "config_id", "runs", "mean_iauc", "fraction_below_guide", "guide_iauc",
        "guide_fraction", "is_bad",
    ]);
    let mut heat = Table::new(&[
        "data", "problem", "acc_bin_low", "acc_bin_high", "iauc_bin_low", "iauc_bin_high", "count",
        "column_fraction",
    ]);
    let mut cols = Table::new(&["data", "problem", "acc_bin_low", "acc_bin_high", "column_total"]);

    for r in &reports {
        let id = [r.data.clone(), r.problem.clone()];
        let row = |rest: Vec<String>| id.iter().cloned().chain(rest).collect::<Vec<String>>();
        t1.rows.push(row(vec![
            opt(r.table1.mean_iauc),
            r.table1.bad_configs.to_string(),
            r.table1.configs.to_string(),
            r.table1.runs.to_string(),
        ]));
        let t = &r.table2;
        let extreme = |e: &Option<(String, f64)>| match e {
            Some((id, v)) => [num(*v), id.clone()],
            None => ["NA".into(), "NA".into()],
        };
        let [hv, hc] = extreme(&t.high_delta_iauc);
        let [lv, lc] = extreme(&t.low_delta_iauc);
        t2.rows.push(row(vec![
            opt(t.spearman_mean),
            opt(t.spearman_std_configs),
            opt(t.spearman_std_bootstrap),
            t.degenerate_configs.to_string(),
            hv,
            hc,
            lv,
            lc,
        ]));
        let mut cells = Vec::new();
        for e in [&r.table3.n1, &r.table3.n20_single, &r.table3.n20_multi] {
            cells.extend(est_cells(e));
        }
        t3.rows.push(row(cells));
        t3_view.rows.push(row(vec![pct(&r.table3.n1), pct(&r.table3.n20_single), pct(&r.table3.n20_multi)]));

        if let Some(c) = &r.single_curve {
            for (i, p) in c.points.iter().enumerate() {
                curves.rows.push(row(vec!["single".into(), "mean".into(), p.size.to_string(), num(p.bad_fraction), num(p.ci_low), num(p.ci_high)]));
                for cfg in &c.per_config {
                    let f = cfg.bad_fractions[i];
                    curves.rows.push(row(vec!["single".into(), cfg.config_id.clone(), p.size.to_string(), num(f), "NA".into(), "NA".into()]));
                }
            }
        }
        if let Some(c) = &r.multi_curve {
            for p in &c.points {
                curves.rows.push(row(vec!["multi".into(), "mean".into(), p.size.to_string(), num(p.bad_fraction), num(p.ci_low), num(p.ci_high)]));
            }
        }
        for (h, s) in r.histograms.iter().zip(&r.configs) {
            for (b, (&c, &cum)) in h.counts.iter().zip(&h.cumulative).enumerate() {
                dist.rows.push(row(vec![
                    h.config_id.clone(),
                    num(b as f64 / HIST_BINS as f64),
                    num((b + 1) as f64 / HIST_BINS as f64),
                    c.to_string(),
                    num(cum),
                ]));
            }
            guides.rows.push(row(vec![
                h.config_id.clone(),
                s.iauc_values.len().to_string(),
                num(s.mean_iauc),
                num(h.fraction_below),
                num(BAD_IAUC),
                num(BAD_FRACTION),
                h.is_bad.to_string(),
            ]));
        }
        let acc_w = (1.0 - ACC_LOW) / ACC_BINS as f64;
        for a in 0..ACC_BINS {
            let (lo, hi) = (ACC_LOW + a as f64 * acc_w, ACC_LOW + (a + 1) as f64 * acc_w);
            cols.rows.push(row(vec![num(lo), num(hi), r.heatmap.column_totals[a].to_string()]));
            for i in 0..IAUC_BINS {
                heat.rows.push(row(vec![
                    num(lo),
                    num(hi),
                    num(i as f64 / IAUC_BINS as f64),
                    num((i + 1) as f64 / IAUC_BINS as f64),
                    r.heatmap.counts[a][i].to_string(),
                    num(r.heatmap.column_fraction(a, i)),
                ]));
            }
        }
    }

    put("table1.csv", &t1.csv()?)?;
    put("table1.svg", t1.svg("Attention explanation performance").as_bytes())?;
    put("table2.csv", &t2.csv()?)?;
    put("table2.svg", t2.svg("Validation accuracy as a predictor of IAUC").as_bytes())?;
    put("table3.csv", &t3.csv()?)?;
    put("table3.svg", t3_view.svg("Fraction of bad explanations with ensembling").as_bytes())?;
    put("ensemble_curves.csv", &curves.csv()?)?;
    put("iauc_distribution.csv", &dist.csv()?)?;
    put("iauc_guides.csv", &guides.csv()?)?;
    put("accuracy_iauc.csv", &heat.csv()?)?;
    put("accuracy_iauc_columns.csv", &cols.csv()?)?;
    for r in &reports {
        put(&format!("ensemble_curves_{}.svg", r.slug), curves_svg(r).as_bytes())?;
        put(&format!("iauc_distribution_{}.svg", r.slug), histogram_svg(r).as_bytes())?;
        put(&format!("accuracy_iauc_{}.svg", r.slug), heatmap_svg(r).as_bytes())?;
    }
    let set = ReportSet {
        campaigns: reports,
        files: Vec::new(),
    };
    let mut summary = serde_json::to_vec_pretty(&set).map_err(|e| Error::Internal(format!("summary: {e}")))?;
    summary.push(b'\n');
    put("summary.json", &summary)?;
    Ok(ReportSet { files, ..set })
}
