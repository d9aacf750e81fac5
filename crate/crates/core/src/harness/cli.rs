//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::campaign::Campaign;
use super::manifest::Manifest;
use super::report::{make_reports, write_ensemble_reports};
use super::verify::run_self_tests;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mil-audit", version, about = "Audit attention explanations of multiple-instance classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment manifest (TOML).
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Campaign directory (defaults to the manifest's `output_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use the reduced desk-scale grid, seeds and repetitions.
    #[arg(long)]
    desk_scale: bool,
    /// Worker threads (default: available cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Override the manifest's master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Keep runs that are already stored instead of retraining them.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and store the campaign dataset.
    Generate(Common),
    /// Grid search: train every configuration and rank by validation accuracy.
    Search(Common),
    /// Repetition runs of the top (or named) configurations.
    Repeat {
        #[command(flatten)]
        common: Common,
        /// Repetitions per configuration.
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Comma-separated configuration ids (default: the top-ranked ones).
        #[arg(long, value_delimiter = ',', value_name = "IDS")]
        configs: Option<Vec<String>>,
    },
    /// Ensemble curves and the ensembling table.
    Ensemble(Common),
    /// All tables and figures.
    Report {
        #[command(flatten)]
        common: Common,
        /// Additional campaign directories to include (repeatable). With this
        /// flag the reports are written to `--out` itself.
        #[arg(long, value_name = "DIR")]
        campaign: Vec<PathBuf>,
    },
    /// Gradient and invariant self-tests.
    Verify(Common),
}

fn threads(common: &Common) -> usize {
    common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn open_campaign(common: &Common) -> Result<Campaign> {
    let manifest = common.manifest.as_deref().map(Manifest::load).transpose()?;
    let out = common
        .out
        .clone()
        .or_else(|| manifest.as_ref().and_then(|m| m.output_dir.clone()))
        .ok_or_else(|| Error::Config("no campaign directory: pass --out or set output_dir".into()))?;
    let campaign = match manifest {
        Some(m) => Campaign::create(&out, m.resolve(common.desk_scale, common.seed)?)?,
        None => Campaign::open(&out)?,
    };
    Ok(campaign.verbose(true))
}

fn report_dir(campaign: &Campaign) -> PathBuf {
    campaign.dir().join("reports")
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Generate(c) => {
            let campaign = open_campaign(&c)?;
            let data = campaign.generate()?;
            println!(
                "dataset: {} train / {} validation / {} test bags, dim {} -> {}",
                data.train.len(),
                data.validation.len(),
                data.test.len(),
                data.input_dim(),
                campaign.dir().join("dataset").display()
            );
        }
        Command::Search(c) => {
            let campaign = open_campaign(&c)?;
            let ranking = campaign.search(threads(&c), c.resume)?;
            println!("rank  mean_val_acc  runs  diverged  config");
            for (i, e) in ranking.iter().enumerate() {
                let acc = e.mean_validation_accuracy.map_or("n/a".into(), |a| format!("{a:.4}"));
                println!("{:>4}  {acc:>12}  {:>4}  {:>8}  {}", i + 1, e.runs, e.diverged, e.config_id);
            }
        }
        Command::Repeat { common, n, configs } => {
            let campaign = open_campaign(&common)?;
            let records = campaign.repeat(configs.as_deref(), n, threads(&common), common.resume)?;
            println!("{} repetition records", records.len());
        }
        Command::Ensemble(c) => {
            let campaign = open_campaign(&c)?;
            print_files(&write_ensemble_reports(&campaign, &report_dir(&campaign))?);
        }
        Command::Report { common, campaign } => {
            if campaign.is_empty() {
                let c = open_campaign(&common)?;
                print_files(&make_reports(&[&c], &report_dir(&c))?.files);
            } else {
                let out = common
                    .out
                    .clone()
                    .ok_or_else(|| Error::Config("--campaign needs --out for the report directory".into()))?;
                let opened: Vec<Campaign> = campaign.iter().map(|d| Campaign::open(d)).collect::<Result<_>>()?;
                let refs: Vec<&Campaign> = opened.iter().collect();
                print_files(&make_reports(&refs, &out)?.files);
            }
        }
        Command::Verify(_) => {
            let mut ok = true;
            for t in run_self_tests() {
                println!("{} {}: {}", if t.passed { "PASS" } else { "FAIL" }, t.name, t.detail);
                ok &= t.passed;
            }
            return Ok(if ok { 0 } else { 1 });
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns 0 on success, 1 on a failed command and 2 on a usage error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 2,
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}
