//! Experiment orchestration: manifests, campaigns, reports and the
//! command-line front end.

mod campaign;
pub mod cli;
mod manifest;
mod report;
mod verify;

pub use campaign::{run_seed, Campaign, CampaignIndex, Phase, RankEntry};
pub use manifest::{
    DatasetSection, DeskSection, EnsembleSection, Grid, GridPoint, Manifest, Plan, Sources,
    DESK_TRAIN_BAGS,
};
pub use report::{
    build_report, campaign_report, make_reports, write_ensemble_reports, CampaignReport, Estimate, Heatmap,
    Histogram, ReportSet, Table1Row, Table2Row, Table3Row,
};
pub use verify::{
    auroc_mismatches, average_sum_error, gradient_max_error, grid_architectures, pair_count_auroc,
    permutation_check, run_self_tests, SelfTest,
};
