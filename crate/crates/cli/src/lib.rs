//! Pipeline orchestration behind the `fieldseg` command.

pub mod config;
pub mod pipeline;

use std::path::Path;

use fieldseg::classify::{cross_validate, load_manifest, train_forest, Confusion, CvReport, ForestModel, ForestParams, LabeledParcel};
use fieldseg::Result;

pub use config::{RunConfig, Stages};

/// Cross-validates on the manifest, then fits the final model on all of it
/// and saves it to `out_model`.
pub fn train_command(manifest: &Path, out_model: &Path, folds: usize, params: &ForestParams, seed: u64) -> Result<(CvReport, ForestModel)> {
    let data: Vec<LabeledParcel> = load_manifest(manifest)?.into_iter().map(|(_, d)| d).collect();
    log::info!("{} training samples", data.len());
    let report = cross_validate(&data, folds, params, seed)?;
    let model = train_forest(&data, params, seed)?;
    model.save(out_model)?;
    Ok((report, model))
}

/// Confusion matrix with actual classes as rows.
pub fn format_confusion(c: &Confusion) -> String {
    let m = c.0;
    let mut s = String::new();
    s.push_str(&format!("{:<10}{:>10}{:>10}\n", "actual", "Ag", "Non-Ag"));
    s.push_str(&format!("{:<10}{:>10}{:>10}\n", "Ag", m[0][0], m[0][1]));
    s.push_str(&format!("{:<10}{:>10}{:>10}\n", "Non-Ag", m[1][0], m[1][1]));
    s
}
