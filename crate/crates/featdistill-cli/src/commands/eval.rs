//! Joins a predictions CSV with its manifest and writes the robustness
//! report: overall ROC-AUC plus per-operator and per-severity breakdowns.
//! The report JSON is written to `--report` and a plain-text table goes to
//! stdout.

use std::fs;

use featdistill::dataset::load_manifest;
use featdistill::metrics::{join_predictions, robust_report};
use featdistill::Error;

use crate::{CmdError, CmdResult, EvalArgs};

pub fn run(args: &EvalArgs) -> CmdResult {
    let csv_text = fs::read_to_string(&args.predictions)
        .map_err(|e| CmdError::run(format!("{}: {e}", args.predictions.display())))?;
    let records = load_manifest(&args.manifest).map_err(CmdError::from)?;
    let items = join_predictions(&csv_text, &records)?;
    if items.is_empty() {
        return Err(Error::invalid(format!(
            "no items to evaluate: {} has no data rows matching the manifest",
            args.predictions.display()
        ))
        .into());
    }
    let report = robust_report(&items)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(CmdError::run)?;
    json.push('\n');
    fs::write(&args.report, json)
        .map_err(|e| CmdError::run(format!("{}: {e}", args.report.display())))?;
    print!("{}", report.text_table());
    Ok(())
}
