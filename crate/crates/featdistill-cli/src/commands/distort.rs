//! Seeded degradation of an image set. Every output derives from the root
//! seed plus the item's position and variant index, so reruns — at any
//! `--jobs` value — produce identical bytes.
//!
//! Outputs: one PNG per (input, variant), a `specs.jsonl` log of the applied
//! operator settings, and — when the inputs came from a manifest — a
//! `manifest.jsonl` whose records point at the degraded images and carry the
//! applied spec. An unreadable input is a per-file warning; the command only
//! fails when every input fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use featdistill::dataset::{load_manifest, ManifestRecord};
use featdistill::distortion::{apply, sample_spec, DistortionSpec};
use featdistill::image::io::{load_image, save_png};
use featdistill::rng::{derive_seed, SeededRng};

use crate::commands::thread_pool;
use crate::{CmdError, CmdResult, DistortArgs};

/// One input: output naming stem, where to read it, what to log as its
/// source, and its manifest record when inputs come from a manifest.
struct InputItem {
    stem: String,
    path: PathBuf,
    source: String,
    record: Option<ManifestRecord>,
}

/// One line of `specs.jsonl`.
#[derive(Serialize)]
struct SpecRow<'a> {
    item: &'a str,
    source: &'a str,
    spec: &'a Option<DistortionSpec>,
}

/// One written output image and the operator settings that produced it.
struct Produced {
    file_name: String,
    spec: Option<DistortionSpec>,
}

pub fn run(args: &DistortArgs) -> CmdResult {
    if args.count == 0 {
        return Err(CmdError::config("count must be positive"));
    }
    let inputs = collect_inputs(args)?;
    if inputs.is_empty() {
        return Err(CmdError::run("no input images found"));
    }
    fs::create_dir_all(&args.output)
        .map_err(|e| CmdError::run(format!("{}: {e}", args.output.display())))?;

    let pool = thread_pool(args.jobs)?;
    let results: Vec<Result<Vec<Produced>, String>> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, item)| {
                degrade_one(args, i, item).map_err(|e| format!("{}: {e}", item.path.display()))
            })
            .collect()
    });

    let mut specs = String::new();
    let mut manifest = String::new();
    let mut written = 0usize;
    let mut failed = 0usize;
    for (item, result) in inputs.iter().zip(&results) {
        match result {
            Err(why) => {
                log::warn!("skipping {why}");
                failed += 1;
            }
            Ok(rows) => {
                for row in rows {
                    let spec_line = serde_json::to_string(&SpecRow {
                        item: &row.file_name,
                        source: &item.source,
                        spec: &row.spec,
                    })
                    .map_err(CmdError::run)?;
                    writeln!(specs, "{spec_line}").expect("string write");
                    if let Some(record) = &item.record {
                        let degraded = ManifestRecord {
                            path: row.file_name.clone(),
                            label: record.label,
                            source: record.source.clone(),
                            split: record.split,
                            distortion: row.spec.clone(),
                        };
                        let line = serde_json::to_string(&degraded).map_err(CmdError::run)?;
                        writeln!(manifest, "{line}").expect("string write");
                    }
                    written += 1;
                }
            }
        }
    }
    if written == 0 {
        return Err(CmdError::run(format!("all {failed} inputs failed")));
    }
    fs::write(args.output.join("specs.jsonl"), specs)
        .map_err(|e| CmdError::run(format!("specs.jsonl: {e}")))?;
    if args.manifest.is_some() {
        fs::write(args.output.join("manifest.jsonl"), manifest)
            .map_err(|e| CmdError::run(format!("manifest.jsonl: {e}")))?;
    }
    log::info!(
        "wrote {written} degraded images to {} ({failed} inputs skipped)",
        args.output.display()
    );
    Ok(())
}

/// Degrades one input: variant v draws its spec from a seed derived from
/// (root seed, item ordinal, v), applies it (clean mode re-encodes the
/// original), and saves a PNG named by ordinal, stem, and variant.
fn degrade_one(
    args: &DistortArgs,
    ordinal: usize,
    item: &InputItem,
) -> featdistill::Result<Vec<Produced>> {
    let img = load_image(&item.path)?;
    let item_seed = derive_seed(args.seed, ordinal as u64);
    let mut out = Vec::with_capacity(args.count);
    for variant in 0..args.count {
        let mut rng = SeededRng::new(derive_seed(item_seed, variant as u64));
        let spec = sample_spec(&mut rng, args.mode)?;
        let degraded = match &spec {
            Some(s) => apply(s, &img)?,
            None => img.clone(),
        };
        let file_name = format!("{ordinal:05}_{}_{variant:02}.png", item.stem);
        save_png(&degraded, &args.output.join(&file_name))?;
        out.push(Produced { file_name, spec });
    }
    Ok(out)
}

/// Lists the inputs in a stable order: directory entries sorted by file
/// name, or manifest records in file order with paths resolved against the
/// manifest's directory.
fn collect_inputs(args: &DistortArgs) -> Result<Vec<InputItem>, CmdError> {
    match (&args.input, &args.manifest) {
        (Some(dir), None) => {
            let entries = fs::read_dir(dir)
                .map_err(|e| CmdError::run(format!("{}: {e}", dir.display())))?;
            let mut names: Vec<String> = entries
                .filter_map(|entry| entry.ok())
                .filter(|entry| entry.path().is_file())
                .filter_map(|entry| entry.file_name().into_string().ok())
                .filter(|name| {
                    let lower = name.to_ascii_lowercase();
                    lower.ends_with(".png") || lower.ends_with(".jpg") || lower.ends_with(".jpeg")
                })
                .collect();
            names.sort_unstable();
            Ok(names
                .into_iter()
                .map(|name| InputItem {
                    stem: stem_of(&name),
                    path: dir.join(&name),
                    source: name,
                    record: None,
                })
                .collect())
        }
        (None, Some(manifest)) => {
            let records = load_manifest(manifest).map_err(CmdError::from)?;
            let root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
            Ok(records
                .into_iter()
                .map(|r| InputItem {
                    stem: stem_of(&r.path),
                    path: root.join(&r.path),
                    source: r.path.clone(),
                    record: Some(r),
                })
                .collect())
        }
        // clap enforces the exclusivity; this is the defensive fallback.
        _ => Err(CmdError::config("exactly one of --input or --manifest is required")),
    }
}

fn stem_of(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "item".to_string())
}
