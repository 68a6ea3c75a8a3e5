//! Ensemble inference over a manifest: loads every expert's checkpoint and
//! extractor, scores items in parallel, and writes the predictions CSV in
//! manifest order. Missing checkpoint or embedding files fail up front with
//! the offending path; an item whose image cannot be read is skipped with a
//! warning and the rest of the run continues.

use std::path::Path;

use featdistill::dataset::{load_manifest, ManifestRecord};
use featdistill::ensemble::{batch_infer, EnsembleConfig, ExpertConfig};
use featdistill::features::ExtractorRef;
use featdistill::image::io::load_image;
use featdistill::image::ImageBuffer;
use featdistill::trainer::load_checkpoint;
use featdistill::Error;

use crate::commands::thread_pool;
use crate::config::{load_json, EnsembleFile};
use crate::{CmdError, CmdResult, InferArgs};

pub fn run(args: &InferArgs) -> CmdResult {
    let file: EnsembleFile = load_json(&args.config)?;
    if file.experts.is_empty() {
        return Err(CmdError::config("ensemble has no experts"));
    }
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    let records = load_manifest(&args.manifest).map_err(CmdError::from)?;
    let manifest_dir = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();

    let mut experts = Vec::with_capacity(file.experts.len());
    for entry in &file.experts {
        let kind = entry.expert_kind()?;
        let extractor = entry.extractor.to_ref(&manifest_dir)?;
        if let ExtractorRef::EmbeddingFile { path } = &extractor {
            if !path.exists() {
                return Err(Error::NotFound(path.display().to_string()).into());
            }
        }
        let ckpt_rel = entry.checkpoint.as_ref().ok_or_else(|| {
            CmdError::config(format!("expert '{}': ensemble entry has no checkpoint", entry.name))
        })?;
        let ckpt_path = config_dir.join(ckpt_rel);
        if !ckpt_path.exists() {
            return Err(Error::NotFound(ckpt_path.display().to_string()).into());
        }
        let checkpoint = load_checkpoint(&ckpt_path)?;
        experts.push(ExpertConfig { kind, extractor, checkpoint });
    }
    let ensemble = EnsembleConfig { experts }.load()?;

    let load = |r: &ManifestRecord| -> featdistill::Result<ImageBuffer> {
        if args.synthetic_images {
            ImageBuffer::constant(16, 16, 3, 0.5)
        } else {
            load_image(&manifest_dir.join(&r.path))
        }
    };
    let pool = thread_pool(args.jobs)?;
    let summary = pool.install(|| batch_infer(&ensemble, &records, load, &args.output))?;

    if summary.rows_written == 0 && !records.is_empty() {
        return Err(CmdError::run("no items could be scored"));
    }
    if !summary.skipped.is_empty() {
        log::warn!("skipped {} of {} items", summary.skipped.len(), records.len());
    }
    log::info!("wrote {} prediction rows to {}", summary.rows_written, args.output.display());
    Ok(())
}
