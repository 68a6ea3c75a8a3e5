//! Trains every configured expert through both stages and emits
//! deterministic artifacts: binary checkpoints, JSONL step logs, and an
//! `ensemble.json` that `infer` consumes. Expert k trains with a seed
//! derived from the run seed and k, so adding an expert never perturbs the
//! others.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use featdistill::dataset::{balanced_batches, load_manifest, ExpertKind, ManifestRecord};
use featdistill::distortion::PipelineMode;
use featdistill::features::{Extractor, ExtractorRef};
use featdistill::image::io::load_image;
use featdistill::image::ImageBuffer;
use featdistill::rng::derive_seed;
use featdistill::trainer::{
    save_checkpoint, train_stage1, train_stage2, BatchSource, StepRecord, TrainBatch,
    TrainConfig,
};
use featdistill::Error;

use crate::commands::thread_pool;
use crate::config::{load_toml, EnsembleFile, ExpertEntry, TrainRunConfig};
use crate::{CmdError, CmdResult, TrainArgs};

/// Batch producer over manifest records: re-plans and re-augments every
/// epoch from an epoch-derived seed. With `synthetic_images` set it feeds a
/// flat placeholder instead of reading pixels, for corpora whose extractors
/// look items up by id.
struct EpochSource<'a> {
    records: &'a [ManifestRecord],
    root: &'a Path,
    synthetic_images: bool,
    expert: ExpertKind,
    mode: PipelineMode,
    batch_size: usize,
    seed: u64,
}

impl BatchSource for EpochSource<'_> {
    fn epoch(&self, epoch: usize) -> featdistill::Result<Vec<TrainBatch>> {
        let load = |r: &ManifestRecord| -> featdistill::Result<ImageBuffer> {
            if self.synthetic_images {
                ImageBuffer::constant(16, 16, 3, 0.5)
            } else {
                load_image(&self.root.join(&r.path))
            }
        };
        let batches = balanced_batches(
            self.records,
            load,
            &self.expert,
            self.mode,
            self.batch_size,
            derive_seed(self.seed, epoch as u64),
        )?;
        Ok(batches
            .into_iter()
            .map(|b| TrainBatch {
                labels: b.labels,
                item_ids: b.item_ids.iter().map(|&i| self.records[i].path.clone()).collect(),
                tensors: b.tensors,
            })
            .collect())
    }
}

fn steps_jsonl(steps: &[StepRecord]) -> Result<String, CmdError> {
    let mut out = String::new();
    for step in steps {
        let line = serde_json::to_string(step).map_err(CmdError::run)?;
        writeln!(out, "{line}").expect("string write");
    }
    Ok(out)
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let cfg: TrainRunConfig = load_toml(&args.config)?;
    cfg.validate()?;

    let records: Vec<ManifestRecord> = load_manifest(&args.manifest)
        .map_err(CmdError::from)?
        .into_iter()
        .filter(|r| r.split == cfg.split)
        .collect();
    if records.is_empty() {
        return Err(CmdError::run("manifest has no records in the configured split"));
    }
    let manifest_dir = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    fs::create_dir_all(&args.output)
        .map_err(|e| CmdError::run(format!("{}: {e}", args.output.display())))?;

    let pool = thread_pool(args.jobs)?;
    let mut trained = Vec::with_capacity(cfg.experts.len());
    for (k, entry) in cfg.experts.iter().enumerate() {
        let kind = entry.expert_kind()?;
        let extractor_ref = entry.extractor.to_ref(&manifest_dir)?;
        if let ExtractorRef::EmbeddingFile { path } = &extractor_ref {
            if !path.exists() {
                return Err(Error::NotFound(path.display().to_string()).into());
            }
        }
        let extractor = Extractor::load(&extractor_ref)?;
        let train_cfg = TrainConfig { seed: derive_seed(cfg.seed, k as u64), ..cfg.train.clone() };
        let source = EpochSource {
            records: &records,
            root: &manifest_dir,
            synthetic_images: cfg.synthetic_images,
            expert: kind,
            mode: cfg.mode,
            batch_size: cfg.batch_size,
            seed: derive_seed(train_cfg.seed, 0xBA7C),
        };

        let run1 = pool.install(|| train_stage1(&train_cfg, &source, &extractor))?;
        let stage1_name = format!("{}.stage1.ckpt", entry.name);
        save_checkpoint(&args.output.join(&stage1_name), &run1.checkpoint)?;
        fs::write(
            args.output.join(format!("{}.stage1.steps.jsonl", entry.name)),
            steps_jsonl(&run1.steps)?,
        )
        .map_err(|e| CmdError::run(format!("step log: {e}")))?;

        let mut final_name = stage1_name;
        if train_cfg.stage2_epochs > 0 {
            let run2 = pool.install(|| train_stage2(&train_cfg, &source, &extractor, &run1.checkpoint))?;
            let stage2_name = format!("{}.stage2.ckpt", entry.name);
            save_checkpoint(&args.output.join(&stage2_name), &run2.checkpoint)?;
            fs::write(
                args.output.join(format!("{}.stage2.steps.jsonl", entry.name)),
                steps_jsonl(&run2.steps)?,
            )
            .map_err(|e| CmdError::run(format!("step log: {e}")))?;
            final_name = stage2_name;
        }
        log::info!("trained expert '{}' on {} records", entry.name, records.len());
        // Checkpoint paths stay relative to ensemble.json so the whole
        // output directory can be moved or compared byte-for-byte.
        trained.push(ExpertEntry {
            checkpoint: Some(PathBuf::from(final_name)),
            ..entry.clone()
        });
    }

    let ensemble = EnsembleFile { experts: trained };
    let mut json = serde_json::to_string_pretty(&ensemble).map_err(CmdError::run)?;
    json.push('\n');
    fs::write(args.output.join("ensemble.json"), json)
        .map_err(|e| CmdError::run(format!("ensemble.json: {e}")))?;
    Ok(())
}
