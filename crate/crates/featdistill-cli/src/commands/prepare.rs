//! Materializes the self-contained toy corpora used for end-to-end pipeline
//! checks: a two-blob embedding corpus scored without touching pixels, and a
//! textured image corpus whose classes differ in fine detail that
//! degradations can destroy.

use std::fmt::Write as _;
use std::fs;

use featdistill::dataset::{ManifestRecord, Split};
use featdistill::features::write_embeddings;
use featdistill::image::io::save_png;
use featdistill::synth::{blob_embeddings, blob_id, toy_class_image};

use crate::config::{load_toml, CorpusKind, PrepareConfig};
use crate::{CmdError, CmdResult, PrepareArgs};

pub fn run(args: &PrepareArgs) -> CmdResult {
    let cfg: PrepareConfig = load_toml(&args.config)?;
    cfg.validate()?;
    fs::create_dir_all(&args.output)
        .map_err(|e| CmdError::run(format!("{}: {e}", args.output.display())))?;
    // The leading train_fraction of items goes to the train split.
    let train_items = (cfg.items as f64 * cfg.train_fraction) as usize;

    let mut manifest = String::new();
    let mut push_record = |record: &ManifestRecord| -> Result<(), CmdError> {
        let line = serde_json::to_string(record).map_err(CmdError::run)?;
        writeln!(manifest, "{line}").expect("string write");
        Ok(())
    };

    match cfg.kind {
        CorpusKind::Blobs => {
            let (store, labels) = blob_embeddings(cfg.seed, cfg.items, cfg.dim);
            write_embeddings(&args.output.join("blobs.embeddings"), &store)?;
            for (i, &label) in labels.iter().enumerate() {
                push_record(&ManifestRecord {
                    path: blob_id(i),
                    label,
                    source: "toy_blobs".to_string(),
                    split: if i < train_items { Split::Train } else { Split::Val },
                    distortion: None,
                })?;
            }
        }
        CorpusKind::Textured => {
            let images = args.output.join("images");
            fs::create_dir_all(&images)
                .map_err(|e| CmdError::run(format!("{}: {e}", images.display())))?;
            for i in 0..cfg.items {
                let label = (i % 2) as u8;
                let img = toy_class_image(label, i as u64, cfg.side);
                let name = format!("item_{i:05}.png");
                save_png(&img, &images.join(&name))?;
                push_record(&ManifestRecord {
                    path: format!("images/{name}"),
                    label,
                    source: "toy_textured".to_string(),
                    split: if i < train_items { Split::Train } else { Split::Test },
                    distortion: None,
                })?;
            }
        }
    }
    fs::write(args.output.join("manifest.jsonl"), manifest)
        .map_err(|e| CmdError::run(format!("manifest.jsonl: {e}")))?;
    log::info!("prepared {} items in {}", cfg.items, args.output.display());
    Ok(())
}
