//! Multi-expert soft-voting inference: each expert preprocesses, extracts,
//! pools, and scores an image independently; the final probability is the
//! arithmetic mean of the expert probabilities.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{gray_to_rgb, preprocess, ExpertKind, ManifestRecord};
use crate::error::{Error, Result};
use crate::features::{head_forward, Extractor, ExtractorRef};
use crate::image::ImageBuffer;
use crate::trainer::Checkpoint;

/// One expert as configured: a preprocessing profile, the extractor to load,
/// and the trained parameters to score with.
#[derive(Debug, Clone)]
pub struct ExpertConfig {
    pub kind: ExpertKind,
    pub extractor: ExtractorRef,
    pub checkpoint: Checkpoint,
}

/// Ordered list of experts; the vote weighs each equally.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub experts: Vec<ExpertConfig>,
}

impl EnsembleConfig {
    /// Number of experts in the vote.
    pub fn k(&self) -> usize {
        self.experts.len()
    }

    /// Materializes every extractor and checks each checkpoint's head
    /// dimension against the features its extractor produces.
    pub fn load(&self) -> Result<Ensemble> {
        if self.experts.is_empty() {
            return Err(Error::invalid("ensemble needs at least one expert"));
        }
        let mut experts = Vec::with_capacity(self.experts.len());
        for (i, cfg) in self.experts.iter().enumerate() {
            cfg.kind.validate()?;
            let extractor = Extractor::load(&cfg.extractor)?;
            if cfg.checkpoint.dim() != extractor.dim() {
                return Err(Error::shape(format!(
                    "expert {i}: checkpoint dim {} != extractor dim {} ({})",
                    cfg.checkpoint.dim(),
                    extractor.dim(),
                    cfg.extractor.descriptor()
                )));
            }
            experts.push(LoadedExpert {
                kind: cfg.kind.clone(),
                extractor,
                checkpoint: cfg.checkpoint.clone(),
            });
        }
        Ok(Ensemble { experts })
    }
}

/// An expert ready to score images.
#[derive(Debug, Clone)]
pub struct LoadedExpert {
    pub kind: ExpertKind,
    pub extractor: Extractor,
    pub checkpoint: Checkpoint,
}

/// A loaded, validated ensemble.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub experts: Vec<LoadedExpert>,
}

impl Ensemble {
    pub fn k(&self) -> usize {
        self.experts.len()
    }
}

/// The ensemble's verdict on one item.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub item_id: String,
    pub per_expert: Vec<f64>,
    pub p_final: f64,
    pub latency_ms: Option<f64>,
}

/// One expert's probability that the image is AI-generated: preprocess with
/// the expert's profile, extract features, pool, and apply the linear head.
pub fn predict_expert(expert: &LoadedExpert, img: &ImageBuffer, item_id: &str) -> Result<f64> {
    let tensor = preprocess(img, &expert.kind)?;
    let fm = expert.extractor.extract(&tensor, item_id)?;
    head_forward(&expert.checkpoint.head, fm.pooled())
}

/// Equal-weight soft vote: the arithmetic mean of expert probabilities.
/// A unanimous vote returns the shared value exactly — sum-then-divide can
/// drift by an ulp, and unanimity must not.
pub fn soft_vote(per_expert: &[f64]) -> Result<f64> {
    if per_expert.is_empty() {
        return Err(Error::invalid("soft vote needs at least one probability"));
    }
    if per_expert.iter().all(|&p| p == per_expert[0]) {
        return Ok(per_expert[0]);
    }
    Ok(per_expert.iter().sum::<f64>() / per_expert.len() as f64)
}

/// Runs every expert on one image and averages their probabilities.
pub fn ensemble_predict(ensemble: &Ensemble, img: &ImageBuffer, item_id: &str) -> Result<Prediction> {
    let start = Instant::now();
    let mut per_expert = Vec::with_capacity(ensemble.k());
    for expert in &ensemble.experts {
        per_expert.push(predict_expert(expert, img, item_id)?);
    }
    let p_final = soft_vote(&per_expert)?;
    Ok(Prediction {
        item_id: item_id.to_string(),
        per_expert,
        p_final,
        latency_ms: Some(start.elapsed().as_secs_f64() * 1000.0),
    })
}

/// Outcome of a batch-inference run: rows written plus the records that had
/// to be skipped (manifest index and reason).
#[derive(Debug, Clone, PartialEq)]
pub struct InferSummary {
    pub rows_written: usize,
    pub skipped: Vec<(usize, String)>,
}

/// Scores every manifest record and writes a CSV with header
/// `item_id,p_final,p_1..p_K` in manifest order, probabilities fixed to six
/// decimals. An item whose image cannot be loaded is logged and skipped; the
/// run continues. Items are scored in parallel and emitted in order.
pub fn batch_infer<L>(
    ensemble: &Ensemble,
    records: &[ManifestRecord],
    load: L,
    out_path: &Path,
) -> Result<InferSummary>
where
    L: Fn(&ManifestRecord) -> Result<ImageBuffer> + Sync,
{
    let rows: Vec<std::result::Result<Prediction, String>> = records
        .par_iter()
        .map(|record| match load(record) {
            Err(e) => Err(format!("could not load {}: {e}", record.path)),
            Ok(img) => {
                let img = gray_to_rgb(&img);
                ensemble_predict(ensemble, &img, &record.path).map_err(|e| e.to_string())
            }
        })
        .collect();

    let file = std::fs::File::create(out_path)?;
    let mut out = std::io::BufWriter::new(file);
    let header: Vec<String> = std::iter::once("item_id".to_string())
        .chain(std::iter::once("p_final".to_string()))
        .chain((1..=ensemble.k()).map(|k| format!("p_{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;

    let mut summary = InferSummary { rows_written: 0, skipped: Vec::new() };
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Err(reason) => {
                log::warn!("skipping manifest row {i}: {reason}");
                summary.skipped.push((i, reason));
            }
            Ok(pred) => {
                let mut fields = vec![pred.item_id.clone(), format!("{:.6}", pred.p_final)];
                fields.extend(pred.per_expert.iter().map(|p| format!("{p:.6}")));
                writeln!(out, "{}", fields.join(","))?;
                summary.rows_written += 1;
            }
        }
    }
    out.flush()?;
    Ok(summary)
}
