//! Two-stage optimization: Stage 1 trains per-expert heads with binary
//! cross-entropy; Stage 2 adds dense feature self-distillation against a
//! frozen or momentum (EMA) teacher, optionally with a contrastive term fed
//! by a FIFO queue of negatives.
//!
//! All model math is `f64`, gradients are closed-form, and the optimizer is
//! plain SGD, so runs are bitwise-reproducible and easy to finite-difference.

mod checkpoint;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, Checkpoint};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{head_forward, ClassifierHead, Extractor, FeatureMap, Tensor};

/// Probability clamp for the cross-entropy loss.
pub const BCE_EPS: f64 = 1e-7;

/// Where Stage-2 teacher features come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    /// Teacher projector frozen at its Stage-2 starting point.
    FrozenCheckpoint,
    /// Teacher projector follows an EMA of the student with cosine-scheduled
    /// momentum.
    Momentum,
}

/// Hyperparameters for both stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub learning_rate: f64,
    /// Weight of the contrastive term in the Stage-2 objective.
    pub lambda_crd: f64,
    /// Weight of the dense alignment term in the Stage-2 objective.
    pub distill_weight: f64,
    /// Divide the alignment loss by token-count × dim instead of summing.
    pub distill_normalize: bool,
    pub teacher_mode: TeacherMode,
    pub m_base: f64,
    pub m_max: f64,
    pub temperature: f64,
    pub queue_capacity: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage1_epochs: 2,
            stage2_epochs: 2,
            learning_rate: 0.1,
            lambda_crd: 1.0,
            distill_weight: 1.0,
            distill_normalize: false,
            teacher_mode: TeacherMode::FrozenCheckpoint,
            m_base: 0.99,
            m_max: 0.9999,
            temperature: 0.07,
            queue_capacity: 4096,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // Zero learning rate is allowed: it makes "parameters unchanged"
        // checks expressible without a special case.
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        if !self.lambda_crd.is_finite() || self.lambda_crd < 0.0 {
            return Err(Error::invalid("lambda_crd must be finite and >= 0"));
        }
        if !self.distill_weight.is_finite() || self.distill_weight < 0.0 {
            return Err(Error::invalid("distill_weight must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.m_base) || !(0.0..=1.0).contains(&self.m_max) {
            return Err(Error::invalid("momentum bounds must lie in [0,1]"));
        }
        if self.m_base > self.m_max {
            return Err(Error::invalid("m_base must be <= m_max"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::invalid("temperature must be finite and > 0"));
        }
        Ok(())
    }
}

/// Mean binary cross-entropy over a batch; probabilities are clamped to
/// [ε, 1−ε] before the logs.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::invalid("cross-entropy over an empty batch"));
    }
    if probs.len() != labels.len() {
        return Err(Error::shape(format!("{} probs vs {} labels", probs.len(), labels.len())));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        if y > 1 {
            return Err(Error::invalid(format!("label {y} outside {{0,1}}")));
        }
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / probs.len() as f64)
}

/// Gradient of the per-item cross-entropy w.r.t. the pre-sigmoid logit.
pub fn bce_grad_logit(prob: f64, label: u8) -> f64 {
    prob - label as f64
}

/// Squared Frobenius distance between two feature maps. With
/// `normalize_by_count` the sum is divided by tokens × dim.
pub fn distill_loss(current: &FeatureMap, fixed: &FeatureMap, normalize_by_count: bool) -> Result<f64> {
    if current.tokens() != fixed.tokens() || current.dim() != fixed.dim() {
        return Err(Error::shape(format!(
            "feature maps {}x{} vs {}x{}",
            current.tokens(),
            current.dim(),
            fixed.tokens(),
            fixed.dim()
        )));
    }
    let sum: f64 =
        current.values().iter().zip(fixed.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(if normalize_by_count { sum / (current.tokens() * current.dim()) as f64 } else { sum })
}

/// FIFO buffer of unit-norm negative embeddings.
#[derive(Debug, Clone)]
pub struct NegativeQueue {
    capacity: usize,
    entries: VecDeque<Vec<f64>>,
}

impl NegativeQueue {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: VecDeque::new() }
    }

    /// Append one unit vector, evicting the oldest entry beyond capacity.
    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("queue entry norm {norm} is not 1")));
        }
        if let Some(front) = self.entries.front() {
            if front.len() != v.len() {
                return Err(Error::shape(format!(
                    "queue entry dim {} != {}",
                    v.len(),
                    front.len()
                )));
            }
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(|v| v.as_slice())
    }
}

/// Contrastive loss: −log[exp(a·p/τ) / (exp(a·p/τ) + Σ_q exp(a·q/τ))],
/// computed via a stable log-sum-exp. With an empty queue the ratio is
/// exactly 1, so the loss is exactly 0.
pub fn crd_loss(anchor: &[f64], positive: &[f64], queue: &NegativeQueue, tau: f64) -> Result<f64> {
    if anchor.is_empty() {
        return Err(Error::invalid("empty anchor"));
    }
    if anchor.len() != positive.len() {
        return Err(Error::shape("anchor/positive dim mismatch".to_string()));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::invalid("temperature must be > 0"));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let s_pos = dot(anchor, positive) / tau;
    let mut scores = vec![s_pos];
    for q in queue.iter() {
        if q.len() != anchor.len() {
            return Err(Error::shape("queue entry dim mismatch".to_string()));
        }
        scores.push(dot(anchor, q) / tau);
    }
    let m = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    Ok(lse - s_pos)
}

/// Cosine momentum schedule: m_max − (m_max − m_base)·(cos(π·g/T)+1)/2.
/// Starts at m_base, ends at m_max, non-decreasing in between.
pub fn momentum(step_global: u64, step_total: u64, m_base: f64, m_max: f64) -> Result<f64> {
    if step_total == 0 {
        return Err(Error::invalid("step_total must be >= 1"));
    }
    if step_global > step_total {
        return Err(Error::invalid(format!("step {step_global} beyond total {step_total}")));
    }
    let phase = std::f64::consts::PI * step_global as f64 / step_total as f64;
    Ok(m_max - (m_max - m_base) * (phase.cos() + 1.0) / 2.0)
}

/// Elementwise EMA: t ← m·t + (1−m)·s.
pub fn ema_update(teacher: &mut [f64], student: &[f64], m: f64) -> Result<()> {
    if teacher.len() != student.len() {
        return Err(Error::shape(format!(
            "teacher {} vs student {} parameters",
            teacher.len(),
            student.len()
        )));
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::invalid(format!("momentum {m} outside [0,1]")));
    }
    for (t, s) in teacher.iter_mut().zip(student) {
        *t = m * *t + (1.0 - m) * s;
    }
    Ok(())
}

/// Combined objective: bce + λ·crd + w·distill.
pub fn total_loss(bce: f64, crd: f64, distill: f64, lambda: f64, w_distill: f64) -> f64 {
    bce + lambda * crd + w_distill * distill
}

/// D×D identity, row-major.
pub fn identity_matrix(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for d in 0..dim {
        m[d * dim + d] = 1.0;
    }
    m
}

/// Row-major square-matrix × vector product.
pub fn matvec(mat: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let dim = v.len();
    if mat.len() != dim * dim {
        return Err(Error::shape(format!("matrix of {} entries is not {dim}x{dim}", mat.len())));
    }
    Ok((0..dim)
        .map(|r| mat[r * dim..(r + 1) * dim].iter().zip(v).map(|(m, x)| m * x).sum())
        .collect())
}

/// Apply the projector to every token of a feature map.
pub fn project_tokens(projector: &[f64], fm: &FeatureMap) -> Result<FeatureMap> {
    let mut out = Vec::with_capacity(fm.tokens() * fm.dim());
    for t in 0..fm.tokens() {
        out.extend(matvec(projector, fm.token(t))?);
    }
    FeatureMap::new(fm.tokens(), fm.dim(), out)
}

fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(Error::invalid("cannot normalize a zero vector"));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Mean cross-entropy over a batch plus its gradient w.r.t. head weights and
/// bias: mean over items of (p−y)·pooled and (p−y).
pub fn bce_with_grads(
    head: &ClassifierHead,
    pooled: &[Vec<f64>],
    labels: &[u8],
) -> Result<(f64, Vec<f64>, f64)> {
    if pooled.len() != labels.len() || pooled.is_empty() {
        return Err(Error::invalid("batch is empty or lengths disagree"));
    }
    let dim = head.weights.len();
    let mut probs = Vec::with_capacity(pooled.len());
    let mut grad_w = vec![0.0; dim];
    let mut grad_b = 0.0;
    let n = pooled.len() as f64;
    for (vec, &y) in pooled.iter().zip(labels) {
        let p = head_forward(head, vec)?;
        let g = bce_grad_logit(p, y);
        for (gw, x) in grad_w.iter_mut().zip(vec) {
            *gw += g * x / n;
        }
        grad_b += g / n;
        probs.push(p);
    }
    let loss = bce_loss(&probs, labels)?;
    Ok((loss, grad_w, grad_b))
}

/// Alignment loss for one item and its gradient w.r.t. the student
/// projector: 2·Σ_t (P·f_t − m_t)·f_tᵀ, divided by T·D when normalizing.
pub fn distill_with_grads(
    projector: &[f64],
    fm: &FeatureMap,
    fixed: &FeatureMap,
    normalize_by_count: bool,
) -> Result<(f64, Vec<f64>)> {
    let current = project_tokens(projector, fm)?;
    let loss = distill_loss(&current, fixed, normalize_by_count)?;
    let dim = fm.dim();
    let mut grad = vec![0.0; dim * dim];
    let scale = if normalize_by_count { 1.0 / (fm.tokens() * dim) as f64 } else { 1.0 };
    for t in 0..fm.tokens() {
        let f = fm.token(t);
        let c = current.token(t);
        let x = fixed.token(t);
        for r in 0..dim {
            let resid = 2.0 * (c[r] - x[r]) * scale;
            for e in 0..dim {
                grad[r * dim + e] += resid * f[e];
            }
        }
    }
    Ok((loss, grad))
}

/// Contrastive loss for one item and its gradient w.r.t. the student
/// projector. The anchor is normalize(P·pooled); the positive and the queue
/// are constants (teacher side carries no gradient).
pub fn crd_with_grads(
    projector: &[f64],
    pooled: &[f64],
    positive: &[f64],
    queue: &NegativeQueue,
    tau: f64,
) -> Result<(f64, Vec<f64>)> {
    let dim = pooled.len();
    let u = matvec(projector, pooled)?;
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(Error::invalid("projected anchor collapsed to zero"));
    }
    let anchor: Vec<f64> = u.iter().map(|x| x / norm).collect();
    let loss = crd_loss(&anchor, positive, queue, tau)?;

    // Softmax over {positive} ∪ queue of scores a·v/τ.
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut scores = vec![dot(&anchor, positive) / tau];
    let mut vectors: Vec<&[f64]> = vec![positive];
    for q in queue.iter() {
        scores.push(dot(&anchor, q) / tau);
        vectors.push(q);
    }
    let m = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();

    // dL/da = (Σ_j softmax_j·v_j − positive)/τ
    let mut dl_da = vec![0.0; dim];
    for (s, v) in scores.iter().zip(&vectors) {
        let w = (s - m).exp() / z;
        for (d, x) in dl_da.iter_mut().zip(*v) {
            *d += w * x;
        }
    }
    for (d, p) in dl_da.iter_mut().zip(positive) {
        *d = (*d - p) / tau;
    }

    // Through the normalization: dL/du = (dL/da − a·(a⋅dL/da)) / ‖u‖.
    let a_dot = dot(&anchor, &dl_da);
    let dl_du: Vec<f64> =
        dl_da.iter().zip(&anchor).map(|(g, a)| (g - a * a_dot) / norm).collect();

    // dL/dP = dL/du ⊗ pooled.
    let mut grad = vec![0.0; dim * dim];
    for r in 0..dim {
        for e in 0..dim {
            grad[r * dim + e] = dl_du[r] * pooled[e];
        }
    }
    Ok((loss, grad))
}

/// One training batch: tensors, labels, and item ids of equal length.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub tensors: Vec<Tensor>,
    pub labels: Vec<u8>,
    pub item_ids: Vec<String>,
}

impl TrainBatch {
    fn validate(&self) -> Result<()> {
        if self.tensors.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if self.tensors.len() != self.labels.len() || self.tensors.len() != self.item_ids.len() {
            return Err(Error::shape("batch field lengths disagree".to_string()));
        }
        if let Some(y) = self.labels.iter().find(|&&y| y > 1) {
            return Err(Error::invalid(format!("label {y} outside {{0,1}}")));
        }
        Ok(())
    }
}

/// Deterministic per-epoch batch producer. Epoch indices are global: Stage 2
/// continues from `stage1_epochs`, so a zero-weight Stage 2 consumes exactly
/// the batches a longer Stage 1 would have.
pub trait BatchSource {
    fn epoch(&self, epoch: usize) -> Result<Vec<TrainBatch>>;
}

/// The same batches every epoch; the simplest source.
pub struct FixedBatches(pub Vec<TrainBatch>);

impl BatchSource for FixedBatches {
    fn epoch(&self, _epoch: usize) -> Result<Vec<TrainBatch>> {
        Ok(self.0.clone())
    }
}

/// Per-step log entry. `momentum` is present only in Momentum teacher mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss_bce: f64,
    pub loss_crd: f64,
    pub loss_distill: f64,
    pub momentum: Option<f64>,
}

/// Result of a training stage: final parameters plus the full step log.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub steps: Vec<StepRecord>,
}

fn pooled_rows(extractor: &Extractor, batch: &TrainBatch) -> Result<(Vec<FeatureMap>, Vec<Vec<f64>>)> {
    let mut maps = Vec::with_capacity(batch.tensors.len());
    let mut pooled = Vec::with_capacity(batch.tensors.len());
    for (tensor, id) in batch.tensors.iter().zip(&batch.item_ids) {
        let fm = extractor.extract(tensor, id)?;
        pooled.push(fm.pooled().to_vec());
        maps.push(fm);
    }
    Ok((maps, pooled))
}

/// Stage 1: SGD on the cross-entropy objective alone. Deterministic given the
/// batch source; the head starts at zero.
pub fn train_stage1(
    config: &TrainConfig,
    source: &dyn BatchSource,
    extractor: &Extractor,
) -> Result<TrainRun> {
    config.validate()?;
    let dim = extractor.dim();
    let mut head = ClassifierHead::zeros(dim);
    let mut steps = Vec::new();
    let mut step: u64 = 0;
    for epoch in 0..config.stage1_epochs {
        for batch in source.epoch(epoch)? {
            batch.validate()?;
            let (_maps, pooled) = pooled_rows(extractor, &batch)?;
            let (loss, grad_w, grad_b) = bce_with_grads(&head, &pooled, &batch.labels)?;
            for (w, g) in head.weights.iter_mut().zip(&grad_w) {
                *w -= config.learning_rate * g;
            }
            head.bias -= config.learning_rate * grad_b;
            step += 1;
            steps.push(StepRecord {
                step,
                loss_bce: loss,
                loss_crd: 0.0,
                loss_distill: 0.0,
                momentum: None,
            });
        }
    }
    if config.stage1_epochs > 0 && steps.is_empty() {
        return Err(Error::invalid("batch source produced no batches"));
    }
    let checkpoint =
        Checkpoint { head, projector: None, step, config_hash: config_hash(config) };
    Ok(TrainRun { checkpoint, steps })
}

/// Stage 2: continues the Stage-1 head and adds the alignment and contrastive
/// terms through a trainable projector (initialized to the checkpoint's
/// projector, or the identity). The teacher projector starts as a copy and
/// either stays frozen or tracks the student by EMA.
pub fn train_stage2(
    config: &TrainConfig,
    source: &dyn BatchSource,
    extractor: &Extractor,
    stage1: &Checkpoint,
) -> Result<TrainRun> {
    config.validate()?;
    let dim = extractor.dim();
    if stage1.head.weights.len() != dim {
        return Err(Error::invalid(format!(
            "checkpoint dim {} does not match extractor dim {dim}",
            stage1.head.weights.len()
        )));
    }
    if let Some(p) = &stage1.projector {
        if p.len() != dim * dim {
            return Err(Error::invalid("checkpoint projector is not DxD"));
        }
    }

    let mut head = stage1.head.clone();
    let mut student_p = stage1.projector.clone().unwrap_or_else(|| identity_matrix(dim));
    let mut teacher_p = student_p.clone();
    let mut queue = NegativeQueue::new(config.queue_capacity);

    // Materialize all epochs up front: the momentum schedule needs the total
    // step count before the first update.
    let mut epochs = Vec::with_capacity(config.stage2_epochs);
    for e in 0..config.stage2_epochs {
        epochs.push(source.epoch(config.stage1_epochs + e)?);
    }
    let total_steps: u64 = epochs.iter().map(|b| b.len() as u64).sum();
    if config.stage2_epochs > 0 && total_steps == 0 {
        return Err(Error::invalid("batch source produced no batches"));
    }

    let mut steps = Vec::new();
    let mut step = stage1.step;
    let mut local: u64 = 0;
    for batches in &epochs {
        for batch in batches {
            batch.validate()?;
            let (maps, pooled) = pooled_rows(extractor, batch)?;
            let (loss_bce, grad_w, grad_b) = bce_with_grads(&head, &pooled, &batch.labels)?;

            let n = batch.tensors.len() as f64;
            let mut grad_p = vec![0.0; dim * dim];
            let mut sum_crd = 0.0;
            let mut sum_distill = 0.0;
            let mut positives = Vec::with_capacity(batch.tensors.len());
            for (fm, vec) in maps.iter().zip(&pooled) {
                let fixed = project_tokens(&teacher_p, fm)?;
                let (dl, dg) =
                    distill_with_grads(&student_p, fm, &fixed, config.distill_normalize)?;
                let positive = l2_normalize(&matvec(&teacher_p, vec)?)?;
                let (cl, cg) =
                    crd_with_grads(&student_p, vec, &positive, &queue, config.temperature)?;
                sum_distill += dl;
                sum_crd += cl;
                for ((g, d), c) in grad_p.iter_mut().zip(&dg).zip(&cg) {
                    *g += (config.distill_weight * d + config.lambda_crd * c) / n;
                }
                positives.push(positive);
            }

            for (w, g) in head.weights.iter_mut().zip(&grad_w) {
                *w -= config.learning_rate * g;
            }
            head.bias -= config.learning_rate * grad_b;
            for (p, g) in student_p.iter_mut().zip(&grad_p) {
                *p -= config.learning_rate * g;
            }

            let m_record = match config.teacher_mode {
                TeacherMode::FrozenCheckpoint => None,
                TeacherMode::Momentum => {
                    let m = momentum(local, total_steps, config.m_base, config.m_max)?;
                    ema_update(&mut teacher_p, &student_p, m)?;
                    Some(m)
                }
            };

            // MoCo-style: this batch's teacher embeddings become negatives
            // for later batches.
            for positive in positives {
                queue.push(positive)?;
            }

            step += 1;
            local += 1;
            steps.push(StepRecord {
                step,
                loss_bce,
                loss_crd: sum_crd / n,
                loss_distill: sum_distill / n,
                momentum: m_record,
            });
        }
    }

    let checkpoint = Checkpoint {
        head,
        projector: Some(student_p),
        step,
        config_hash: config_hash(config),
    };
    Ok(TrainRun { checkpoint, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EmbeddingStore;
    use crate::rng::SeededRng;
    use std::collections::BTreeMap;

    #[test]
    fn bce_hand_values() {
        assert!(bce_loss(&[1.0 - BCE_EPS], &[1]).unwrap() <= 1.1e-7);
        assert!((bce_loss(&[0.5], &[1]).unwrap() - 0.5f64.ln().abs()).abs() < 1e-12);
        assert!((bce_loss(&[0.5], &[1]).unwrap() - 0.693147).abs() < 1e-6);
        let two = bce_loss(&[0.9, 0.1], &[1, 0]).unwrap();
        assert!((two - -(0.9f64.ln() + 0.9f64.ln()) / 2.0).abs() < 1e-12);
        assert!((two - 0.105361).abs() < 1e-6);
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.5], &[1, 0]).is_err());
    }

    #[test]
    fn bce_logit_gradient_hand_values() {
        assert_eq!(bce_grad_logit(1.0, 1), 0.0);
        assert_eq!(bce_grad_logit(0.0, 0), 0.0);
        assert!((bce_grad_logit(0.7, 1) - -0.3).abs() < 1e-15);
        assert!((bce_grad_logit(0.2, 0) - 0.2).abs() < 1e-15);
    }

    fn fmap(tokens: usize, dim: usize, v: &[f64]) -> FeatureMap {
        FeatureMap::new(tokens, dim, v.to_vec()).unwrap()
    }

    #[test]
    fn distill_hand_values() {
        let a = fmap(1, 2, &[1.0, 2.0]);
        assert_eq!(distill_loss(&a, &a, false).unwrap(), 0.0);
        assert_eq!(distill_loss(&a, &fmap(1, 2, &[0.0, 0.0]), false).unwrap(), 5.0);
        assert_eq!(
            distill_loss(&fmap(1, 1, &[3.0]), &fmap(1, 1, &[1.0]), false).unwrap(),
            4.0
        );
        assert_eq!(distill_loss(&a, &fmap(1, 2, &[0.0, 0.0]), true).unwrap(), 2.5);
        assert!(distill_loss(&a, &fmap(2, 1, &[0.0, 0.0]), false).is_err());
    }

    #[test]
    fn distill_positive_unless_identical() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let v: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
            let mut w = v.clone();
            w[rng.below(6) as usize] += 0.01;
            let a = fmap(2, 3, &v);
            assert!(distill_loss(&a, &fmap(2, 3, &w), false).unwrap() > 0.0);
            assert_eq!(distill_loss(&a, &a, false).unwrap(), 0.0);
        }
    }

    #[test]
    fn crd_hand_values() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let empty = NegativeQueue::new(8);
        assert_eq!(crd_loss(&e1, &e2, &empty, 0.07).unwrap(), 0.0);

        // positive and negative both orthogonal to the anchor: ln 2
        let mut q = NegativeQueue::new(8);
        q.push(e2.clone()).unwrap();
        let loss = crd_loss(&e1, &e2, &q, 0.07).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);

        // a·p = 1, one orthogonal negative, τ = 1: ln(1 + e^{−1})
        let loss = crd_loss(&e1, &e1, &q, 1.0).unwrap();
        assert!((loss - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
        assert!((loss - 0.313262).abs() < 1e-6);

        assert!(crd_loss(&[], &[], &empty, 1.0).is_err());
        assert!(crd_loss(&e1, &e1, &empty, 0.0).is_err());
    }

    #[test]
    fn crd_ignores_queue_order() {
        let mut rng = SeededRng::new(77);
        let dim = 6;
        let unit = |rng: &mut SeededRng| {
            let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            l2_normalize(&v).unwrap()
        };
        let anchor = unit(&mut rng);
        let positive = unit(&mut rng);
        let entries: Vec<Vec<f64>> = (0..7).map(|_| unit(&mut rng)).collect();
        let mut fwd = NegativeQueue::new(16);
        let mut rev = NegativeQueue::new(16);
        for e in &entries {
            fwd.push(e.clone()).unwrap();
        }
        for e in entries.iter().rev() {
            rev.push(e.clone()).unwrap();
        }
        let a = crd_loss(&anchor, &positive, &fwd, 0.07).unwrap();
        let b = crd_loss(&anchor, &positive, &rev, 0.07).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn momentum_schedule_endpoints_and_shape() {
        assert!((momentum(0, 10, 0.99, 0.9999).unwrap() - 0.99).abs() < 1e-12);
        assert!((momentum(10, 10, 0.99, 0.9999).unwrap() - 0.9999).abs() < 1e-12);
        assert!((momentum(5, 10, 0.99, 0.9999).unwrap() - 0.99495).abs() < 1e-12);
        assert!(momentum(11, 10, 0.99, 0.9999).is_err());
        assert!(momentum(0, 0, 0.99, 0.9999).is_err());
        let mut last = 0.0;
        for g in 0..=200 {
            let m = momentum(g, 200, 0.99, 0.9999).unwrap();
            assert!(m >= last && (0.99..=0.9999).contains(&m));
            last = m;
        }
    }

    #[test]
    fn ema_hand_values() {
        let mut t = vec![2.0, 4.0];
        ema_update(&mut t, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(t, vec![2.0, 4.0]);
        ema_update(&mut t, &[1.0, 3.0], 0.0).unwrap();
        assert_eq!(t, vec![1.0, 3.0]);
        let mut t = vec![2.0];
        ema_update(&mut t, &[0.0], 0.5).unwrap();
        assert_eq!(t, vec![1.0]);
        assert!(ema_update(&mut t, &[0.0, 1.0], 0.5).is_err());
        assert!(ema_update(&mut t, &[0.0], 1.5).is_err());
    }

    #[test]
    fn total_loss_hand_values() {
        assert_eq!(total_loss(0.4, 9.0, 7.0, 0.0, 0.0), 0.4);
        assert_eq!(total_loss(1.0, 2.0, 0.0, 0.5, 0.0), 2.0);
        assert!((total_loss(1.0, 0.0, 3.0, 1.0, 0.1) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn queue_is_fifo_and_validates() {
        let mut q = NegativeQueue::new(2);
        q.push(vec![1.0, 0.0]).unwrap();
        q.push(vec![0.0, 1.0]).unwrap();
        q.push(vec![-1.0, 0.0]).unwrap();
        let entries: Vec<&[f64]> = q.iter().collect();
        assert_eq!(entries, vec![&[0.0, 1.0][..], &[-1.0, 0.0][..]]);
        assert!(q.push(vec![0.5, 0.5]).is_err());
        assert!(q.push(vec![1.0, 0.0, 0.0]).is_err());
        let mut empty_cap = NegativeQueue::new(0);
        empty_cap.push(vec![1.0]).unwrap();
        assert!(empty_cap.is_empty());
    }

    /// Central finite differences of a scalar function of a flat parameter
    /// vector.
    fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, params: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        let mut grad = Vec::with_capacity(params.len());
        let mut work = params.to_vec();
        for i in 0..params.len() {
            work[i] = params[i] + h;
            let hi = f(&work);
            work[i] = params[i] - h;
            let lo = f(&work);
            work[i] = params[i];
            grad.push((hi - lo) / (2.0 * h));
        }
        grad
    }

    fn assert_close(analytic: &[f64], fd: &[f64]) {
        for (a, f) in analytic.iter().zip(fd) {
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-3);
            assert!(rel <= 1e-5, "analytic {a} vs fd {f} (rel {rel})");
        }
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(13);
        let dim = 5;
        let pooled: Vec<Vec<f64>> =
            (0..4).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let labels = vec![1, 0, 1, 1];
        let params: Vec<f64> = (0..=dim).map(|_| rng.normal() * 0.3).collect();
        let head = ClassifierHead { weights: params[..dim].to_vec(), bias: params[dim] };
        let (_, gw, gb) = bce_with_grads(&head, &pooled, &labels).unwrap();
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let fd = finite_difference(
            |p| {
                let h = ClassifierHead { weights: p[..dim].to_vec(), bias: p[dim] };
                let probs: Vec<f64> =
                    pooled.iter().map(|v| head_forward(&h, v).unwrap()).collect();
                bce_loss(&probs, &labels).unwrap()
            },
            &params,
        );
        assert_close(&analytic, &fd);
    }

    #[test]
    fn distill_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(29);
        let (t, d) = (3, 4);
        let fm = fmap(t, d, &(0..t * d).map(|_| rng.normal()).collect::<Vec<_>>());
        let fixed = fmap(t, d, &(0..t * d).map(|_| rng.normal()).collect::<Vec<_>>());
        let proj: Vec<f64> = (0..d * d).map(|_| rng.normal() * 0.4).collect();
        for normalize in [false, true] {
            let (_, grad) = distill_with_grads(&proj, &fm, &fixed, normalize).unwrap();
            let fd = finite_difference(
                |p| distill_with_grads(p, &fm, &fixed, normalize).unwrap().0,
                &proj,
            );
            assert_close(&grad, &fd);
        }
    }

    #[test]
    fn crd_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(31);
        let dim = 5;
        let pooled: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let positive =
            l2_normalize(&(0..dim).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap();
        let mut queue = NegativeQueue::new(8);
        for _ in 0..3 {
            queue
                .push(l2_normalize(&(0..dim).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap())
                .unwrap();
        }
        let proj: Vec<f64> = (0..dim * dim)
            .map(|_| rng.normal() * 0.5)
            .enumerate()
            // keep the projection well away from singular
            .map(|(i, v)| if i % (dim + 1) == 0 { v + 1.0 } else { v })
            .collect();
        let (_, grad) = crd_with_grads(&proj, &pooled, &positive, &queue, 0.07).unwrap();
        let fd = finite_difference(
            |p| crd_with_grads(p, &pooled, &positive, &queue, 0.07).unwrap().0,
            &proj,
        );
        assert_close(&grad, &fd);
    }

    /// Two well-separated Gaussian feature blobs behind an embedding store.
    fn blob_fixture(
        seed: u64,
        items: usize,
        dim: usize,
        batch: usize,
    ) -> (Extractor, Vec<TrainBatch>, Vec<u8>) {
        let mut rng = SeededRng::new(seed);
        let mut rows = BTreeMap::new();
        let mut labels = Vec::new();
        for i in 0..items {
            let y = (i % 2) as u8;
            let center = if y == 1 { 1.5 } else { -1.5 };
            let row: Vec<f32> =
                (0..dim).map(|_| (center + rng.normal() * 0.5) as f32).collect();
            rows.insert(format!("blob-{i:04}"), row);
            labels.push(y);
        }
        let store = EmbeddingStore::new(1, dim, rows).unwrap();
        let batches = (0..items / batch)
            .map(|b| TrainBatch {
                tensors: vec![Tensor::zeros(16, 3); batch],
                labels: (0..batch).map(|j| ((b * batch + j) % 2) as u8).collect(),
                item_ids: (0..batch).map(|j| format!("blob-{:04}", b * batch + j)).collect(),
            })
            .collect();
        (Extractor::Embeddings(store), batches, labels)
    }

    #[test]
    fn stage1_separates_feature_blobs() {
        let (extractor, batches, labels) = blob_fixture(5, 128, 8, 16);
        let config = TrainConfig { stage1_epochs: 2, ..TrainConfig::default() };
        let run = train_stage1(&config, &FixedBatches(batches), &extractor).unwrap();
        let items: Vec<crate::metrics::ScoredItem> = (0..128)
            .map(|i| {
                let fm = extractor
                    .extract(&Tensor::zeros(16, 3), &format!("blob-{i:04}"))
                    .unwrap();
                crate::metrics::ScoredItem::new(
                    head_forward(&run.checkpoint.head, fm.pooled()).unwrap(),
                    labels[i],
                )
            })
            .collect();
        assert!(crate::metrics::roc_auc(&items).unwrap() >= 0.99);
        assert_eq!(run.steps.len(), 16);
        assert_eq!(run.checkpoint.step, 16);
    }

    #[test]
    fn zero_learning_rate_leaves_initialization() {
        let (extractor, batches, _) = blob_fixture(6, 32, 4, 8);
        let config = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        let run = train_stage1(&config, &FixedBatches(batches), &extractor).unwrap();
        assert_eq!(run.checkpoint.head, ClassifierHead::zeros(4));
    }

    #[test]
    fn same_seed_same_checkpoint_bitwise() {
        let (extractor, batches, _) = blob_fixture(7, 64, 6, 8);
        let config = TrainConfig::default();
        let source = FixedBatches(batches);
        let a = train_stage1(&config, &source, &extractor).unwrap();
        let b = train_stage1(&config, &source, &extractor).unwrap();
        assert_eq!(a.checkpoint.head, b.checkpoint.head);
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn stage1_epoch_losses_non_increasing_on_separable_data() {
        let (extractor, batches, _) = blob_fixture(8, 64, 6, 8);
        let per_epoch = batches.len();
        let config = TrainConfig {
            stage1_epochs: 6,
            learning_rate: 0.02,
            ..TrainConfig::default()
        };
        let run = train_stage1(&config, &FixedBatches(batches), &extractor).unwrap();
        let means: Vec<f64> = run
            .steps
            .chunks(per_epoch)
            .map(|c| c.iter().map(|s| s.loss_bce).sum::<f64>() / c.len() as f64)
            .collect();
        for pair in means.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "epoch means increased: {means:?}");
        }
    }

    #[test]
    fn zero_weight_stage2_continues_stage1_exactly() {
        let (extractor, batches, _) = blob_fixture(9, 64, 6, 8);
        let source = FixedBatches(batches);
        let long = TrainConfig { stage1_epochs: 4, ..TrainConfig::default() };
        let full = train_stage1(&long, &source, &extractor).unwrap();

        let split = TrainConfig {
            stage1_epochs: 2,
            stage2_epochs: 2,
            lambda_crd: 0.0,
            distill_weight: 0.0,
            ..TrainConfig::default()
        };
        let stage1 = train_stage1(&split, &source, &extractor).unwrap();
        let stage2 = train_stage2(&split, &source, &extractor, &stage1.checkpoint).unwrap();

        let tail = &full.steps[stage1.steps.len()..];
        assert_eq!(tail.len(), stage2.steps.len());
        for (a, b) in tail.iter().zip(&stage2.steps) {
            assert_eq!(a.step, b.step);
            assert!((a.loss_bce - b.loss_bce).abs() < 1e-12);
        }
        for (a, b) in full.checkpoint.head.weights.iter().zip(&stage2.checkpoint.head.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_lr_zero_keeps_distill_at_zero() {
        let (extractor, batches, _) = blob_fixture(10, 32, 4, 8);
        let config = TrainConfig {
            stage1_epochs: 1,
            stage2_epochs: 2,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let source = FixedBatches(batches);
        let stage1 = train_stage1(&config, &source, &extractor).unwrap();
        let run = train_stage2(&config, &source, &extractor, &stage1.checkpoint).unwrap();
        for s in &run.steps {
            assert_eq!(s.loss_distill, 0.0);
        }
    }

    #[test]
    fn momentum_mode_records_the_cosine_schedule() {
        let (extractor, batches, _) = blob_fixture(11, 32, 4, 8);
        let config = TrainConfig {
            stage1_epochs: 1,
            stage2_epochs: 3,
            teacher_mode: TeacherMode::Momentum,
            ..TrainConfig::default()
        };
        let source = FixedBatches(batches);
        let stage1 = train_stage1(&config, &source, &extractor).unwrap();
        let run = train_stage2(&config, &source, &extractor, &stage1.checkpoint).unwrap();
        let total = run.steps.len() as u64;
        for (i, s) in run.steps.iter().enumerate() {
            let expect = momentum(i as u64, total, config.m_base, config.m_max).unwrap();
            assert!((s.momentum.unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn stage2_rejects_dimension_mismatch() {
        let (extractor, batches, _) = blob_fixture(12, 32, 4, 8);
        let config = TrainConfig::default();
        let bad = Checkpoint {
            head: ClassifierHead::zeros(9),
            projector: None,
            step: 0,
            config_hash: config_hash(&config),
        };
        assert!(train_stage2(&config, &FixedBatches(batches), &extractor, &bad).is_err());
    }
}
