//! ROC-AUC with midrank tie handling, plus robustness breakdowns by
//! degradation operator and severity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::ManifestRecord;
use crate::error::{Error, Result};

/// One scored evaluation item. Higher scores mean "more likely AI-generated".
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub score: f64,
    /// 0 = real, 1 = AI-generated.
    pub label: u8,
    /// Operator name when the item was degraded, e.g. "gaussian_blur".
    pub distortion_tag: Option<String>,
    pub severity: Option<u8>,
}

impl ScoredItem {
    pub fn new(score: f64, label: u8) -> Self {
        Self { score, label, distortion_tag: None, severity: None }
    }
}

/// Area under the ROC curve: the fraction of (real, AI) pairs where the AI
/// item scores higher, ties counted half. Sort-based midrank computation,
/// O(n log n).
pub fn roc_auc(items: &[ScoredItem]) -> Result<f64> {
    let mut n0 = 0u64;
    let mut n1 = 0u64;
    for it in items {
        if !it.score.is_finite() {
            return Err(Error::invalid("non-finite score"));
        }
        match it.label {
            0 => n0 += 1,
            1 => n1 += 1,
            other => return Err(Error::invalid(format!("label {other} outside {{0,1}}"))),
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("ROC-AUC needs both labels present"));
    }

    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].score.partial_cmp(&items[b].score).unwrap());

    // Midranks: tied scores share the average of their 1-based positions.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && items[order[j + 1]].score == items[order[i]].score {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if items[idx].label == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }

    let n1f = n1 as f64;
    let u = rank_sum_pos - n1f * (n1f + 1.0) / 2.0;
    Ok(u / (n0 as f64 * n1f))
}

/// AUC and size of one evaluation subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub auc: f64,
    pub count: usize,
}

/// Overall AUC plus per-operator and per-severity breakdowns. Groups missing
/// one of the two classes are omitted rather than reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustReport {
    pub overall_auc: f64,
    pub overall_count: usize,
    pub per_operator: BTreeMap<String, GroupStat>,
    pub per_severity: BTreeMap<u8, GroupStat>,
}

pub fn robust_report(items: &[ScoredItem]) -> Result<RobustReport> {
    let overall_auc = roc_auc(items)?;

    let mut by_op: BTreeMap<String, Vec<&ScoredItem>> = BTreeMap::new();
    let mut by_sev: BTreeMap<u8, Vec<&ScoredItem>> = BTreeMap::new();
    for it in items {
        if let Some(tag) = &it.distortion_tag {
            by_op.entry(tag.clone()).or_default().push(it);
        }
        if let Some(sev) = it.severity {
            by_sev.entry(sev).or_default().push(it);
        }
    }

    let group_stat = |group: Vec<&ScoredItem>| -> Option<GroupStat> {
        let owned: Vec<ScoredItem> = group.iter().map(|it| (*it).clone()).collect();
        roc_auc(&owned).ok().map(|auc| GroupStat { auc, count: owned.len() })
    };

    let per_operator =
        by_op.into_iter().filter_map(|(op, g)| group_stat(g).map(|s| (op, s))).collect();
    let per_severity =
        by_sev.into_iter().filter_map(|(sev, g)| group_stat(g).map(|s| (sev, s))).collect();

    Ok(RobustReport { overall_auc, overall_count: items.len(), per_operator, per_severity })
}

/// Joins a predictions CSV (header `item_id,p_final,...`) with manifest
/// records by item id (the record path): each row becomes a ScoredItem with
/// `p_final` as its score, the record's label, and — when the record carries
/// a degradation — the operator name and severity. Rows keep CSV order; an
/// id absent from the manifest is an error, a manifest record without a row
/// (e.g. skipped as unreadable) is simply not scored.
pub fn join_predictions(csv_text: &str, records: &[ManifestRecord]) -> Result<Vec<ScoredItem>> {
    let mut lines = csv_text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty predictions file".into()))?;
    if !header.starts_with("item_id,p_final") {
        return Err(Error::Format(format!("unexpected predictions header: {header}")));
    }
    let by_id: BTreeMap<&str, &ManifestRecord> =
        records.iter().map(|r| (r.path.as_str(), r)).collect();
    let mut items = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2; // 1-based, after the header
        let mut fields = line.split(',');
        let (id, score) = match (fields.next(), fields.next()) {
            (Some(id), Some(score)) => (id, score),
            _ => {
                return Err(Error::Parse { line: lineno, msg: "expected item_id,p_final".into() })
            }
        };
        let score: f64 = score.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("p_final {score:?} is not a number"),
        })?;
        let record = by_id.get(id).ok_or_else(|| {
            Error::NotFound(format!("predictions line {lineno}: item {id:?} not in manifest"))
        })?;
        items.push(ScoredItem {
            score,
            label: record.label,
            distortion_tag: record.distortion.as_ref().map(|s| s.op.name().to_string()),
            severity: record.distortion.as_ref().map(|s| s.severity),
        });
    }
    Ok(items)
}

impl RobustReport {
    /// Aligned plain-text rendering, one row per group.
    pub fn text_table(&self) -> String {
        let mut rows: Vec<(String, usize, f64)> =
            vec![("overall".to_string(), self.overall_count, self.overall_auc)];
        for (op, s) in &self.per_operator {
            rows.push((format!("op:{op}"), s.count, s.auc));
        }
        for (sev, s) in &self.per_severity {
            rows.push((format!("severity:{sev}"), s.count, s.auc));
        }
        let name_w = rows.iter().map(|(n, _, _)| n.len()).max().unwrap_or(5).max("group".len());
        let mut out = format!("{:<name_w$}  {:>8}  {:>8}\n", "group", "n", "auc");
        for (name, n, auc) in rows {
            out.push_str(&format!("{name:<name_w$}  {n:>8}  {auc:>8.4}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    /// Independent O(n0*n1) oracle: count correctly ordered pairs, half for ties.
    fn pair_count_auc(items: &[ScoredItem]) -> f64 {
        let reals: Vec<f64> =
            items.iter().filter(|i| i.label == 0).map(|i| i.score).collect();
        let fakes: Vec<f64> =
            items.iter().filter(|i| i.label == 1).map(|i| i.score).collect();
        let mut total = 0.0;
        for r in &reals {
            for f in &fakes {
                total += if f > r {
                    1.0
                } else if f == r {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (reals.len() as f64 * fakes.len() as f64)
    }

    fn items(reals: &[f64], fakes: &[f64]) -> Vec<ScoredItem> {
        reals
            .iter()
            .map(|&s| ScoredItem::new(s, 0))
            .chain(fakes.iter().map(|&s| ScoredItem::new(s, 1)))
            .collect()
    }

    #[test]
    fn perfect_separation_scores_one() {
        let auc = roc_auc(&items(&[0.1, 0.2, 0.3], &[0.7, 0.8])).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn all_ties_score_half() {
        let auc = roc_auc(&items(&[0.4, 0.4, 0.4], &[0.4, 0.4])).unwrap();
        assert!((auc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn four_point_hand_case() {
        let auc = roc_auc(&items(&[0.1, 0.4], &[0.3, 0.9])).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_auc(&items(&[0.1, 0.2], &[])).is_err());
        assert!(roc_auc(&items(&[], &[0.5])).is_err());
        assert!(roc_auc(&[]).is_err());
    }

    #[test]
    fn nan_score_rejected() {
        assert!(roc_auc(&items(&[f64::NAN], &[0.5])).is_err());
    }

    #[test]
    fn sort_based_matches_pair_count_with_heavy_ties() {
        let mut rng = SeededRng::new(314);
        for trial in 0..20 {
            let n = 10 + trial * 7;
            // coarse grid forces plenty of exact ties
            let mut its = Vec::new();
            for _ in 0..n {
                let score = (rng.below(9) as f64) / 8.0;
                its.push(ScoredItem::new(score, rng.coin() as u8));
            }
            // guarantee both classes
            its.push(ScoredItem::new(0.3, 0));
            its.push(ScoredItem::new(0.6, 1));
            let fast = roc_auc(&its).unwrap();
            let slow = pair_count_auc(&its);
            assert!((fast - slow).abs() < 1e-12, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let mut rng = SeededRng::new(15);
        let base: Vec<ScoredItem> =
            (0..60).map(|_| ScoredItem::new(rng.normal(), rng.coin() as u8)).collect();
        let mut base = base;
        base.push(ScoredItem::new(0.0, 0));
        base.push(ScoredItem::new(0.0, 1));
        let auc0 = roc_auc(&base).unwrap();
        let warped: Vec<ScoredItem> = base
            .iter()
            .map(|i| ScoredItem::new(i.score.exp() * 3.0 + 1.0, i.label))
            .collect();
        assert!((roc_auc(&warped).unwrap() - auc0).abs() < 1e-12);
    }

    #[test]
    fn label_flip_symmetry() {
        let mut rng = SeededRng::new(88);
        let mut base: Vec<ScoredItem> =
            (0..80).map(|_| ScoredItem::new(rng.next_f64(), rng.coin() as u8)).collect();
        base.push(ScoredItem::new(0.5, 0));
        base.push(ScoredItem::new(0.25, 1));
        let auc = roc_auc(&base).unwrap();

        let flipped_neg: Vec<ScoredItem> =
            base.iter().map(|i| ScoredItem::new(-i.score, 1 - i.label)).collect();
        assert!((roc_auc(&flipped_neg).unwrap() - auc).abs() < 1e-12);

        let flipped: Vec<ScoredItem> =
            base.iter().map(|i| ScoredItem::new(i.score, 1 - i.label)).collect();
        assert!((roc_auc(&flipped).unwrap() - (1.0 - auc)).abs() < 1e-12);
    }

    #[test]
    fn untagged_items_yield_overall_only() {
        let rep = robust_report(&items(&[0.1, 0.2], &[0.8, 0.9])).unwrap();
        assert_eq!(rep.overall_auc, 1.0);
        assert!(rep.per_operator.is_empty());
        assert!(rep.per_severity.is_empty());
    }

    #[test]
    fn separable_groups_report_unit_auc() {
        let mut its = Vec::new();
        for (op, sev) in [("blur", 1u8), ("noise", 3)] {
            for (score, label) in [(0.1, 0u8), (0.2, 0), (0.8, 1), (0.9, 1)] {
                its.push(ScoredItem {
                    score,
                    label,
                    distortion_tag: Some(op.to_string()),
                    severity: Some(sev),
                });
            }
        }
        let rep = robust_report(&its).unwrap();
        assert_eq!(rep.per_operator["blur"].auc, 1.0);
        assert_eq!(rep.per_operator["noise"].auc, 1.0);
        assert_eq!(rep.per_operator["blur"].count, 4);
        assert_eq!(rep.per_severity[&1].auc, 1.0);
        assert_eq!(rep.per_severity[&3].auc, 1.0);
    }

    #[test]
    fn report_groups_match_filtered_recomputation() {
        let mut rng = SeededRng::new(7);
        let ops = ["jpeg", "fog", "vignette"];
        let mut its = Vec::new();
        for k in 0..120 {
            its.push(ScoredItem {
                score: rng.next_f64(),
                label: (k % 2) as u8,
                distortion_tag: Some(ops[rng.below(3) as usize].to_string()),
                severity: Some(1 + rng.below(5) as u8),
            });
        }
        let rep = robust_report(&its).unwrap();
        for op in ops {
            let sub: Vec<ScoredItem> = its
                .iter()
                .filter(|i| i.distortion_tag.as_deref() == Some(op))
                .cloned()
                .collect();
            match roc_auc(&sub) {
                Ok(auc) => {
                    let stat = &rep.per_operator[op];
                    assert_eq!(stat.auc, auc);
                    assert_eq!(stat.count, sub.len());
                }
                Err(_) => assert!(!rep.per_operator.contains_key(op)),
            }
        }
    }

    #[test]
    fn one_class_group_is_omitted() {
        let mut its = items(&[0.1, 0.2], &[0.8, 0.9]);
        its.push(ScoredItem {
            score: 0.7,
            label: 1,
            distortion_tag: Some("fog".to_string()),
            severity: Some(2),
        });
        let rep = robust_report(&its).unwrap();
        assert!(!rep.per_operator.contains_key("fog"));
        assert!(!rep.per_severity.contains_key(&2));
    }

    #[test]
    fn predictions_join_manifest_by_id() {
        use crate::dataset::Split;
        use crate::distortion::{DistortionOp, DistortionSpec};

        let spec =
            DistortionSpec::sample(DistortionOp::GaussianBlur, 3, &mut SeededRng::new(1)).unwrap();
        let record = |path: &str, label: u8, spec: Option<DistortionSpec>| ManifestRecord {
            path: path.to_string(),
            label,
            source: "toy".to_string(),
            split: Split::Val,
            distortion: spec,
        };
        let records = vec![
            record("a.png", 0, None),
            record("b.png", 1, Some(spec)),
            record("c.png", 1, None),
        ];

        let csv = "item_id,p_final,p_1\nb.png,0.900000,0.900000\na.png,0.100000,0.100000\n";
        let items = join_predictions(csv, &records).unwrap();
        assert_eq!(items.len(), 2, "manifest rows without predictions are not scored");
        assert_eq!(items[0].label, 1);
        assert_eq!(items[0].score, 0.9);
        assert_eq!(items[0].distortion_tag.as_deref(), Some("gaussian_blur"));
        assert_eq!(items[0].severity, Some(3));
        assert_eq!(items[1].label, 0);
        assert!(items[1].distortion_tag.is_none());

        let unknown = "item_id,p_final\nmissing.png,0.5\n";
        assert!(join_predictions(unknown, &records).is_err());

        let bad_header = "id,prob\na.png,0.5\n";
        assert!(join_predictions(bad_header, &records).is_err());

        let bad_float = "item_id,p_final\na.png,notanumber\n";
        let err = join_predictions(bad_float, &records).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn text_table_lists_all_groups() {
        let mut its = items(&[0.1], &[0.9]);
        its.push(ScoredItem {
            score: 0.05,
            label: 0,
            distortion_tag: Some("rain".to_string()),
            severity: Some(4),
        });
        its.push(ScoredItem {
            score: 0.95,
            label: 1,
            distortion_tag: Some("rain".to_string()),
            severity: Some(4),
        });
        let table = robust_report(&its).unwrap().text_table();
        assert!(table.contains("overall"));
        assert!(table.contains("op:rain"));
        assert!(table.contains("severity:4"));
    }
}
