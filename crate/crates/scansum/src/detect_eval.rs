//! Set-to-set evaluation of predicted vs. ground-truth keyframe sets.
//!
//! Each ground-truth frame is matched independently: by maximum feature
//! similarity for the similarity metric and by nearest timestamp for the
//! time metrics. The two matches may differ for the same ground-truth
//! frame; both are recorded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyframe::KeyframeSet;
use crate::similarity::SimilarityMatrix;

/// Default similarity threshold above which a time error is considered
/// "already matched in appearance" and excluded from the correct-time
/// metric.
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.96;

/// Per-ground-truth match record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtMatch {
    pub gt_index: usize,
    /// Prediction with the highest feature similarity.
    pub sim_pred_index: usize,
    pub similarity: f64,
    /// Prediction nearest in time.
    pub time_pred_index: usize,
    pub time_err_s: f64,
}

/// The four stage-1 detection metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub cosine_simi_pct: f64,
    pub absolute_time_err_s: f64,
    pub correct_time_err_s: f64,
    /// True when every ground-truth frame had a prediction above the
    /// similarity threshold, leaving the correct-time average empty
    /// (reported as 0).
    pub all_matched: bool,
    pub keyframe_num_err: usize,
    pub per_gt_matches: Vec<GtMatch>,
}

/// Compare predicted and ground-truth keyframe sets.
///
/// * cosine simi. — mean over GT of the best prediction similarity, x100
/// * absolute time err. — mean over GT of the nearest prediction distance
///   in seconds
/// * correct time err. — the same mean restricted to GT frames whose best
///   similarity stays below `sim_threshold`
/// * keyframe num. err. — absolute set size difference
pub fn evaluate_detection(
    pred: &KeyframeSet,
    gt: &KeyframeSet,
    s: &SimilarityMatrix,
    fps: f64,
    sim_threshold: f64,
) -> Result<DetectionReport> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidValue(format!("fps must be positive, got {fps}")));
    }
    for &i in pred.indices().iter().chain(gt.indices()) {
        if i >= s.size() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: s.size(),
            });
        }
    }

    let mut matches = Vec::with_capacity(gt.len());
    let mut sim_sum = 0.0f64;
    let mut time_sum = 0.0f64;
    let mut correct_sum = 0.0f64;
    let mut correct_n = 0usize;
    for &g in gt.indices() {
        let mut best_sim = f64::NEG_INFINITY;
        let mut best_sim_idx = 0usize;
        let mut best_dt = f64::INFINITY;
        let mut best_dt_idx = 0usize;
        for &p in pred.indices() {
            let sim = s.get(g, p);
            if sim > best_sim {
                best_sim = sim;
                best_sim_idx = p;
            }
            let dt = g.abs_diff(p) as f64 / fps;
            if dt < best_dt {
                best_dt = dt;
                best_dt_idx = p;
            }
        }
        sim_sum += best_sim;
        time_sum += best_dt;
        if best_sim < sim_threshold {
            correct_sum += best_dt;
            correct_n += 1;
        }
        matches.push(GtMatch {
            gt_index: g,
            sim_pred_index: best_sim_idx,
            similarity: best_sim,
            time_pred_index: best_dt_idx,
            time_err_s: best_dt,
        });
    }

    let n = gt.len() as f64;
    let all_matched = correct_n == 0;
    Ok(DetectionReport {
        cosine_simi_pct: sim_sum / n * 100.0,
        absolute_time_err_s: time_sum / n,
        correct_time_err_s: if all_matched {
            0.0
        } else {
            correct_sum / correct_n as f64
        },
        all_matched,
        keyframe_num_err: pred.len().abs_diff(gt.len()),
        per_gt_matches: matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_with(t: usize, entries: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let mut values = vec![0.0f64; t * t];
        for i in 0..t {
            values[i * t + i] = 1.0;
        }
        for &(i, j, v) in entries {
            values[i * t + j] = v;
            values[j * t + i] = v;
        }
        SimilarityMatrix::from_values(t, values).unwrap()
    }

    #[test]
    fn identical_sets_are_perfect() {
        let s = sim_with(30, &[]);
        let set = KeyframeSet::from_indices(vec![3, 10, 20]).unwrap();
        let r = evaluate_detection(&set, &set, &s, 5.0, 0.96).unwrap();
        assert_eq!(r.cosine_simi_pct, 100.0);
        assert_eq!(r.absolute_time_err_s, 0.0);
        assert_eq!(r.correct_time_err_s, 0.0);
        assert!(r.all_matched);
        assert_eq!(r.keyframe_num_err, 0);
    }

    #[test]
    fn hand_evaluated_single_pair() {
        let s = sim_with(30, &[(10, 20, 0.5)]);
        let gt = KeyframeSet::from_indices(vec![10]).unwrap();
        let pred = KeyframeSet::from_indices(vec![20]).unwrap();
        let r = evaluate_detection(&pred, &gt, &s, 5.0, 0.96).unwrap();
        assert_eq!(r.absolute_time_err_s, 2.0);
        // 0.5 < 0.96 so the frame counts toward the correct-time average
        assert_eq!(r.correct_time_err_s, 2.0);
        assert!(!r.all_matched);
        assert_eq!(r.keyframe_num_err, 0);
        assert_eq!(r.cosine_simi_pct, 50.0);
    }

    #[test]
    fn swapping_pred_and_gt_is_not_symmetric() {
        let s = sim_with(40, &[(5, 6, 0.99), (5, 30, 0.2), (6, 30, 0.2)]);
        let a = KeyframeSet::from_indices(vec![5, 30]).unwrap();
        let b = KeyframeSet::from_indices(vec![6]).unwrap();
        let ab = evaluate_detection(&a, &b, &s, 5.0, 0.96).unwrap();
        let ba = evaluate_detection(&b, &a, &s, 5.0, 0.96).unwrap();
        assert_ne!(ab.absolute_time_err_s, ba.absolute_time_err_s);
        assert_eq!(ab.keyframe_num_err, ba.keyframe_num_err);
    }

    #[test]
    fn adding_prediction_is_monotone() {
        let s = sim_with(50, &[(10, 40, 0.3), (10, 12, 0.7)]);
        let gt = KeyframeSet::from_indices(vec![10]).unwrap();
        let small = KeyframeSet::from_indices(vec![40]).unwrap();
        let large = KeyframeSet::from_indices(vec![12, 40]).unwrap();
        let r1 = evaluate_detection(&small, &gt, &s, 5.0, 0.96).unwrap();
        let r2 = evaluate_detection(&large, &gt, &s, 5.0, 0.96).unwrap();
        assert!(r2.cosine_simi_pct >= r1.cosine_simi_pct);
        assert!(r2.absolute_time_err_s <= r1.absolute_time_err_s);
    }

    #[test]
    fn empty_set_rejected() {
        let s = sim_with(5, &[]);
        let some = KeyframeSet::from_indices(vec![1]).unwrap();
        let empty = KeyframeSet::from_indices(vec![]).unwrap();
        assert!(matches!(
            evaluate_detection(&empty, &some, &s, 5.0, 0.96),
            Err(Error::EmptySet)
        ));
        assert!(matches!(
            evaluate_detection(&some, &empty, &s, 5.0, 0.96),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let s = sim_with(5, &[]);
        let bad = KeyframeSet::from_indices(vec![7]).unwrap();
        let ok = KeyframeSet::from_indices(vec![1]).unwrap();
        assert!(matches!(
            evaluate_detection(&bad, &ok, &s, 5.0, 0.96),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }
}
