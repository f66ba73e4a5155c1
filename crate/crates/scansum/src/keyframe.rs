//! Stage-1 keyframe algorithms: label propagation, diversity-constrained
//! greedy selection, a prototype baseline scorer, and the frame-drop
//! simulation used by the scan-time experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, KeyframeLabels};
use crate::error::{Error, Result};
use crate::similarity::{cosine, SimilarityMatrix};

/// Identifier recorded in synthetic manifests for reproducibility.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Thresholds steering detection.
///
/// `tau` bounds how similar two selected keyframes may be, `tau_prime` is
/// the score floor below which selection stops, and
/// `propagation_threshold` relabels frames nearly identical to an
/// annotated keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub tau: f64,
    pub tau_prime: f64,
    pub propagation_threshold: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            tau: 0.96,
            tau_prime: 0.8,
            propagation_threshold: 0.99,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("tau_prime", self.tau_prime),
            ("propagation_threshold", self.propagation_threshold),
        ] {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidValue(format!(
                    "{name} must be in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-frame keyframe probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (t, v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidValue(format!(
                    "score {v} at frame {t} outside [0, 1]"
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, t: usize) -> f64 {
        self.0[t]
    }

    /// Restrict to a frame subset (used after frame dropping).
    pub fn slice(&self, keep: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(keep.len());
        for &i in keep {
            if i >= self.0.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.0.len(),
                });
            }
            out.push(self.0[i]);
        }
        Ok(Self(out))
    }
}

/// Ordered keyframe indices with their scores; used for predictions and
/// ground truth alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeSet {
    indices: Vec<usize>,
    scores: Vec<f64>,
}

impl KeyframeSet {
    pub fn new(indices: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if indices.len() != scores.len() {
            return Err(Error::LengthMismatch {
                what: "keyframe scores",
                expected: indices.len(),
                actual: scores.len(),
            });
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidValue(
                "keyframe indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices, scores })
    }

    /// Ground-truth style set: every listed frame with score 1.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let scores = vec![1.0; indices.len()];
        Self::new(indices, scores)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.scores.iter().copied())
    }
}

/// Relabel frames as keyframes when their similarity to any ORIGINAL
/// keyframe exceeds `threshold`.
///
/// Single pass: newly relabeled frames do not propagate further. Running
/// the result through this function again may therefore add frames; the
/// asymmetry is intentional and tested.
pub fn propagate_labels(
    s: &SimilarityMatrix,
    labels: &KeyframeLabels,
    threshold: f64,
) -> Result<KeyframeLabels> {
    if s.size() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "keyframe labels",
            expected: s.size(),
            actual: labels.len(),
        });
    }
    let keys = labels.key_indices();
    let mut out = labels.values().to_vec();
    for (i, slot) in out.iter_mut().enumerate() {
        if *slot == 0 && keys.iter().any(|&j| s.get(i, j) > threshold) {
            *slot = 1;
        }
    }
    KeyframeLabels::new(out)
}

/// Greedy diversity-constrained keyframe selection.
///
/// Repeatedly take the highest-score unmasked frame (ties go to the lowest
/// index) while that score is at least `tau_prime`; after each selection,
/// mask the selected frame and every unmasked frame whose similarity to it
/// exceeds `tau`. Selected frames are returned in index order.
pub fn diverse_select(
    scores: &ScoreVector,
    s: &SimilarityMatrix,
    cfg: &DetectionConfig,
) -> Result<KeyframeSet> {
    cfg.validate()?;
    if scores.len() != s.size() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: s.size(),
            actual: scores.len(),
        });
    }
    let t = scores.len();
    // live candidate pool, shrinks as frames are masked
    let mut candidates: Vec<usize> = (0..t).collect();
    let mut picked: Vec<usize> = Vec::new();
    while !candidates.is_empty() {
        let mut best_pos = 0;
        for pos in 1..candidates.len() {
            if scores.get(candidates[pos]) > scores.get(candidates[best_pos]) {
                best_pos = pos;
            }
        }
        let sel = candidates[best_pos];
        if scores.get(sel) < cfg.tau_prime {
            break;
        }
        picked.push(sel);
        candidates.retain(|&j| j != sel && s.get(sel, j) <= cfg.tau);
    }
    picked.sort_unstable();
    let sel_scores: Vec<f64> = picked.iter().map(|&i| scores.get(i)).collect();
    KeyframeSet::new(picked, sel_scores)
}

/// Max-cosine score of every frame against a prototype bank. Stands in for
/// a learned frame scorer so the pipeline runs without model weights.
pub fn baseline_score(
    detector: &EmbeddingMatrix,
    prototypes: &[Vec<f32>],
) -> Result<ScoreVector> {
    if prototypes.is_empty() {
        return Err(Error::EmptyPrototypes);
    }
    for p in prototypes {
        if p.len() != detector.dim {
            return Err(Error::DimensionMismatch {
                expected: detector.dim,
                actual: p.len(),
            });
        }
    }
    let mut values = Vec::with_capacity(detector.rows);
    for t in 0..detector.rows {
        let mut best = 0.0f64;
        for p in prototypes {
            let c = cosine(detector.row(t), p)?;
            if c > best {
                best = c;
            }
        }
        values.push(best);
    }
    ScoreVector::new(values)
}

/// Collect embedding rows at labeled keyframes across training exams,
/// optionally greedily deduplicated: a row is kept only if its cosine to
/// every kept prototype stays at or below `dedup_threshold`.
pub fn build_prototypes(
    exams: &[(&EmbeddingMatrix, &KeyframeLabels)],
    dedup_threshold: Option<f64>,
) -> Result<Vec<Vec<f32>>> {
    let mut prototypes: Vec<Vec<f32>> = Vec::new();
    for (e, labels) in exams {
        if e.rows != labels.len() {
            return Err(Error::LengthMismatch {
                what: "keyframe labels",
                expected: e.rows,
                actual: labels.len(),
            });
        }
        for t in labels.key_indices() {
            let row = e.row(t).to_vec();
            let dup = match dedup_threshold {
                Some(thr) => prototypes
                    .iter()
                    .any(|p| matches!(cosine(p, &row), Ok(c) if c > thr)),
                None => false,
            };
            if !dup {
                prototypes.push(row);
            }
        }
    }
    if prototypes.is_empty() {
        return Err(Error::NoKeyframes);
    }
    Ok(prototypes)
}

/// Non-keyframes whose similarity to some labeled keyframe exceeds
/// `threshold` — the redundant frames the drop experiment may remove.
pub fn eligible_frames(
    s: &SimilarityMatrix,
    labels: &KeyframeLabels,
    threshold: f64,
) -> Result<Vec<usize>> {
    if s.size() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "keyframe labels",
            expected: s.size(),
            actual: labels.len(),
        });
    }
    let keys = labels.key_indices();
    Ok((0..labels.len())
        .filter(|&i| !labels.is_key(i) && keys.iter().any(|&j| s.get(i, j) > threshold))
        .collect())
}

/// Randomly drop a fraction of the eligible (redundant) frames and return
/// the sorted surviving indices. Labeled keyframes are never dropped, and
/// the same seed always reproduces the same survivors.
pub fn drop_frames(
    s: &SimilarityMatrix,
    labels: &KeyframeLabels,
    drop_fraction: f64,
    high_sim_threshold: f64,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&drop_fraction) {
        return Err(Error::OutOfValidRange {
            value: drop_fraction,
            min: 0.0,
            max: 1.0,
        });
    }
    if !(high_sim_threshold.is_finite() && high_sim_threshold > 0.0 && high_sim_threshold <= 1.0)
    {
        return Err(Error::InvalidValue(format!(
            "high_sim_threshold must be in (0, 1], got {high_sim_threshold}"
        )));
    }
    let mut eligible = eligible_frames(s, labels, high_sim_threshold)?;
    let n_drop = (drop_fraction * eligible.len() as f64).floor() as usize;
    // partial Fisher-Yates: the first n_drop entries become the dropped set
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    for k in 0..n_drop {
        let j = rng.gen_range(k..eligible.len());
        eligible.swap(k, j);
    }
    let mut dropped = vec![false; labels.len()];
    for &i in &eligible[..n_drop] {
        dropped[i] = true;
    }
    Ok((0..labels.len()).filter(|&i| !dropped[i]).collect())
}

/// Ratio of non-keyframes to keyframes in a label vector.
pub fn compute_class_ratio(labels: &KeyframeLabels) -> Result<f64> {
    let ones = labels.values().iter().filter(|v| **v == 1).count();
    if ones == 0 {
        return Err(Error::NoKeyframes);
    }
    let zeros = labels.len() - ones;
    Ok(zeros as f64 / ones as f64)
}
