//! Per-exam detection runs and the frame-drop scan-time experiment.
//!
//! The drop experiment removes a fraction of the redundant frames (those
//! above the high-similarity threshold relative to some labeled
//! keyframe), re-runs detection on the retained subsequence with sliced
//! scores and similarities, and evaluates against the original ground
//! truth remapped onto the surviving timeline. Scan time saved is the
//! measured eligible fraction times the drop fraction — per corpus, not a
//! hardcoded constant.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{self, ExamManifest};
use crate::detect_eval::{evaluate_detection, DetectionReport};
use crate::error::{Error, Result};
use crate::keyframe::{
    baseline_score, build_prototypes, diverse_select, drop_frames, eligible_frames,
    DetectionConfig, KeyframeSet, ScoreVector,
};
use crate::similarity::{similarity_matrix, SimilarityMatrix};
use crate::stats::mean_std;

/// Where per-frame scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScorerKind {
    /// Prototype scorer over the detector channel, prototypes built from
    /// the exam's own labeled keyframes.
    Baseline,
    /// Raw f32 score file referenced as manifest channel "scores".
    ScoresChannel,
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ScorerKind::Baseline),
            "file" => Ok(ScorerKind::ScoresChannel),
            other => Err(Error::InvalidValue(format!(
                "scorer must be 'baseline' or 'file', got '{other}'"
            ))),
        }
    }
}

/// Inputs shared by detection runs.
#[derive(Debug, Clone)]
pub struct DetectInputs {
    pub detection: DetectionConfig,
    pub scorer: ScorerKind,
    pub sim_channel: String,
    pub detector_channel: String,
    /// Mutual-cosine threshold for prototype deduplication.
    pub prototype_dedup: Option<f64>,
}

impl Default for DetectInputs {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            scorer: ScorerKind::Baseline,
            sim_channel: "similarity".into(),
            detector_channel: "detector".into(),
            prototype_dedup: Some(0.99),
        }
    }
}

/// Similarity matrix and scores for one exam, ready for selection.
pub struct PreparedExam {
    pub manifest: ExamManifest,
    pub similarity: SimilarityMatrix,
    pub scores: ScoreVector,
}

pub fn prepare_exam(manifest_path: &Path, inputs: &DetectInputs) -> Result<PreparedExam> {
    prepare_exam_cached(manifest_path, inputs, None)
}

/// Like [`prepare_exam`], optionally backed by an on-disk similarity
/// cache. The cache is reused only when its recorded source hash matches
/// the channel file; otherwise the matrix is recomputed and the cache
/// rewritten.
pub fn prepare_exam_cached(
    manifest_path: &Path,
    inputs: &DetectInputs,
    sim_cache: Option<&Path>,
) -> Result<PreparedExam> {
    let manifest = corpus::load_manifest(manifest_path)?;
    let similarity = match sim_cache {
        None => {
            let emb = corpus::load_embeddings(&manifest, &inputs.sim_channel)?;
            similarity_matrix(&emb)?
        }
        Some(cache_path) => {
            let ch = manifest
                .embedding_channels
                .get(&inputs.sim_channel)
                .ok_or_else(|| Error::UnknownChannel(inputs.sim_channel.clone()))?;
            let source_path = manifest.resolve(&ch.path);
            let source = std::fs::read(&source_path).map_err(|source| Error::Io {
                path: source_path,
                source,
            })?;
            let hash = crate::similarity::sha256_hex(&source);
            let cached = crate::similarity::load_cache(cache_path)
                .ok()
                .filter(|(_, meta)| {
                    meta.source_sha256 == hash && meta.channel == inputs.sim_channel
                });
            match cached {
                Some((s, _)) => s,
                None => {
                    let emb = corpus::load_embeddings(&manifest, &inputs.sim_channel)?;
                    let s = similarity_matrix(&emb)?;
                    crate::similarity::save_cache(
                        cache_path,
                        &s,
                        &crate::similarity::CacheMeta {
                            frames: manifest.frame_count,
                            channel: inputs.sim_channel.clone(),
                            source_sha256: hash,
                        },
                    )?;
                    s
                }
            }
        }
    };
    let scores = match inputs.scorer {
        ScorerKind::ScoresChannel => ScoreVector::new(corpus::load_scores(&manifest)?)?,
        ScorerKind::Baseline => {
            let detector = corpus::load_embeddings(&manifest, &inputs.detector_channel)?;
            let labels = corpus::load_labels(&manifest)?;
            let prototypes = build_prototypes(&[(&detector, &labels)], inputs.prototype_dedup)?;
            baseline_score(&detector, &prototypes)?
        }
    };
    Ok(PreparedExam {
        manifest,
        similarity,
        scores,
    })
}

/// Run detection on a manifest and return the selected keyframes.
pub fn detect(manifest_path: &Path, inputs: &DetectInputs) -> Result<KeyframeSet> {
    detect_cached(manifest_path, inputs, None)
}

pub fn detect_cached(
    manifest_path: &Path,
    inputs: &DetectInputs,
    sim_cache: Option<&Path>,
) -> Result<KeyframeSet> {
    let prepared = prepare_exam_cached(manifest_path, inputs, sim_cache)?;
    diverse_select(&prepared.scores, &prepared.similarity, &inputs.detection)
}

/// Remap ground-truth keyframes onto the surviving timeline. A frame that
/// survived keeps its position; a dropped frame moves to its
/// highest-similarity survivor (the premise being that dropped frames are
/// redundant duplicates). Positions are deduplicated and sorted.
pub fn remap_ground_truth(
    gt: &KeyframeSet,
    retained: &[usize],
    s: &SimilarityMatrix,
) -> Result<KeyframeSet> {
    let mut positions: Vec<usize> = Vec::with_capacity(gt.len());
    for &g in gt.indices() {
        if g >= s.size() {
            return Err(Error::IndexOutOfRange {
                index: g,
                len: s.size(),
            });
        }
        let pos = match retained.binary_search(&g) {
            Ok(pos) => pos,
            Err(_) => {
                let mut best_pos = 0usize;
                let mut best_sim = f64::NEG_INFINITY;
                for (pos, &r) in retained.iter().enumerate() {
                    let sim = s.get(g, r);
                    if sim > best_sim {
                        best_sim = sim;
                        best_pos = pos;
                    }
                }
                best_pos
            }
        };
        positions.push(pos);
    }
    positions.sort_unstable();
    positions.dedup();
    KeyframeSet::from_indices(positions)
}

/// One (exam, fraction) cell of the drop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamDropResult {
    pub exam_id: String,
    pub drop_fraction: f64,
    /// Fraction of frames eligible for dropping (measured, per exam).
    pub eligible_fraction: f64,
    /// eligible_fraction x drop_fraction.
    pub scan_time_saved: f64,
    pub retained_frames: usize,
    pub report: DetectionReport,
}

/// Aggregated row of the drop table, one per fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropTableRow {
    pub drop_fraction: f64,
    pub exams: usize,
    pub scan_time_saved_pct_mean: f64,
    pub cosine_simi_pct_mean: f64,
    pub cosine_simi_pct_std: f64,
    pub absolute_time_err_s_mean: f64,
    pub absolute_time_err_s_std: f64,
    pub correct_time_err_s_mean: f64,
    pub correct_time_err_s_std: f64,
    pub keyframe_num_err_mean: f64,
    pub keyframe_num_err_std: f64,
}

/// Configuration for the drop experiment.
#[derive(Debug, Clone)]
pub struct DropRunConfig {
    pub inputs: DetectInputs,
    pub fractions: Vec<f64>,
    /// Eligibility threshold for redundant frames.
    pub high_sim_threshold: f64,
    /// Metric threshold for the correct-time metric.
    pub sim_threshold: f64,
    pub seed: u64,
}

impl Default for DropRunConfig {
    fn default() -> Self {
        Self {
            inputs: DetectInputs::default(),
            fractions: vec![0.0, 0.5, 0.75, 0.9, 0.95],
            high_sim_threshold: 0.97,
            sim_threshold: crate::detect_eval::DEFAULT_SIM_THRESHOLD,
            seed: 0,
        }
    }
}

/// Drop, re-detect, and evaluate one exam at one fraction.
pub fn simulate_drop_exam(
    prepared: &PreparedExam,
    gt: &KeyframeSet,
    fraction: f64,
    cfg: &DropRunConfig,
) -> Result<ExamDropResult> {
    let manifest = &prepared.manifest;
    let labels = corpus::load_labels(manifest)?;
    let eligible = eligible_frames(&prepared.similarity, &labels, cfg.high_sim_threshold)?;
    let eligible_fraction = eligible.len() as f64 / manifest.frame_count as f64;
    let retained = drop_frames(
        &prepared.similarity,
        &labels,
        fraction,
        cfg.high_sim_threshold,
        cfg.seed,
    )?;
    let s_kept = prepared.similarity.slice(&retained)?;
    let scores_kept = prepared.scores.slice(&retained)?;
    let pred = diverse_select(&scores_kept, &s_kept, &cfg.inputs.detection)?;
    let gt_kept = remap_ground_truth(gt, &retained, &prepared.similarity)?;
    let report = evaluate_detection(&pred, &gt_kept, &s_kept, manifest.fps, cfg.sim_threshold)?;
    Ok(ExamDropResult {
        exam_id: manifest.exam_id.clone(),
        drop_fraction: fraction,
        eligible_fraction,
        scan_time_saved: eligible_fraction * fraction,
        retained_frames: retained.len(),
        report,
    })
}

fn run_exam_all_fractions(
    manifest_path: &Path,
    cfg: &DropRunConfig,
) -> Result<Vec<ExamDropResult>> {
    let prepared = prepare_exam(manifest_path, &cfg.inputs)?;
    let labels = corpus::load_labels(&prepared.manifest)?;
    let gt = KeyframeSet::from_indices(labels.key_indices())?;
    cfg.fractions
        .iter()
        .map(|&fraction| simulate_drop_exam(&prepared, &gt, fraction, cfg))
        .collect()
}

/// Run the full experiment over several exams with bounded parallelism.
/// Results are ordered by exam id, then fraction, regardless of the job
/// count.
pub fn simulate_drop_table(
    manifest_paths: &[PathBuf],
    cfg: &DropRunConfig,
    jobs: usize,
) -> Result<(Vec<ExamDropResult>, Vec<DropTableRow>)> {
    if manifest_paths.is_empty() {
        return Err(Error::InsufficientData("no exams given".into()));
    }
    let jobs = jobs.max(1).min(manifest_paths.len());
    let mut cells: Vec<ExamDropResult> = Vec::new();
    if jobs == 1 {
        for path in manifest_paths {
            cells.extend(
                run_exam_all_fractions(path, cfg)
                    .map_err(|e| annotate(e, path))?,
            );
        }
    } else {
        let results: Vec<Result<Vec<ExamDropResult>>> = std::thread::scope(|scope| {
            let chunk = manifest_paths.len().div_ceil(jobs);
            let handles: Vec<_> = manifest_paths
                .chunks(chunk)
                .map(|paths| {
                    scope.spawn(move || {
                        paths
                            .iter()
                            .map(|p| run_exam_all_fractions(p, cfg).map_err(|e| annotate(e, p)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for r in results {
            cells.extend(r?);
        }
    }
    cells.sort_by(|a, b| {
        (a.exam_id.as_str(), a.drop_fraction)
            .partial_cmp(&(b.exam_id.as_str(), b.drop_fraction))
            .unwrap()
    });

    let mut rows = Vec::new();
    for &fraction in &cfg.fractions {
        let group: Vec<&ExamDropResult> = cells
            .iter()
            .filter(|c| c.drop_fraction == fraction)
            .collect();
        let col = |f: &dyn Fn(&ExamDropResult) -> f64| -> Vec<f64> {
            group.iter().map(|c| f(c)).collect()
        };
        let (saved_mean, _) = mean_std(&col(&|c| c.scan_time_saved * 100.0));
        let (cos_mean, cos_std) = mean_std(&col(&|c| c.report.cosine_simi_pct));
        let (abs_mean, abs_std) = mean_std(&col(&|c| c.report.absolute_time_err_s));
        let (cor_mean, cor_std) = mean_std(&col(&|c| c.report.correct_time_err_s));
        let (num_mean, num_std) = mean_std(&col(&|c| c.report.keyframe_num_err as f64));
        rows.push(DropTableRow {
            drop_fraction: fraction,
            exams: group.len(),
            scan_time_saved_pct_mean: saved_mean,
            cosine_simi_pct_mean: cos_mean,
            cosine_simi_pct_std: cos_std,
            absolute_time_err_s_mean: abs_mean,
            absolute_time_err_s_std: abs_std,
            correct_time_err_s_mean: cor_mean,
            correct_time_err_s_std: cor_std,
            keyframe_num_err_mean: num_mean,
            keyframe_num_err_std: num_std,
        });
    }
    Ok((cells, rows))
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { path: p, source } => Error::Io { path: p, source },
        other => Error::InconsistentInputs(format!("{}: {other}", path.display())),
    }
}

/// Render the aggregated rows as CSV with Table-1-style columns.
pub fn drop_table_csv(rows: &[DropTableRow]) -> String {
    let mut out = String::from(
        "drop_fraction,exams,scan_time_saved_pct,cosine_simi_pct_mean,cosine_simi_pct_std,\
         absolute_time_err_s_mean,absolute_time_err_s_std,correct_time_err_s_mean,\
         correct_time_err_s_std,keyframe_num_err_mean,keyframe_num_err_std\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.drop_fraction,
            r.exams,
            r.scan_time_saved_pct_mean,
            r.cosine_simi_pct_mean,
            r.cosine_simi_pct_std,
            r.absolute_time_err_s_mean,
            r.absolute_time_err_s_std,
            r.correct_time_err_s_mean,
            r.correct_time_err_s_std,
            r.keyframe_num_err_mean,
            r.keyframe_num_err_std,
        ));
    }
    out
}
