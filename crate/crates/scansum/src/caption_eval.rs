//! Caption scoring (BLEU-1..4, ROUGE-L) and the pluggable caption
//! provider boundary.
//!
//! BLEU-n here is the cumulative variant: the geometric mean of modified
//! n-gram precisions of orders 1..n, multiplied by the brevity penalty,
//! single reference, no smoothing (a zero precision at any order zeroes
//! the score). Conventions differ between toolkits, so this is stated
//! prominently rather than assumed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::CaptionRecord;
use crate::error::{Error, Result};

/// ROUGE-L recall weighting used unless a caller overrides it.
pub const DEFAULT_ROUGE_BETA: f64 = 1.2;

/// Lowercase, split on Unicode whitespace, strip surrounding
/// non-alphanumeric characters from each token; tokens that become empty
/// are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.join("\u{1f}")).or_insert(0) += 1;
        }
    }
    counts
}

/// Modified (clipped) n-gram precision of `candidate` against a single
/// reference. Returns (clipped matches, total candidate n-grams).
fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let total: usize = cand.values().sum();
    let clipped: usize = cand
        .iter()
        .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped, total)
}

fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        return 0.0;
    }
    let r = reference_len as f64;
    let c = candidate_len as f64;
    (1.0 - r / c).exp().min(1.0)
}

/// Cumulative BLEU of order `n` (1..=4).
pub fn bleu_n(candidate: &[String], reference: &[String], n: usize) -> f64 {
    assert!((1..=4).contains(&n), "BLEU order must be 1..=4");
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0f64;
    for k in 1..=n {
        let (clipped, total) = modified_precision(candidate, reference, k);
        if clipped == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let geo_mean = (log_sum / n as f64).exp();
    brevity_penalty(candidate.len(), reference.len()) * geo_mean
}

/// Longest common subsequence length by dynamic programming.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                prev[j].max(cur[j - 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure with the default beta.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    rouge_l_with_beta(candidate, reference, DEFAULT_ROUGE_BETA)
}

/// ROUGE-L: LCS-based F-measure, R = LCS/|ref|, P = LCS/|cand|,
/// F = (1 + beta^2) R P / (R + beta^2 P).
pub fn rouge_l_with_beta(candidate: &[String], reference: &[String], beta: f64) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let r = lcs / reference.len() as f64;
    let p = lcs / candidate.len() as f64;
    let denom = r + beta * beta * p;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + beta * beta) * r * p / denom
}

/// Scores of one candidate/reference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionScore {
    pub bleu: [f64; 4],
    pub rouge_l: f64,
}

pub fn score_pair(candidate: &[String], reference: &[String]) -> CaptionScore {
    CaptionScore {
        bleu: [
            bleu_n(candidate, reference, 1),
            bleu_n(candidate, reference, 2),
            bleu_n(candidate, reference, 3),
            bleu_n(candidate, reference, 4),
        ],
        rouge_l: rouge_l(candidate, reference),
    }
}

/// Corpus-level aggregate: per-pair scores averaged, spread reported as
/// the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub count: usize,
    pub bleu_mean: [f64; 4],
    pub bleu_std: [f64; 4],
    pub rouge_l_mean: f64,
    pub rouge_l_std: f64,
}

pub fn score_corpus(pairs: &[(Vec<String>, Vec<String>)]) -> Result<CorpusScore> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores: Vec<CaptionScore> = pairs
        .iter()
        .map(|(c, r)| score_pair(c, r))
        .collect();
    let n = scores.len() as f64;
    let mut bleu_mean = [0.0f64; 4];
    let mut bleu_std = [0.0f64; 4];
    for k in 0..4 {
        let vals: Vec<f64> = scores.iter().map(|s| s.bleu[k]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        bleu_mean[k] = mean;
        bleu_std[k] = var.sqrt();
    }
    let rl: Vec<f64> = scores.iter().map(|s| s.rouge_l).collect();
    let rouge_l_mean = rl.iter().sum::<f64>() / n;
    let rouge_var = rl.iter().map(|v| (v - rouge_l_mean) * (v - rouge_l_mean)).sum::<f64>() / n;
    Ok(CorpusScore {
        count: scores.len(),
        bleu_mean,
        bleu_std,
        rouge_l_mean,
        rouge_l_std: rouge_var.sqrt(),
    })
}

/// Pair predicted and reference caption files by frame index and score
/// them. Frames present on only one side are skipped.
pub fn score_caption_records(
    pred: &[CaptionRecord],
    reference: &[CaptionRecord],
) -> Result<CorpusScore> {
    let by_frame: BTreeMap<usize, &CaptionRecord> =
        reference.iter().map(|r| (r.frame_index, r)).collect();
    let pairs: Vec<(Vec<String>, Vec<String>)> = pred
        .iter()
        .filter_map(|p| {
            by_frame
                .get(&p.frame_index)
                .map(|r| (tokenize(&p.text), tokenize(&r.text)))
        })
        .collect();
    score_corpus(&pairs)
}

/// Source of captions for detected keyframes. Caption generation itself
/// (the language-model stage) stays behind this boundary.
#[derive(Debug, Clone)]
pub enum CaptionProvider {
    /// Frame-indexed lookup loaded from a JSON-lines caption file.
    Lookup(BTreeMap<usize, CaptionRecord>),
    /// External command template; `{index}` and `{manifest}` are
    /// substituted, stdout (trimmed) becomes the caption.
    Exec(String),
}

impl CaptionProvider {
    /// Parse a CLI provider spec: `lookup:<captions.jsonl>` or
    /// `exec:<command template>`.
    pub fn from_cli_spec(spec: &str) -> Result<Self> {
        if let Some(path) = spec.strip_prefix("lookup:") {
            let records = crate::corpus::load_captions(Path::new(path))?;
            Ok(CaptionProvider::Lookup(
                records.into_iter().map(|r| (r.frame_index, r)).collect(),
            ))
        } else if let Some(cmd) = spec.strip_prefix("exec:") {
            Ok(CaptionProvider::Exec(cmd.to_string()))
        } else {
            Err(Error::InvalidValue(format!(
                "captioner spec must start with 'lookup:' or 'exec:', got '{spec}'"
            )))
        }
    }

    /// Caption for one keyframe, if the provider has one.
    pub fn caption(&self, frame_index: usize, manifest_path: &Path) -> Result<Option<String>> {
        match self {
            CaptionProvider::Lookup(map) => {
                Ok(map.get(&frame_index).map(|r| r.text.clone()))
            }
            CaptionProvider::Exec(template) => {
                let cmd = template
                    .replace("{index}", &frame_index.to_string())
                    .replace("{manifest}", &manifest_path.display().to_string());
                let output = std::process::Command::new("sh")
                    .arg("-c")
                    .arg(&cmd)
                    .output()
                    .map_err(|e| Error::CaptionerFailed(format!("{cmd}: {e}")))?;
                if !output.status.success() {
                    return Err(Error::CaptionerFailed(format!(
                        "{cmd}: exit {:?}",
                        output.status.code()
                    )));
                }
                let text = String::from_utf8_lossy(&output.stdout).trim().to_string();
                Ok((!text.is_empty()).then_some(text))
            }
        }
    }

    /// The full record when available (lookup providers retain biometry
    /// flags; exec providers produce plain text).
    pub fn record(&self, frame_index: usize) -> Option<&CaptionRecord> {
        match self {
            CaptionProvider::Lookup(map) => map.get(&frame_index),
            CaptionProvider::Exec(_) => None,
        }
    }
}
