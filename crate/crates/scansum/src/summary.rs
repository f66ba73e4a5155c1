//! Assembly and emission of the multimodal summary report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::biometry::{estimated_fetal_weight, gestational_age, BiometrySet, EquationTable};
use crate::canonical::{round6, to_canonical_json_fixed6};
use crate::corpus::{CaptionRecord, ExamManifest};
use crate::error::{Error, Result};
use crate::keyframe::KeyframeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryKeyframe {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biometry: Option<BiometrySet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAggregate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga_weeks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efw_grams: Option<f64>,
    pub scan_seconds: f64,
    pub keyframe_count: usize,
}

/// The final multimodal summary: keyframes with captions and biometry,
/// plus exam-level aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub exam_id: String,
    pub keyframes: Vec<SummaryKeyframe>,
    pub aggregate: SummaryAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

fn round_biometry(b: &BiometrySet) -> BiometrySet {
    BiometrySet {
        hc_mm: b.hc_mm.map(round6),
        ac_mm: b.ac_mm.map(round6),
        bpd_mm: b.bpd_mm.map(round6),
        cereb_mm: b.cereb_mm.map(round6),
        fl_mm: b.fl_mm.map(round6),
        ga_weeks: b.ga_weeks.map(round6),
        efw_grams: b.efw_grams.map(round6),
    }
}

/// Build the report from detection, captioning and measurement outputs.
///
/// Captions and measurements may only reference selected keyframes; a
/// measured keyframe must carry a biometry-flagged caption. GA and EFW
/// are computed once, from the merged per-exam measurements, when the
/// equation inputs are complete. All stored floats are rounded to 1e-6 so
/// emitted JSON round-trips exactly.
pub fn assemble(
    manifest: &ExamManifest,
    keyframes: &KeyframeSet,
    captions: &[CaptionRecord],
    measurements: &BTreeMap<usize, BiometrySet>,
    equations: &EquationTable,
) -> Result<SummaryReport> {
    let mut caption_by_frame: BTreeMap<usize, &CaptionRecord> = BTreeMap::new();
    for c in captions {
        c.validate()?;
        if !keyframes.indices().contains(&c.frame_index) {
            return Err(Error::InconsistentInputs(format!(
                "caption references frame {} which is not a keyframe",
                c.frame_index
            )));
        }
        caption_by_frame.insert(c.frame_index, c);
    }
    for &frame in measurements.keys() {
        if !keyframes.indices().contains(&frame) {
            return Err(Error::InconsistentInputs(format!(
                "measurement references frame {frame} which is not a keyframe"
            )));
        }
        match caption_by_frame.get(&frame) {
            Some(c) if c.is_biometry => {}
            _ => {
                return Err(Error::InconsistentInputs(format!(
                    "measured keyframe {frame} lacks a biometry caption"
                )))
            }
        }
    }
    for &i in keyframes.indices() {
        if i >= manifest.frame_count {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: manifest.frame_count,
            });
        }
    }

    let mut merged = BiometrySet::default();
    for b in measurements.values() {
        merged.merge(b);
    }
    let ga_weeks = if merged.hc_mm.is_some() || merged.ac_mm.is_some() || merged.fl_mm.is_some() {
        match gestational_age(&merged, equations) {
            Ok(ga) => Some(ga),
            Err(Error::MissingMeasurement(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let efw_grams = if merged.hc_mm.is_some() && merged.ac_mm.is_some() && merged.fl_mm.is_some() {
        Some(estimated_fetal_weight(&merged, equations)?)
    } else {
        None
    };

    let keyframe_rows: Vec<SummaryKeyframe> = keyframes
        .iter()
        .map(|(index, score)| SummaryKeyframe {
            frame_index: index,
            timestamp_s: round6(index as f64 / manifest.fps),
            score: round6(score),
            caption: caption_by_frame.get(&index).map(|c| c.text.clone()),
            biometry: measurements.get(&index).map(round_biometry),
        })
        .collect();

    Ok(SummaryReport {
        exam_id: manifest.exam_id.clone(),
        keyframes: keyframe_rows,
        aggregate: SummaryAggregate {
            ga_weeks: ga_weeks.map(round6),
            efw_grams: efw_grams.map(round6),
            scan_seconds: round6(manifest.frame_count as f64 / manifest.fps),
            keyframe_count: keyframes.len(),
        },
    })
}

/// Render the report: canonical JSON or a Markdown timeline table.
pub fn emit(report: &SummaryReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_canonical_json_fixed6(report),
        ReportFormat::Markdown => Ok(emit_markdown(report)),
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<SummaryReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::InvalidValue(format!("report JSON: {e}")))
}

fn biometry_cell(b: &Option<BiometrySet>) -> String {
    let Some(b) = b else {
        return "—".into();
    };
    let mut parts = Vec::new();
    for (name, v) in [
        ("HC", b.hc_mm),
        ("AC", b.ac_mm),
        ("BPD", b.bpd_mm),
        ("Cereb", b.cereb_mm),
        ("FL", b.fl_mm),
    ] {
        if let Some(v) = v {
            parts.push(format!("{name} {v:.1} mm"));
        }
    }
    if parts.is_empty() {
        "—".into()
    } else {
        parts.join("; ")
    }
}

fn emit_markdown(report: &SummaryReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Exam summary: {}\n\n", report.exam_id));
    out.push_str(&format!(
        "- Scan length: {:.1} s\n- Keyframes: {}\n",
        report.aggregate.scan_seconds, report.aggregate.keyframe_count
    ));
    match report.aggregate.ga_weeks {
        Some(ga) => out.push_str(&format!("- Gestational age: {ga:.1} weeks\n")),
        None => out.push_str("- Gestational age: n/a\n"),
    }
    match report.aggregate.efw_grams {
        Some(efw) => out.push_str(&format!("- Estimated fetal weight: {efw:.0} g\n")),
        None => out.push_str("- Estimated fetal weight: n/a\n"),
    }
    out.push_str("\n| frame | time (s) | score | caption | biometry |\n");
    out.push_str("|------:|---------:|------:|---------|----------|\n");
    for k in &report.keyframes {
        out.push_str(&format!(
            "| {} | {:.1} | {:.3} | {} | {} |\n",
            k.frame_index,
            k.timestamp_s,
            k.score,
            k.caption.as_deref().unwrap_or("—"),
            biometry_cell(&k.biometry),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BiometryClass;
    use std::collections::BTreeMap;
    use std::path::PathBuf;

    fn manifest(t: usize) -> ExamManifest {
        ExamManifest {
            exam_id: "exam-1".into(),
            frame_count: t,
            fps: 5.0,
            embedding_channels: BTreeMap::new(),
            keyframe_labels: None,
            captions: None,
            masks: None,
            mm_per_px: None,
            caliper_strip: None,
            rng: None,
            base_dir: PathBuf::new(),
        }
    }

    fn hc_caption(frame: usize) -> CaptionRecord {
        CaptionRecord {
            frame_index: frame,
            text: "head circumference plane".into(),
            is_biometry: true,
            biometry_class: Some(BiometryClass::HC),
        }
    }

    #[test]
    fn empty_keyframes_empty_report() {
        let m = manifest(10);
        let ks = KeyframeSet::from_indices(vec![]).unwrap();
        let r = assemble(&m, &ks, &[], &BTreeMap::new(), &EquationTable::default()).unwrap();
        assert!(r.keyframes.is_empty());
        assert!(r.aggregate.ga_weeks.is_none());
        assert!(r.aggregate.efw_grams.is_none());
        assert_eq!(r.aggregate.scan_seconds, 2.0);
    }

    #[test]
    fn caption_only_keyframe_has_null_biometry() {
        let m = manifest(10);
        let ks = KeyframeSet::from_indices(vec![4]).unwrap();
        let captions = vec![CaptionRecord {
            frame_index: 4,
            text: "four chamber view".into(),
            is_biometry: false,
            biometry_class: None,
        }];
        let r = assemble(&m, &ks, &captions, &BTreeMap::new(), &EquationTable::default()).unwrap();
        assert_eq!(r.keyframes.len(), 1);
        assert!(r.keyframes[0].biometry.is_none());
        assert_eq!(r.keyframes[0].caption.as_deref(), Some("four chamber view"));
        assert_eq!(r.keyframes[0].timestamp_s, 0.8);
    }

    #[test]
    fn caption_for_non_keyframe_rejected() {
        let m = manifest(10);
        let ks = KeyframeSet::from_indices(vec![4]).unwrap();
        let captions = vec![hc_caption(5)];
        assert!(matches!(
            assemble(&m, &ks, &captions, &BTreeMap::new(), &EquationTable::default()),
            Err(Error::InconsistentInputs(_))
        ));
    }

    #[test]
    fn measurement_without_biometry_caption_rejected() {
        let m = manifest(10);
        let ks = KeyframeSet::from_indices(vec![4]).unwrap();
        let mut meas = BTreeMap::new();
        meas.insert(
            4usize,
            BiometrySet {
                hc_mm: Some(150.0),
                ..BiometrySet::default()
            },
        );
        assert!(matches!(
            assemble(&m, &ks, &[], &meas, &EquationTable::default()),
            Err(Error::InconsistentInputs(_))
        ));
    }

    #[test]
    fn aggregate_ga_computed_from_hc() {
        let m = manifest(10);
        let ks = KeyframeSet::from_indices(vec![4]).unwrap();
        let captions = vec![hc_caption(4)];
        let mut meas = BTreeMap::new();
        meas.insert(
            4usize,
            BiometrySet {
                hc_mm: Some(175.0),
                bpd_mm: Some(44.0),
                ..BiometrySet::default()
            },
        );
        let r = assemble(&m, &ks, &captions, &meas, &EquationTable::default()).unwrap();
        assert!(r.aggregate.ga_weeks.is_some());
        assert!(r.aggregate.efw_grams.is_none()); // AC, FL absent
    }

    #[test]
    fn emit_is_deterministic_and_roundtrips() {
        let m = manifest(25);
        let ks = KeyframeSet::new(vec![3, 9, 17], vec![0.91234567, 0.85, 1.0]).unwrap();
        let captions = vec![hc_caption(9)];
        let mut meas = BTreeMap::new();
        meas.insert(
            9usize,
            BiometrySet {
                hc_mm: Some(150.123456789),
                bpd_mm: Some(47.7),
                ..BiometrySet::default()
            },
        );
        let r = assemble(&m, &ks, &captions, &meas, &EquationTable::default()).unwrap();
        let a = emit(&r, ReportFormat::Json).unwrap();
        let b = emit(&r, ReportFormat::Json).unwrap();
        assert_eq!(a, b);
        let parsed = parse_report(a.as_bytes()).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn markdown_has_one_row_per_keyframe() {
        let m = manifest(25);
        let ks = KeyframeSet::new(vec![3, 9, 17], vec![0.9, 0.85, 1.0]).unwrap();
        let r = assemble(&m, &ks, &[], &BTreeMap::new(), &EquationTable::default()).unwrap();
        let md = emit(&r, ReportFormat::Markdown).unwrap();
        let rows = md
            .lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| frame"))
            .count();
        assert_eq!(rows, 3);
    }
}
