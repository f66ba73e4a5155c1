//! On-disk exam corpus: manifests, embedding matrices, labels, captions,
//! masks, and caliper strips.
//!
//! The binary formats are deliberately minimal so any ML stack can produce
//! them (see `docs/formats.md` in the repository root):
//!
//! * embeddings / scores — raw little-endian 32-bit floats, row-major, no
//!   header; all metadata lives in the manifest
//! * keyframe labels — JSON array of 0/1 integers, length T
//! * captions — JSON lines, one [`CaptionRecord`] per line
//! * masks and caliper strips — 8-bit grayscale PNG or PGM (P2/P5)

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four biometry planes measured by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BiometryClass {
    HC,
    AC,
    FL,
    Cereb,
}

impl BiometryClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            BiometryClass::HC => "HC",
            BiometryClass::AC => "AC",
            BiometryClass::FL => "FL",
            BiometryClass::Cereb => "Cereb",
        }
    }
}

impl std::str::FromStr for BiometryClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HC" | "hc" => Ok(BiometryClass::HC),
            "AC" | "ac" => Ok(BiometryClass::AC),
            "FL" | "fl" => Ok(BiometryClass::FL),
            "Cereb" | "cereb" | "CEREB" => Ok(BiometryClass::Cereb),
            other => Err(Error::InvalidValue(format!(
                "unknown biometry class '{other}' (expected HC, AC, FL or Cereb)"
            ))),
        }
    }
}

/// Location and dimensionality of one embedding channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRef {
    pub dim: usize,
    pub path: PathBuf,
}

/// A segmentation mask attached to one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRef {
    pub frame_index: usize,
    pub class: BiometryClass,
    pub path: PathBuf,
}

/// Caliper strip rendered at the image edge, used for pixel-to-mm scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaliperRef {
    pub path: PathBuf,
    pub tick_spacing_mm: f64,
}

/// RNG provenance recorded by the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngInfo {
    pub algorithm: String,
    pub seed: u64,
}

fn default_fps() -> f64 {
    5.0
}

/// Top-level description of one exam recording. All paths are relative to
/// the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExamManifest {
    pub exam_id: String,
    pub frame_count: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub embedding_channels: BTreeMap<String, ChannelRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyframe_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Vec<MaskRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mm_per_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caliper_strip: Option<CaliperRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<RngInfo>,
    /// Directory the manifest was loaded from; set by [`load_manifest`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExamManifest {
    /// Resolve a manifest-relative path against the manifest's directory.
    pub fn resolve(&self, rel: &Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.base_dir.join(rel)
        }
    }

    /// Validate structural invariants and check every referenced file.
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::MalformedManifest(
                "frame_count must be at least 1".into(),
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::MalformedManifest("fps must be positive".into()));
        }
        if let Some(s) = self.mm_per_px {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::MalformedManifest(
                    "mm_per_px must be positive".into(),
                ));
            }
        }
        for (name, ch) in &self.embedding_channels {
            if ch.dim == 0 {
                return Err(Error::MalformedManifest(format!(
                    "channel '{name}' has dim 0"
                )));
            }
            let path = self.resolve(&ch.path);
            let meta = fs::metadata(&path).map_err(|_| Error::MissingFile(path.clone()))?;
            let expected = (self.frame_count * ch.dim * 4) as u64;
            if meta.len() != expected {
                return Err(Error::SizeMismatch {
                    path,
                    expected,
                    actual: meta.len(),
                });
            }
        }
        for rel in [&self.keyframe_labels, &self.captions].into_iter().flatten() {
            let path = self.resolve(rel);
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
        }
        if let Some(masks) = &self.masks {
            for m in masks {
                if m.frame_index >= self.frame_count {
                    return Err(Error::MalformedManifest(format!(
                        "mask frame_index {} out of range (T={})",
                        m.frame_index, self.frame_count
                    )));
                }
                let path = self.resolve(&m.path);
                if !path.is_file() {
                    return Err(Error::MissingFile(path));
                }
            }
            // biometry requested: need at least one pixel-scale source
            if !masks.is_empty() && self.mm_per_px.is_none() && self.caliper_strip.is_none() {
                return Err(Error::MalformedManifest(
                    "masks present but neither mm_per_px nor caliper_strip given".into(),
                ));
            }
        }
        if let Some(c) = &self.caliper_strip {
            if !(c.tick_spacing_mm.is_finite() && c.tick_spacing_mm > 0.0) {
                return Err(Error::MalformedManifest(
                    "caliper tick_spacing_mm must be positive".into(),
                ));
            }
            let path = self.resolve(&c.path);
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
        }
        Ok(())
    }
}

/// T x D matrix of per-frame features for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub channel: String,
    pub rows: usize,
    pub dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(channel: String, rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::LengthMismatch {
                what: "embedding values",
                expected: rows * dim,
                actual: values.len(),
            });
        }
        let m = Self {
            channel,
            rows,
            dim,
            values,
        };
        m.check_rows()?;
        Ok(m)
    }

    fn check_rows(&self) -> Result<()> {
        for t in 0..self.rows {
            let row = self.row(t);
            for (d, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        channel: self.channel.clone(),
                        row: t,
                        col: d,
                    });
                }
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::ZeroNormRow {
                    channel: self.channel.clone(),
                    row: t,
                });
            }
        }
        Ok(())
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Per-frame 0/1 keyframe annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyframeLabels(Vec<u8>);

impl KeyframeLabels {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v > 1) {
            return Err(Error::InvalidValue(format!(
                "keyframe label must be 0 or 1, found {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_key(&self, t: usize) -> bool {
        self.0[t] == 1
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    /// Indices of frames labeled 1, ascending.
    pub fn key_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, v)| (*v == 1).then_some(i))
            .collect()
    }
}

/// One caption annotation attached to a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub frame_index: usize,
    pub text: String,
    pub is_biometry: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biometry_class: Option<BiometryClass>,
}

impl CaptionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.is_biometry != self.biometry_class.is_some() {
            return Err(Error::InvalidValue(format!(
                "caption for frame {}: biometry_class must be present iff is_biometry",
                self.frame_index
            )));
        }
        Ok(())
    }
}

/// Thresholded foreground raster with a physical scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    /// Row-major, 1 = foreground.
    pub pixels: Vec<u8>,
    pub mm_per_px: f64,
}

impl BinaryMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|p| **p != 0).count()
    }
}

/// 8-bit grayscale raster (used for caliper strips).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse and eagerly validate an exam manifest.
pub fn load_manifest(path: &Path) -> Result<ExamManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut manifest: ExamManifest =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.validate()?;
    Ok(manifest)
}

/// Write a manifest as JSON. Does not validate referenced files, so it can
/// be written before its binary companions.
pub fn save_manifest(path: &Path, manifest: &ExamManifest) -> Result<()> {
    let text = crate::canonical::to_canonical_json(manifest)?;
    fs::write(path, text).map_err(io_err(path))
}

/// Load one embedding channel as a T x D matrix of little-endian f32.
pub fn load_embeddings(manifest: &ExamManifest, channel: &str) -> Result<EmbeddingMatrix> {
    let ch = manifest
        .embedding_channels
        .get(channel)
        .ok_or_else(|| Error::UnknownChannel(channel.to_string()))?;
    let path = manifest.resolve(&ch.path);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let expected = (manifest.frame_count * ch.dim * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values = bytes_to_f32(&bytes);
    EmbeddingMatrix::new(channel.to_string(), manifest.frame_count, ch.dim, values)
}

/// Write an embedding matrix as raw little-endian f32, row-major.
pub fn save_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    fs::write(path, f32_to_bytes(matrix.values())).map_err(io_err(path))
}

/// Load the per-frame score channel (raw f32, length T, values in [0, 1]).
///
/// Unlike embedding channels, a score of exactly 0 is legal, so this skips
/// the zero-norm row check.
pub fn load_scores(manifest: &ExamManifest) -> Result<Vec<f64>> {
    let ch = manifest
        .embedding_channels
        .get("scores")
        .ok_or_else(|| Error::UnknownChannel("scores".to_string()))?;
    if ch.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: ch.dim,
        });
    }
    let path = manifest.resolve(&ch.path);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let expected = (manifest.frame_count * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let raw = bytes_to_f32(&bytes);
    let mut out = Vec::with_capacity(raw.len());
    for (t, v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                channel: "scores".into(),
                row: t,
                col: 0,
            });
        }
        if !(0.0..=1.0).contains(v) {
            return Err(Error::InvalidValue(format!(
                "score {v} at frame {t} outside [0, 1]"
            )));
        }
        out.push(*v as f64);
    }
    Ok(out)
}

pub fn save_scores(path: &Path, scores: &[f32]) -> Result<()> {
    fs::write(path, f32_to_bytes(scores)).map_err(io_err(path))
}

fn bytes_to_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn f32_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Load the keyframe label vector referenced by the manifest.
pub fn load_labels(manifest: &ExamManifest) -> Result<KeyframeLabels> {
    let rel = manifest
        .keyframe_labels
        .as_ref()
        .ok_or_else(|| Error::MalformedManifest("manifest has no keyframe_labels".into()))?;
    let path = manifest.resolve(rel);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let values: Vec<u8> = serde_json::from_str(&text)
        .map_err(|e| Error::MalformedManifest(format!("labels {}: {e}", path.display())))?;
    if values.len() != manifest.frame_count {
        return Err(Error::LengthMismatch {
            what: "keyframe labels",
            expected: manifest.frame_count,
            actual: values.len(),
        });
    }
    KeyframeLabels::new(values)
}

pub fn save_labels(path: &Path, labels: &KeyframeLabels) -> Result<()> {
    let text = serde_json::to_string(labels)
        .map_err(|e| Error::InvalidValue(format!("serializing labels: {e}")))?;
    fs::write(path, text).map_err(io_err(path))
}

/// Load caption records from a JSON-lines file (blank lines ignored).
pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CaptionRecord = serde_json::from_str(&line).map_err(|e| {
            Error::MalformedManifest(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_captions(path: &Path, records: &[CaptionRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        r.validate()?;
        out.push_str(
            &serde_json::to_string(r)
                .map_err(|e| Error::InvalidValue(format!("serializing caption: {e}")))?,
        );
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

fn load_raster(path: &Path) -> Result<GrayRaster> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let format = match ext.as_str() {
        "png" => image::ImageFormat::Png,
        "pgm" | "pnm" => image::ImageFormat::Pnm,
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    };
    let bytes = fs::read(path).map_err(io_err(path))?;
    let img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|_| Error::UnsupportedFormat(path.to_path_buf()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    };
    Ok(GrayRaster {
        width: gray.width() as usize,
        height: gray.height() as usize,
        pixels: gray.into_raw(),
    })
}

/// Load a mask raster (8-bit gray PNG or PGM); any nonzero pixel is
/// foreground.
pub fn load_mask(path: &Path, mm_per_px: f64) -> Result<BinaryMask> {
    let raster = load_raster(path)?;
    let pixels: Vec<u8> = raster.pixels.iter().map(|p| (*p != 0) as u8).collect();
    if pixels.iter().all(|p| *p == 0) {
        return Err(Error::EmptyMask);
    }
    Ok(BinaryMask {
        width: raster.width,
        height: raster.height,
        pixels,
        mm_per_px,
    })
}

/// Load a grayscale raster without thresholding (caliper strips).
pub fn load_gray(path: &Path) -> Result<GrayRaster> {
    load_raster(path)
}

/// Write a grayscale raster as binary PGM (P5). The fixed header layout
/// keeps emission byte-stable.
pub fn save_pgm(path: &Path, raster: &GrayRaster) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    bytes.extend_from_slice(&raster.pixels);
    fs::write(path, bytes).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_minimal_exam(dir: &Path, t: usize, dim: usize) -> PathBuf {
        let values: Vec<f32> = (0..t * dim).map(|i| (i % 7) as f32 + 1.0).collect();
        let emb = EmbeddingMatrix::new("detector".into(), t, dim, values).unwrap();
        save_embeddings(&dir.join("detector.f32"), &emb).unwrap();
        let manifest = ExamManifest {
            exam_id: "mini".into(),
            frame_count: t,
            fps: 5.0,
            embedding_channels: BTreeMap::from([(
                "detector".to_string(),
                ChannelRef {
                    dim,
                    path: "detector.f32".into(),
                },
            )]),
            keyframe_labels: None,
            captions: None,
            masks: None,
            mm_per_px: None,
            caliper_strip: None,
            rng: None,
            base_dir: PathBuf::new(),
        };
        let path = dir.join("manifest.json");
        save_manifest(&path, &manifest).unwrap();
        path
    }

    #[test]
    fn minimal_manifest_loads() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 1, 4);
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.frame_count, 1);
        assert_eq!(m.fps, 5.0);
        assert_eq!(m.embedding_channels["detector"].dim, 4);
    }

    #[test]
    fn manifest_roundtrips_exactly() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 3, 4);
        let loaded = load_manifest(&path).unwrap();
        let copy = dir.path().join("copy.json");
        save_manifest(&copy, &loaded).unwrap();
        let reloaded = load_manifest(&copy).unwrap();
        // base_dir is not serialized; compare the persisted content
        assert_eq!(
            serde_json::to_value(&loaded).unwrap(),
            serde_json::to_value(&reloaded).unwrap()
        );
    }

    #[test]
    fn short_embedding_file_is_size_mismatch() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 4, 4);
        // chop 16 bytes off the end
        let emb_path = dir.path().join("detector.f32");
        let bytes = fs::read(&emb_path).unwrap();
        fs::write(&emb_path, &bytes[..bytes.len() - 16]).unwrap();
        match load_manifest(&path) {
            Err(Error::SizeMismatch { expected, actual, .. }) => {
                assert_eq!(expected, 64);
                assert_eq!(actual, 48);
            }
            other => panic!("expected SizeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn known_bytes_decode_row_major() {
        let dir = TempDir::new().unwrap();
        let mut bytes = Vec::new();
        for v in [1.0f32, 0.0, 0.0, 0.0, 1.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.path().join("e.f32"), &bytes).unwrap();
        let manifest = ExamManifest {
            exam_id: "x".into(),
            frame_count: 2,
            fps: 5.0,
            embedding_channels: BTreeMap::from([(
                "detector".to_string(),
                ChannelRef {
                    dim: 3,
                    path: "e.f32".into(),
                },
            )]),
            keyframe_labels: None,
            captions: None,
            masks: None,
            mm_per_px: None,
            caliper_strip: None,
            rng: None,
            base_dir: dir.path().to_path_buf(),
        };
        let e = load_embeddings(&manifest, "detector").unwrap();
        assert_eq!(e.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(e.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_row_rejected() {
        let err = EmbeddingMatrix::new("c".into(), 2, 2, vec![1.0, 2.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::ZeroNormRow { row: 1, .. }));
    }

    #[test]
    fn nan_rejected() {
        let err =
            EmbeddingMatrix::new("c".into(), 1, 2, vec![f32::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 0, col: 0, .. }));
    }

    #[test]
    fn unknown_channel() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 1, 4);
        let m = load_manifest(&path).unwrap();
        assert!(matches!(
            load_embeddings(&m, "similarity"),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn mask_single_center_pixel() {
        let dir = TempDir::new().unwrap();
        let mut pixels = vec![0u8; 9];
        pixels[4] = 255;
        let raster = GrayRaster {
            width: 3,
            height: 3,
            pixels,
        };
        let path = dir.path().join("m.pgm");
        save_pgm(&path, &raster).unwrap();
        let mask = load_mask(&path, 0.1).unwrap();
        assert_eq!(mask.foreground_count(), 1);
        assert!(mask.get(1, 1));
    }

    #[test]
    fn all_zero_mask_is_empty() {
        let dir = TempDir::new().unwrap();
        let raster = GrayRaster {
            width: 3,
            height: 3,
            pixels: vec![0u8; 9],
        };
        let path = dir.path().join("m.pgm");
        save_pgm(&path, &raster).unwrap();
        assert!(matches!(load_mask(&path, 0.1), Err(Error::EmptyMask)));
    }

    #[test]
    fn unsupported_extension() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("m.bmp");
        fs::write(&path, b"xx").unwrap();
        assert!(matches!(
            load_mask(&path, 0.1),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn caption_roundtrip_and_validation() {
        let dir = TempDir::new().unwrap();
        let records = vec![
            CaptionRecord {
                frame_index: 3,
                text: "four chamber heart view".into(),
                is_biometry: false,
                biometry_class: None,
            },
            CaptionRecord {
                frame_index: 9,
                text: "head circumference plane".into(),
                is_biometry: true,
                biometry_class: Some(BiometryClass::HC),
            },
        ];
        let path = dir.path().join("captions.jsonl");
        save_captions(&path, &records).unwrap();
        assert_eq!(load_captions(&path).unwrap(), records);

        let bad = CaptionRecord {
            frame_index: 0,
            text: "x".into(),
            is_biometry: true,
            biometry_class: None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn masks_without_scale_source_rejected() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 2, 4);
        let mask_path = dir.path().join("m.pgm");
        let mut pixels = vec![0u8; 9];
        pixels[4] = 255;
        save_pgm(
            &mask_path,
            &GrayRaster {
                width: 3,
                height: 3,
                pixels,
            },
        )
        .unwrap();
        let mut m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m["masks"] = serde_json::json!([
            {"frame_index": 0, "class": "HC", "path": "m.pgm"}
        ]);
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(Error::MalformedManifest(msg)) if msg.contains("mm_per_px")
        ));
        // adding a scale makes it valid
        let mut m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m["mm_per_px"] = serde_json::json!(0.2);
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(load_manifest(&path).is_ok());
    }

    #[test]
    fn scores_channel_allows_zeros_but_not_out_of_range() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 3, 4);
        save_scores(&dir.path().join("scores.f32"), &[0.0, 0.5, 1.0]).unwrap();
        let mut m = load_manifest(&path).unwrap();
        m.embedding_channels.insert(
            "scores".into(),
            ChannelRef {
                dim: 1,
                path: "scores.f32".into(),
            },
        );
        assert_eq!(load_scores(&m).unwrap(), vec![0.0, 0.5, 1.0]);

        save_scores(&dir.path().join("scores.f32"), &[0.0, 1.5, 1.0]).unwrap();
        assert!(matches!(load_scores(&m), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn mutated_corpus_is_rejected() {
        let dir = TempDir::new().unwrap();
        let path = write_minimal_exam(dir.path(), 4, 4);

        // flip T upward: embedding file no longer matches T*D*4
        let mut m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m["frame_count"] = serde_json::json!(5);
        let flipped = dir.path().join("flipped.json");
        fs::write(&flipped, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(
            load_manifest(&flipped),
            Err(Error::SizeMismatch { .. })
        ));

        // inject a NaN into the binary payload
        let emb_path = dir.path().join("detector.f32");
        let mut bytes = fs::read(&emb_path).unwrap();
        bytes[0..4].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&emb_path, &bytes).unwrap();
        let manifest = load_manifest(&path).unwrap();
        assert!(matches!(
            load_embeddings(&manifest, "detector"),
            Err(Error::NonFiniteValue { row: 0, col: 0, .. })
        ));

        // delete the referenced file entirely
        fs::remove_file(&emb_path).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::MissingFile(_))));
    }

    #[test]
    fn labels_length_checked() {
        let dir = TempDir::new().unwrap();
        let manifest_path = write_minimal_exam(dir.path(), 3, 4);
        fs::write(dir.path().join("labels.json"), "[0,1]").unwrap();
        let mut m = load_manifest(&manifest_path).unwrap();
        m.keyframe_labels = Some("labels.json".into());
        assert!(matches!(
            load_labels(&m),
            Err(Error::LengthMismatch { expected: 3, actual: 2, .. })
        ));
    }
}
