//! Seeded synthetic exam generator.
//!
//! Plants ground truth for every pipeline stage: cluster-structured
//! embeddings with known keyframes, captions, rasterized biometry masks
//! with exact shape parameters, and a caliper strip with known tick
//! geometry. Frame vectors are built as slerp between a cluster centroid
//! and a random orthogonal direction, which pins the realized
//! within-cluster cosine to the requested target; centroids are rejection
//! sampled until every pairwise cosine stays below the cross-cluster
//! target.
//!
//! All randomness comes from one ChaCha12 generator, and the algorithm
//! identifier plus seed are recorded in the manifest, so a corpus is
//! byte-reproducible from its spec.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::biometry::{
    ellipse_perimeter, rasterize_bar, rasterize_ellipse, EllipseParams,
};
use crate::canonical::write_canonical_json;
use crate::corpus::{
    save_captions, save_embeddings, save_labels, save_manifest, save_pgm, BinaryMask,
    BiometryClass, CaliperRef, CaptionRecord, ChannelRef, EmbeddingMatrix, ExamManifest,
    GrayRaster, KeyframeLabels, MaskRef, RngInfo,
};
use crate::error::{Error, Result};
use crate::keyframe::RNG_ALGORITHM;
use crate::similarity::cosine;

const MAX_SAMPLING_ATTEMPTS: usize = 5000;
/// Realized similarity statistics must land this close to the targets.
const REALIZED_TOLERANCE: f64 = 0.01;
/// Within-cluster cosines are jittered by up to this much so scores are
/// not all identical.
const WITHIN_JITTER: f64 = 0.005;
const MASK_MARGIN_PX: f64 = 4.0;
const CALIPER_WIDTH_PX: usize = 16;

/// One planted biometry shape. HC/AC use `a`/`b` semi-axes; FL/Cereb use
/// `length`/`width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class: BiometryClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub theta: f64,
    pub center: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaliperSpec {
    pub tick_spacing_mm: f64,
    #[serde(default)]
    pub tick_jitter_px: u32,
    #[serde(default = "default_ticks")]
    pub ticks: usize,
}

fn default_ticks() -> usize {
    8
}

fn default_kpc() -> usize {
    1
}

fn default_fps() -> f64 {
    5.0
}

fn default_mm_per_px() -> f64 {
    0.2
}

/// Everything the generator needs to build one exam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rng_seed: u64,
    pub frames: usize,
    pub dim: usize,
    pub clusters: usize,
    #[serde(default = "default_kpc")]
    pub keyframes_per_cluster: usize,
    pub within_cluster_similarity: f64,
    pub cross_cluster_similarity: f64,
    pub noise_frames_fraction: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exam_id: Option<String>,
    #[serde(default = "default_mm_per_px")]
    pub mm_per_px: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caliper: Option<CaliperSpec>,
    #[serde(default)]
    pub biometry_shapes: Vec<ShapeSpec>,
}

impl SynthSpec {
    /// A well-formed exam with all four biometry planes planted; the
    /// starting point for examples and tests.
    pub fn demo(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            frames: 500,
            dim: 32,
            clusters: 8,
            keyframes_per_cluster: 1,
            within_cluster_similarity: 0.98,
            cross_cluster_similarity: 0.3,
            noise_frames_fraction: 0.3,
            fps: 5.0,
            exam_id: None,
            mm_per_px: 0.2,
            caliper: Some(CaliperSpec {
                tick_spacing_mm: 10.0,
                tick_jitter_px: 0,
                ticks: 8,
            }),
            biometry_shapes: vec![
                ShapeSpec {
                    class: BiometryClass::HC,
                    a: Some(100.0),
                    b: Some(60.0),
                    length: None,
                    width: None,
                    theta: 0.3,
                    center: (128.0, 128.0),
                },
                ShapeSpec {
                    class: BiometryClass::AC,
                    a: Some(120.0),
                    b: Some(90.0),
                    length: None,
                    width: None,
                    theta: 1.1,
                    center: (160.0, 160.0),
                },
                ShapeSpec {
                    class: BiometryClass::FL,
                    a: None,
                    b: None,
                    length: Some(200.0),
                    width: Some(20.0),
                    theta: 0.5,
                    center: (130.0, 130.0),
                },
                ShapeSpec {
                    class: BiometryClass::Cereb,
                    a: None,
                    b: None,
                    length: Some(90.0),
                    width: Some(24.0),
                    theta: 1.3,
                    center: (80.0, 80.0),
                },
            ],
        }
    }

    pub fn exam_id(&self) -> String {
        self.exam_id
            .clone()
            .unwrap_or_else(|| format!("synth-{}", self.rng_seed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.frames == 0 {
            return fail("frames must be at least 1".into());
        }
        if self.dim < 2 {
            return fail("dim must be at least 2".into());
        }
        if self.clusters == 0 || self.keyframes_per_cluster == 0 {
            return fail("need at least one cluster and one keyframe per cluster".into());
        }
        if self.within_cluster_similarity <= self.cross_cluster_similarity {
            return fail(format!(
                "within_cluster_similarity {} must exceed cross_cluster_similarity {}",
                self.within_cluster_similarity, self.cross_cluster_similarity
            ));
        }
        if !(self.within_cluster_similarity > 0.0 && self.within_cluster_similarity < 1.0) {
            return fail("within_cluster_similarity must be in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.cross_cluster_similarity) {
            return fail("cross_cluster_similarity must be in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.noise_frames_fraction) {
            return fail("noise_frames_fraction must be in [0, 1)".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return fail("fps must be positive".into());
        }
        if !(self.mm_per_px.is_finite() && self.mm_per_px > 0.0) {
            return fail("mm_per_px must be positive".into());
        }
        let segments = self.clusters * self.keyframes_per_cluster;
        let noise = (self.noise_frames_fraction * self.frames as f64).floor() as usize;
        if self.frames - noise < segments {
            return fail(format!(
                "{} frames minus {noise} noise frames cannot host {segments} cluster segments",
                self.frames
            ));
        }
        if self.biometry_shapes.len() > segments {
            return fail(format!(
                "{} biometry shapes but only {segments} keyframes",
                self.biometry_shapes.len()
            ));
        }
        for s in &self.biometry_shapes {
            shape_dims(s)?;
        }
        if let Some(c) = &self.caliper {
            if !(c.tick_spacing_mm.is_finite() && c.tick_spacing_mm > 0.0) {
                return fail("caliper tick_spacing_mm must be positive".into());
            }
            if c.ticks < 2 {
                return fail("caliper needs at least 2 ticks".into());
            }
        }
        Ok(())
    }
}

/// (extent from center, primary length, secondary length) in px.
fn shape_dims(s: &ShapeSpec) -> Result<(f64, f64, f64)> {
    match s.class {
        BiometryClass::HC | BiometryClass::AC => {
            let (a, b) = match (s.a, s.b) {
                (Some(a), Some(b)) if a >= b && b > 0.0 => (a, b),
                _ => {
                    return Err(Error::InfeasibleSpec(format!(
                        "{} shape needs semi-axes a >= b > 0",
                        s.class.as_str()
                    )))
                }
            };
            Ok((a, a, b))
        }
        BiometryClass::FL | BiometryClass::Cereb => {
            let (l, w) = match (s.length, s.width) {
                (Some(l), Some(w)) if l >= w && w > 0.0 => (l, w),
                _ => {
                    return Err(Error::InfeasibleSpec(format!(
                        "{} shape needs length >= width > 0",
                        s.class.as_str()
                    )))
                }
            };
            Ok((((l / 2.0).powi(2) + (w / 2.0).powi(2)).sqrt(), l, w))
        }
    }
}

/// Exact parameters of one planted shape plus its analytic measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedShape {
    pub frame_index: usize,
    pub class: BiometryClass,
    pub shape: ShapeSpec,
    /// HC/AC: analytic ellipse perimeter in mm. FL/Cereb: bar length in mm.
    pub expected_mm: f64,
    /// HC only: full minor axis in mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_bpd_mm: Option<f64>,
    pub mask_path: PathBuf,
}

/// Everything the generator planted, for oracle checks downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub exam_id: String,
    pub keyframe_indices: Vec<usize>,
    /// Cluster id per keyframe, aligned with `keyframe_indices`.
    pub keyframe_clusters: Vec<usize>,
    pub captions: Vec<CaptionRecord>,
    pub shapes: Vec<PlantedShape>,
    pub mm_per_px: f64,
    pub fps: f64,
}

struct BuiltExam {
    manifest: ExamManifest,
    embeddings: EmbeddingMatrix,
    labels: KeyframeLabels,
    captions: Vec<CaptionRecord>,
    masks: Vec<(MaskRef, BinaryMask)>,
    caliper: Option<GrayRaster>,
    ground_truth: GroundTruth,
}

fn gauss(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 1e-300 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit_vector(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vector orthogonal to `u`.
fn orthogonal_unit(rng: &mut ChaCha12Rng, u: &[f64]) -> Vec<f64> {
    loop {
        let w = unit_vector(rng, u.len());
        let proj = dot(&w, u);
        let v: Vec<f64> = w.iter().zip(u).map(|(wi, ui)| wi - proj * ui).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn sample_centroids(
    rng: &mut ChaCha12Rng,
    clusters: usize,
    dim: usize,
    cross_target: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_SAMPLING_ATTEMPTS {
                return Err(Error::InfeasibleSpec(format!(
                    "could not place centroid {c} with pairwise cosine below {cross_target} in dimension {dim}"
                )));
            }
            let candidate = unit_vector(rng, dim);
            if centroids.iter().all(|m| dot(m, &candidate) < cross_target) {
                centroids.push(candidate);
                break;
            }
        }
    }
    Ok(centroids)
}

const ANATOMY_CAPTIONS: [&str; 8] = [
    "four chamber view of the fetal heart",
    "sagittal view of the fetal spine",
    "profile view of the fetal face",
    "left ventricular outflow tract view",
    "coronal view of the lips and nose",
    "transverse view of the fetal kidneys",
    "view of the fetal diaphragm",
    "three vessel and trachea view",
];

fn biometry_caption(class: BiometryClass) -> &'static str {
    match class {
        BiometryClass::HC => "standard plane for head circumference measurement",
        BiometryClass::AC => "standard plane for abdominal circumference measurement",
        BiometryClass::FL => "femur length measurement plane",
        BiometryClass::Cereb => "transcerebellar plane showing the cerebellum",
    }
}

/// Split `total` into `parts` chunks differing by at most one.
fn split_even(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts)
        .map(|i| base + usize::from(i < extra))
        .collect()
}

fn build(spec: &SynthSpec) -> Result<BuiltExam> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.rng_seed);
    let t = spec.frames;
    let dim = spec.dim;
    let segments = spec.clusters * spec.keyframes_per_cluster;
    let n_noise = (spec.noise_frames_fraction * t as f64).floor() as usize;

    let centroids = sample_centroids(&mut rng, spec.clusters, dim, spec.cross_cluster_similarity)?;

    // timeline: gap seg gap seg ... seg gap, clusters revisited round-robin
    let seg_sizes = split_even(t - n_noise, segments);
    let gap_sizes = split_even(n_noise, segments + 1);

    let mut frames: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut labels = vec![0u8; t];
    let mut keyframe_indices = Vec::with_capacity(segments);
    let mut keyframe_clusters = Vec::with_capacity(segments);
    // (frame, cluster) for non-key cluster frames, for the realized check
    let mut member_frames: Vec<(usize, usize)> = Vec::new();

    let mut noise_budget: Vec<usize> = gap_sizes.clone();
    let alpha_base = spec.within_cluster_similarity;

    let push_noise = |rng: &mut ChaCha12Rng, frames: &mut Vec<Vec<f64>>, count: usize| -> Result<()> {
        for _ in 0..count {
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > MAX_SAMPLING_ATTEMPTS {
                    return Err(Error::InfeasibleSpec(
                        "could not sample a noise frame dissimilar to all centroids".into(),
                    ));
                }
                let v = unit_vector(rng, dim);
                if centroids
                    .iter()
                    .all(|m| dot(m, &v) < spec.cross_cluster_similarity)
                {
                    frames.push(v);
                    break;
                }
            }
        }
        Ok(())
    };

    for seg in 0..segments {
        push_noise(&mut rng, &mut frames, noise_budget[seg])?;
        noise_budget[seg] = 0;
        let cluster = seg % spec.clusters;
        let len = seg_sizes[seg];
        let key_pos = frames.len() + len / 2;
        for _ in 0..len {
            let idx = frames.len();
            if idx == key_pos {
                frames.push(centroids[cluster].clone());
                labels[idx] = 1;
                keyframe_indices.push(idx);
                keyframe_clusters.push(cluster);
            } else {
                let jitter = rng.gen_range(-WITHIN_JITTER..WITHIN_JITTER);
                let target = (alpha_base + jitter).clamp(0.0, 0.999_999);
                let angle = target.acos();
                let ortho = orthogonal_unit(&mut rng, &centroids[cluster]);
                let v: Vec<f64> = centroids[cluster]
                    .iter()
                    .zip(&ortho)
                    .map(|(c, o)| angle.cos() * c + angle.sin() * o)
                    .collect();
                frames.push(v);
                member_frames.push((idx, cluster));
            }
        }
    }
    push_noise(&mut rng, &mut frames, gap_sizes[segments])?;

    debug_assert_eq!(frames.len(), t);

    let values: Vec<f32> = frames
        .iter()
        .flat_map(|row| row.iter().map(|v| *v as f32))
        .collect();
    let embeddings = EmbeddingMatrix::new("detector".into(), t, dim, values)?;

    // realized-similarity check against the planted structure (on the f32
    // values actually written to disk)
    let key_rows: Vec<usize> = keyframe_indices.clone();
    for &(idx, cluster) in &member_frames {
        let key_idx = key_rows[keyframe_clusters
            .iter()
            .position(|&c| c == cluster)
            .expect("cluster has a keyframe")];
        let realized = cosine(embeddings.row(idx), embeddings.row(key_idx))?;
        if (realized - spec.within_cluster_similarity).abs() > REALIZED_TOLERANCE {
            return Err(Error::InfeasibleSpec(format!(
                "realized within-cluster cosine {realized} strayed from target {}",
                spec.within_cluster_similarity
            )));
        }
    }
    for i in 0..key_rows.len() {
        for j in (i + 1)..key_rows.len() {
            if keyframe_clusters[i] == keyframe_clusters[j] {
                continue;
            }
            let realized = cosine(embeddings.row(key_rows[i]), embeddings.row(key_rows[j]))?;
            if realized > spec.cross_cluster_similarity + REALIZED_TOLERANCE {
                return Err(Error::InfeasibleSpec(format!(
                    "realized cross-cluster cosine {realized} exceeds target {}",
                    spec.cross_cluster_similarity
                )));
            }
        }
    }

    // captions: the first shapes.len() keyframes carry biometry planes
    let mut captions = Vec::new();
    let mut shapes = Vec::new();
    let mut masks = Vec::new();
    for (k, &frame_index) in keyframe_indices.iter().enumerate() {
        if let Some(shape) = spec.biometry_shapes.get(k) {
            captions.push(CaptionRecord {
                frame_index,
                text: biometry_caption(shape.class).to_string(),
                is_biometry: true,
                biometry_class: Some(shape.class),
            });
            let (extent, primary, secondary) = shape_dims(shape)?;
            let (cx, cy) = shape.center;
            if cx < extent + 1.0 || cy < extent + 1.0 {
                return Err(Error::InfeasibleSpec(format!(
                    "{} shape at ({cx}, {cy}) with extent {extent} leaves no background border",
                    shape.class.as_str()
                )));
            }
            let w = (cx + extent + MASK_MARGIN_PX).ceil() as usize;
            let h = (cy + extent + MASK_MARGIN_PX).ceil() as usize;
            let mask = match shape.class {
                BiometryClass::HC | BiometryClass::AC => rasterize_ellipse(
                    w,
                    h,
                    &EllipseParams {
                        cx,
                        cy,
                        semi_major: primary,
                        semi_minor: secondary,
                        theta: shape.theta,
                    },
                    spec.mm_per_px,
                ),
                BiometryClass::FL | BiometryClass::Cereb => rasterize_bar(
                    w,
                    h,
                    (cx, cy),
                    primary,
                    secondary,
                    shape.theta,
                    spec.mm_per_px,
                ),
            };
            let mask_path =
                PathBuf::from(format!("masks/frame_{frame_index:05}_{}.pgm", shape.class.as_str()));
            let (expected_mm, expected_bpd_mm) = match shape.class {
                BiometryClass::HC | BiometryClass::AC => {
                    let per = ellipse_perimeter(&EllipseParams {
                        cx: 0.0,
                        cy: 0.0,
                        semi_major: primary,
                        semi_minor: secondary,
                        theta: 0.0,
                    }) * spec.mm_per_px;
                    let bpd = (shape.class == BiometryClass::HC)
                        .then_some(2.0 * secondary * spec.mm_per_px);
                    (per, bpd)
                }
                BiometryClass::FL | BiometryClass::Cereb => {
                    (primary * spec.mm_per_px, None)
                }
            };
            shapes.push(PlantedShape {
                frame_index,
                class: shape.class,
                shape: shape.clone(),
                expected_mm,
                expected_bpd_mm,
                mask_path: mask_path.clone(),
            });
            masks.push((
                MaskRef {
                    frame_index,
                    class: shape.class,
                    path: mask_path,
                },
                mask,
            ));
        } else {
            captions.push(CaptionRecord {
                frame_index,
                text: ANATOMY_CAPTIONS[k % ANATOMY_CAPTIONS.len()].to_string(),
                is_biometry: false,
                biometry_class: None,
            });
        }
    }

    // caliper strip with the exam's true scale
    let caliper = spec.caliper.as_ref().map(|c| {
        let gap_px = c.tick_spacing_mm / spec.mm_per_px;
        let height = (gap_px * c.ticks as f64).ceil() as usize + 20;
        let mut pixels = vec![0u8; CALIPER_WIDTH_PX * height];
        for i in 0..c.ticks {
            let base = 10.0 + i as f64 * gap_px;
            let jitter = if c.tick_jitter_px > 0 {
                rng.gen_range(-(c.tick_jitter_px as i64)..=(c.tick_jitter_px as i64))
            } else {
                0
            };
            let row = (base.round() as i64 + jitter).clamp(0, height as i64 - 1) as usize;
            for x in 0..CALIPER_WIDTH_PX {
                pixels[row * CALIPER_WIDTH_PX + x] = 255;
            }
        }
        GrayRaster {
            width: CALIPER_WIDTH_PX,
            height,
            pixels,
        }
    });

    let exam_id = spec.exam_id();
    let mut channels = BTreeMap::new();
    channels.insert(
        "detector".to_string(),
        ChannelRef {
            dim,
            path: "embeddings.f32".into(),
        },
    );
    // the similarity channel aliases the detector file
    channels.insert(
        "similarity".to_string(),
        ChannelRef {
            dim,
            path: "embeddings.f32".into(),
        },
    );
    let manifest = ExamManifest {
        exam_id: exam_id.clone(),
        frame_count: t,
        fps: spec.fps,
        embedding_channels: channels,
        keyframe_labels: Some("labels.json".into()),
        captions: Some("captions.jsonl".into()),
        masks: (!masks.is_empty()).then(|| masks.iter().map(|(m, _)| m.clone()).collect()),
        mm_per_px: Some(spec.mm_per_px),
        caliper_strip: spec.caliper.as_ref().map(|c| CaliperRef {
            path: "caliper.pgm".into(),
            tick_spacing_mm: c.tick_spacing_mm,
        }),
        rng: Some(RngInfo {
            algorithm: RNG_ALGORITHM.into(),
            seed: spec.rng_seed,
        }),
        base_dir: PathBuf::new(),
    };

    let ground_truth = GroundTruth {
        exam_id,
        keyframe_indices: keyframe_indices.clone(),
        keyframe_clusters,
        captions: captions.clone(),
        shapes,
        mm_per_px: spec.mm_per_px,
        fps: spec.fps,
    };

    Ok(BuiltExam {
        manifest,
        embeddings,
        labels: KeyframeLabels::new(labels)?,
        captions,
        masks,
        caliper,
        ground_truth,
    })
}

/// The ground truth the generator would plant, without touching disk.
pub fn ground_truth(spec: &SynthSpec) -> Result<GroundTruth> {
    Ok(build(spec)?.ground_truth)
}

/// Generate a complete on-disk corpus under `out_dir` and return the
/// planted ground truth (also written as `ground_truth.json`).
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<GroundTruth> {
    let built = build(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    save_embeddings(&out_dir.join("embeddings.f32"), &built.embeddings)?;
    save_labels(&out_dir.join("labels.json"), &built.labels)?;
    save_captions(&out_dir.join("captions.jsonl"), &built.captions)?;
    if !built.masks.is_empty() {
        std::fs::create_dir_all(out_dir.join("masks")).map_err(|source| Error::Io {
            path: out_dir.join("masks"),
            source,
        })?;
    }
    for (mask_ref, mask) in &built.masks {
        let raster = GrayRaster {
            width: mask.width,
            height: mask.height,
            pixels: mask.pixels.iter().map(|p| p * 255).collect(),
        };
        save_pgm(&out_dir.join(&mask_ref.path), &raster)?;
    }
    if let Some(strip) = &built.caliper {
        save_pgm(&out_dir.join("caliper.pgm"), strip)?;
    }
    save_manifest(&out_dir.join("manifest.json"), &built.manifest)?;
    write_canonical_json(&out_dir.join("ground_truth.json"), &built.ground_truth)?;
    // ground-truth keyframes in the same format `eval-detect --gt` takes
    let gt_set =
        crate::keyframe::KeyframeSet::from_indices(built.ground_truth.keyframe_indices.clone())?;
    write_canonical_json(&out_dir.join("gt_keyframes.json"), &gt_set)?;
    Ok(built.ground_truth)
}
