//! scansum CLI: thin argument parsing and dispatch over the library.
//!
//! Exit codes: 0 success, 1 validation error, 2 i/o error, 3 numeric or
//! degenerate-input error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use scansum::biometry::{self, EquationTable};
use scansum::canonical::{to_canonical_json, write_canonical_json_fixed6};
use scansum::caption_eval::{score_caption_records, CaptionProvider};
use scansum::corpus::{self, BiometryClass, CaptionRecord};
use scansum::detect_eval::{evaluate_detection, DEFAULT_SIM_THRESHOLD};
use scansum::error::{Error, Result};
use scansum::keyframe::{DetectionConfig, KeyframeSet};
use scansum::pipeline::{
    self, drop_table_csv, DetectInputs, DropRunConfig, ScorerKind,
};
use scansum::similarity;
use scansum::stats;
use scansum::summary::{self, ReportFormat};
use scansum::synth::{self, SynthSpec};

#[derive(Parser)]
#[command(
    name = "scansum",
    about = "Keyframe detection, evaluation, and biometry for ultrasound exam recordings",
    version
)]
struct Cli {
    /// Print machine-parsable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// JSON config file supplying defaults for threshold/seed flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Optional defaults, overridden by explicit flags.
#[derive(Debug, Default, Clone, Deserialize)]
struct FileConfig {
    tau: Option<f64>,
    tau_prime: Option<f64>,
    propagation_threshold: Option<f64>,
    sim_channel: Option<String>,
    detector_channel: Option<String>,
    sim_threshold: Option<f64>,
    high_sim_threshold: Option<f64>,
    seed: Option<u64>,
    equations: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))
    }
}

#[derive(Args, Clone)]
struct DetectFlags {
    /// Masking threshold: frames more similar than this to a selected
    /// keyframe are suppressed.
    #[arg(long)]
    tau: Option<f64>,
    /// Score floor: selection stops when the best remaining score falls
    /// below this.
    #[arg(long = "tau-prime")]
    tau_prime: Option<f64>,
    /// Score source: "baseline" (prototype scorer) or "file" (manifest
    /// channel "scores").
    #[arg(long, default_value = "baseline")]
    scores: String,
    #[arg(long)]
    sim_channel: Option<String>,
    #[arg(long)]
    detector_channel: Option<String>,
}

impl DetectFlags {
    fn to_inputs(&self, cfg: &FileConfig) -> Result<DetectInputs> {
        let defaults = DetectionConfig::default();
        let detection = DetectionConfig {
            tau: self.tau.or(cfg.tau).unwrap_or(defaults.tau),
            tau_prime: self.tau_prime.or(cfg.tau_prime).unwrap_or(defaults.tau_prime),
            propagation_threshold: cfg
                .propagation_threshold
                .unwrap_or(defaults.propagation_threshold),
        };
        detection.validate()?;
        Ok(DetectInputs {
            detection,
            scorer: self.scores.parse::<ScorerKind>()?,
            sim_channel: self
                .sim_channel
                .clone()
                .or_else(|| cfg.sim_channel.clone())
                .unwrap_or_else(|| "similarity".into()),
            detector_channel: self
                .detector_channel
                .clone()
                .or_else(|| cfg.detector_channel.clone())
                .unwrap_or_else(|| "detector".into()),
            prototype_dedup: Some(0.99),
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic exam corpus with planted ground truth.
    Synth {
        /// Synthesis spec JSON; omit for the built-in demo spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Seed override for the built-in spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect diverse keyframes for one exam.
    Detect {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        flags: DetectFlags,
        /// Similarity matrix cache (raw f64 + JSON sidecar); reused when
        /// the source channel hash matches, rebuilt otherwise.
        #[arg(long)]
        sim_cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predicted keyframes against ground truth.
    EvalDetect {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Similarity above which a ground-truth frame is excluded from
        /// the correct-time metric.
        #[arg(long)]
        sim_threshold: Option<f64>,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted captions with BLEU-1..4 and ROUGE-L.
    EvalCaptions {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure one biometry class from a mask.
    Measure {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        class: String,
        /// Millimetres per pixel, e.g. "0.2" or "0.2mm".
        #[arg(long, conflicts_with = "caliper")]
        scale: Option<String>,
        /// Caliper strip image to derive the scale from.
        #[arg(long, requires = "tick_mm")]
        caliper: Option<PathBuf>,
        /// Physical tick spacing of the caliper strip.
        #[arg(long = "tick-mm")]
        tick_mm: Option<f64>,
        #[arg(long)]
        equations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the multimodal summary report.
    Summarize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        keyframes: PathBuf,
        /// Caption file for keyframes (JSON lines).
        #[arg(long, conflicts_with = "captioner")]
        captions: Option<PathBuf>,
        /// Caption provider: "lookup:<file.jsonl>" or "exec:<command>".
        #[arg(long)]
        captioner: Option<String>,
        #[arg(long)]
        equations: Option<PathBuf>,
        /// Output path; .json or .md picks the format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Frame-drop scan-time experiment over one or more exams.
    SimulateDrop {
        /// Manifest path; repeat for multiple exams.
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// Comma-separated drop fractions.
        #[arg(long, default_value = "0,0.5,0.75,0.9,0.95")]
        fractions: String,
        /// Similarity above which a non-keyframe counts as redundant.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        flags: DetectFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate detection reports; optional two-group Welch t-test.
    Aggregate {
        /// Detection report JSON; repeat for multiple reports.
        #[arg(long, required = true)]
        report: Vec<PathBuf>,
        /// First comparison group (report paths).
        #[arg(long = "group-a")]
        group_a: Vec<PathBuf>,
        /// Second comparison group (report paths).
        #[arg(long = "group-b")]
        group_b: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default exit code for usage errors is 2; keep usage
            // problems in the validation category instead
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_equation_table(flag: Option<&PathBuf>, cfg: &FileConfig) -> Result<EquationTable> {
    if let Some(path) = flag.or(cfg.equations.as_ref()) {
        return EquationTable::load(path);
    }
    if let Ok(env_path) = std::env::var("SCANSUM_EQUATIONS") {
        if !env_path.is_empty() {
            return EquationTable::load(Path::new(&env_path));
        }
    }
    Ok(EquationTable::default())
}

fn load_keyframe_set(path: &Path) -> Result<KeyframeSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidValue(format!("{}: {e}", path.display())))?;
    let set: KeyframeSet = serde_json::from_value(raw)
        .map_err(|e| Error::InvalidValue(format!("{}: {e}", path.display())))?;
    Ok(set)
}

fn parse_scale(text: &str) -> Result<f64> {
    let trimmed = text
        .trim()
        .trim_end_matches("mm/px")
        .trim_end_matches("mm")
        .trim();
    let value: f64 = trimmed
        .parse()
        .map_err(|_| Error::InvalidValue(format!("cannot parse scale '{text}'")))?;
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidValue(format!("scale must be positive, got {value}")));
    }
    Ok(value)
}

fn emit_result<T: serde::Serialize>(json: bool, value: &T, human: String) -> Result<()> {
    if json {
        print!("{}", to_canonical_json(value)?);
    } else {
        println!("{human}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_ref())?;
    match cli.cmd {
        Cmd::Synth { spec, seed, out } => {
            let spec = match spec {
                Some(path) => SynthSpec::load(&path)?,
                None => SynthSpec::demo(seed.or(cfg.seed).unwrap_or(0)),
            };
            let gt = synth::generate(&spec, &out)?;
            emit_result(
                cli.json,
                &gt,
                format!(
                    "generated exam '{}' with {} keyframes, {} masks -> {}",
                    gt.exam_id,
                    gt.keyframe_indices.len(),
                    gt.shapes.len(),
                    out.display()
                ),
            )
        }
        Cmd::Detect {
            manifest,
            flags,
            sim_cache,
            out,
        } => {
            let inputs = flags.to_inputs(&cfg)?;
            let selected = pipeline::detect_cached(&manifest, &inputs, sim_cache.as_deref())?;
            write_canonical_json_fixed6(&out, &selected)?;
            emit_result(
                cli.json,
                &selected,
                format!("selected {} keyframes -> {}", selected.len(), out.display()),
            )
        }
        Cmd::EvalDetect {
            pred,
            gt,
            manifest,
            sim_threshold,
            channel,
            out,
        } => {
            let m = corpus::load_manifest(&manifest)?;
            let channel = channel
                .or_else(|| cfg.sim_channel.clone())
                .unwrap_or_else(|| "similarity".into());
            let emb = corpus::load_embeddings(&m, &channel)?;
            let s = similarity::similarity_matrix(&emb)?;
            let pred_set = load_keyframe_set(&pred)?;
            let gt_set = load_keyframe_set(&gt)?;
            let threshold = sim_threshold
                .or(cfg.sim_threshold)
                .unwrap_or(DEFAULT_SIM_THRESHOLD);
            let report = evaluate_detection(&pred_set, &gt_set, &s, m.fps, threshold)?;
            if let Some(out) = &out {
                write_canonical_json_fixed6(out, &report)?;
            }
            emit_result(
                cli.json,
                &report,
                format!(
                    "cosine simi {:.2}%  abs time err {:.3}s  correct time err {:.3}s  num err {}",
                    report.cosine_simi_pct,
                    report.absolute_time_err_s,
                    report.correct_time_err_s,
                    report.keyframe_num_err
                ),
            )
        }
        Cmd::EvalCaptions { pred, gt, out } => {
            let pred_records = corpus::load_captions(&pred)?;
            let gt_records = corpus::load_captions(&gt)?;
            let scores = score_caption_records(&pred_records, &gt_records)?;
            if let Some(out) = &out {
                write_canonical_json_fixed6(out, &scores)?;
            }
            emit_result(
                cli.json,
                &scores,
                format!(
                    "{} captions  BLEU-1 {:.4}  BLEU-4 {:.4}  ROUGE-L {:.4}",
                    scores.count, scores.bleu_mean[0], scores.bleu_mean[3], scores.rouge_l_mean
                ),
            )
        }
        Cmd::Measure {
            mask,
            class,
            scale,
            caliper,
            tick_mm,
            equations,
            out,
        } => {
            let class: BiometryClass = class.parse()?;
            let mm_per_px = match (scale, caliper) {
                (Some(s), None) => parse_scale(&s)?,
                (None, Some(strip_path)) => {
                    let strip = corpus::load_gray(&strip_path)?;
                    biometry::caliper_scale(&strip, tick_mm.expect("clap requires tick-mm"))?
                }
                _ => {
                    return Err(Error::InvalidValue(
                        "exactly one of --scale or --caliper is required".into(),
                    ))
                }
            };
            let mask = corpus::load_mask(&mask, mm_per_px)?;
            let mut set = biometry::measure(&mask, class)?;
            let table = load_equation_table(equations.as_ref(), &cfg)?;
            if set.hc_mm.is_some() && table.ga.input == BiometryClass::HC {
                set.ga_weeks = biometry::gestational_age(&set, &table).ok();
            }
            if let Some(out) = &out {
                write_canonical_json_fixed6(out, &set)?;
            }
            let mut parts = vec![format!("scale {mm_per_px:.4} mm/px")];
            for (name, v) in [
                ("HC", set.hc_mm),
                ("AC", set.ac_mm),
                ("BPD", set.bpd_mm),
                ("Cereb", set.cereb_mm),
                ("FL", set.fl_mm),
                ("GA weeks", set.ga_weeks),
            ] {
                if let Some(v) = v {
                    parts.push(format!("{name} {v:.2}"));
                }
            }
            emit_result(cli.json, &set, parts.join("  "))
        }
        Cmd::Summarize {
            manifest,
            keyframes,
            captions,
            captioner,
            equations,
            out,
        } => {
            let m = corpus::load_manifest(&manifest)?;
            let selected = load_keyframe_set(&keyframes)?;
            let provider = match (&captions, &captioner) {
                (Some(path), None) => Some(CaptionProvider::from_cli_spec(&format!(
                    "lookup:{}",
                    path.display()
                ))?),
                (None, Some(spec)) => Some(CaptionProvider::from_cli_spec(spec)?),
                (None, None) => None,
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };

            // measure the masks attached to selected keyframes
            let mm_per_px = match m.mm_per_px {
                Some(s) => Some(s),
                None => match &m.caliper_strip {
                    Some(c) => {
                        let strip = corpus::load_gray(&m.resolve(&c.path))?;
                        Some(biometry::caliper_scale(&strip, c.tick_spacing_mm)?)
                    }
                    None => None,
                },
            };
            let mut measurements = BTreeMap::new();
            let mut mask_class_by_frame: BTreeMap<usize, BiometryClass> = BTreeMap::new();
            if let (Some(masks), Some(scale)) = (&m.masks, mm_per_px) {
                for mask_ref in masks {
                    if !selected.indices().contains(&mask_ref.frame_index) {
                        continue;
                    }
                    let mask = corpus::load_mask(&m.resolve(&mask_ref.path), scale)?;
                    let set = biometry::measure(&mask, mask_ref.class)?;
                    measurements
                        .entry(mask_ref.frame_index)
                        .or_insert_with(biometry::BiometrySet::default)
                        .merge(&set);
                    mask_class_by_frame.insert(mask_ref.frame_index, mask_ref.class);
                }
            }

            // captions: provider text, biometry flags derived from masks
            let mut caption_records: Vec<CaptionRecord> = Vec::new();
            if let Some(provider) = &provider {
                for &frame in selected.indices() {
                    let text = match provider.record(frame) {
                        Some(r) => Some(r.text.clone()),
                        None => provider.caption(frame, &manifest)?,
                    };
                    if let Some(text) = text {
                        let class = mask_class_by_frame.get(&frame).copied();
                        caption_records.push(CaptionRecord {
                            frame_index: frame,
                            text,
                            is_biometry: class.is_some(),
                            biometry_class: class,
                        });
                    }
                }
            }
            // measured keyframes must carry a biometry caption
            measurements.retain(|frame, _| {
                caption_records
                    .iter()
                    .any(|c| c.frame_index == *frame && c.is_biometry)
            });

            let table = load_equation_table(equations.as_ref(), &cfg)?;
            let report = summary::assemble(&m, &selected, &caption_records, &measurements, &table)?;
            let format = match out.extension().and_then(|e| e.to_str()) {
                Some("md") | Some("markdown") => ReportFormat::Markdown,
                _ => ReportFormat::Json,
            };
            let rendered = summary::emit(&report, format)?;
            std::fs::write(&out, &rendered).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            emit_result(
                cli.json,
                &report,
                format!(
                    "summary for '{}': {} keyframes -> {}",
                    report.exam_id,
                    report.aggregate.keyframe_count,
                    out.display()
                ),
            )
        }
        Cmd::SimulateDrop {
            manifest,
            fractions,
            threshold,
            seed,
            jobs,
            flags,
            out,
        } => {
            let fractions: Vec<f64> = fractions
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidValue(format!("bad fraction '{f}'")))
                })
                .collect::<Result<_>>()?;
            let run_cfg = DropRunConfig {
                inputs: flags.to_inputs(&cfg)?,
                fractions,
                high_sim_threshold: threshold.or(cfg.high_sim_threshold).unwrap_or(0.97),
                sim_threshold: cfg.sim_threshold.unwrap_or(DEFAULT_SIM_THRESHOLD),
                seed: seed.or(cfg.seed).unwrap_or(0),
            };
            let (cells, rows) = pipeline::simulate_drop_table(&manifest, &run_cfg, jobs)?;
            let csv = drop_table_csv(&rows);
            std::fs::write(&out, &csv).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            #[derive(serde::Serialize)]
            struct DropOutput<'a> {
                rows: &'a [pipeline::DropTableRow],
                cells: &'a [pipeline::ExamDropResult],
            }
            emit_result(
                cli.json,
                &DropOutput {
                    rows: &rows,
                    cells: &cells,
                },
                format!(
                    "{} exams x {} fractions -> {}",
                    manifest.len(),
                    rows.len(),
                    out.display()
                ),
            )
        }
        Cmd::Aggregate {
            report,
            group_a,
            group_b,
            out,
        } => {
            let load_reports = |paths: &[PathBuf]| -> Result<Vec<scansum::DetectionReport>> {
                paths
                    .iter()
                    .map(|p| {
                        let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                            path: p.clone(),
                            source,
                        })?;
                        serde_json::from_str(&text)
                            .map_err(|e| Error::InvalidValue(format!("{}: {e}", p.display())))
                    })
                    .collect()
            };
            let reports = load_reports(&report)?;
            let metrics = stats::aggregate_reports(&reports)?;
            let t_test = if !group_a.is_empty() || !group_b.is_empty() {
                let a = load_reports(&group_a)?;
                let b = load_reports(&group_b)?;
                Some(stats::compare_groups(&a, &b)?)
            } else {
                None
            };
            #[derive(serde::Serialize)]
            struct AggregateOutput {
                metrics: BTreeMap<String, stats::MetricAggregate>,
                #[serde(skip_serializing_if = "Option::is_none")]
                t_test: Option<BTreeMap<String, stats::WelchTest>>,
            }
            let output = AggregateOutput { metrics, t_test };
            if let Some(out) = &out {
                write_canonical_json_fixed6(out, &output)?;
            }
            let human = output
                .metrics
                .iter()
                .map(|(k, v)| format!("{k}: {:.4} ± {:.4} (n={})", v.mean, v.std, v.n))
                .collect::<Vec<_>>()
                .join("\n");
            emit_result(cli.json, &output, human)
        }
    }
}
