//! File-based pipeline stages and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attack::{read_event_log, run_attack_stream, write_event_log, AttackSink, AttackSummary, StreamInfo};
use crate::detect::{
    localize, merge_windows, read_windows_csv, slide, write_windows_csv, DetectionWindow, DetectorParams,
    ReferenceDb, Verdict,
};
use crate::error::{Error, Result};
use crate::extract::{estimate_enf_audio, estimate_enf_video, ExtractedEnf, ExtractionParams};
use crate::media::{
    into_blocks_iter, read_wav, render_audio, render_frames, validate_fseq, Frame, FseqHeader, FseqReader,
    FseqWriter, WavWriter, AUDIO_BLOCK,
};
use crate::signal::{synth_enf, EnfSeries};

use super::config::{ExperimentConfig, Seeds};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const LIVE_FSEQ: &str = "live.fseq";
pub const LIVE_WAV: &str = "live.wav";
pub const REFERENCE_CSV: &str = "reference_enf.csv";
pub const ATTACKED_FSEQ: &str = "attacked.fseq";
pub const ATTACKED_WAV: &str = "attacked.wav";
pub const EVENTS_CSV: &str = "events.csv";
pub const AUDIO_ENF_CSV: &str = "enf_audio.csv";
pub const VIDEO_ENF_CSV: &str = "enf_video.csv";
pub const DETECTION_CSV: &str = "detection.csv";
pub const REPORT_JSON: &str = "report.json";
pub const MANIFEST_JSON: &str = "manifest.json";

/// The grid recording used as detection reference: the synthesized series,
/// plus seeded measurement noise when configured.
pub fn reference_series(cfg: &ExperimentConfig, enf: &EnfSeries, seed: u64) -> Result<EnfSeries> {
    if cfg.reference_noise_hz == 0.0 {
        return Ok(enf.clone());
    }
    let noise = Normal::new(0.0, cfg.reference_noise_hz)
        .map_err(|e| Error::invalid(format!("reference noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EF0_0000_0000_0003);
    let values = enf.values.iter().map(|v| v + noise.sample(&mut rng)).collect();
    EnfSeries::new(enf.start_time, enf.rate, values)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { reason, .. } => Error::format(path, reason),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutputs {
    pub fseq: PathBuf,
    pub wav: PathBuf,
    pub reference: PathBuf,
    pub frames: u64,
    pub samples: u64,
}

/// Renders the configured scene to `live.fseq`, `live.wav` and the reference
/// ENF CSV. Identical configs give byte-identical files.
pub fn run_synth(cfg: &ExperimentConfig) -> Result<SynthOutputs> {
    cfg.validate()?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    let script = cfg.scene_script()?;
    // One extra second keeps the last frame's rows inside the series.
    let enf = synth_enf(&cfg.grid, script.duration + 1.0, cfg.seeds.enf)?;

    let reference = out.join(REFERENCE_CSV);
    let series = reference_series(cfg, &enf, cfg.seeds.enf)?;
    series
        .write_csv(create_file(&reference)?)
        .map_err(|e| with_path(e, &reference))?;

    let fseq = out.join(LIVE_FSEQ);
    let mut writer = FseqWriter::create(&fseq, FseqHeader::for_camera(&cfg.camera))?;
    for frame in render_frames(&script, &enf, &cfg.camera, cfg.seeds.noise)? {
        writer.write_frame(&frame)?;
    }
    let frames = writer.finish()?.frame_count;

    let wav = out.join(LIVE_WAV);
    let mut w = WavWriter::create(&wav, cfg.camera.audio_sample_rate)?;
    for block in render_audio(&script, &enf, &cfg.camera, cfg.seeds.noise)? {
        w.write_samples(&block.samples)?;
    }
    let samples = w.finish()?;
    Ok(SynthOutputs {
        fseq,
        wav,
        reference,
        frames,
        samples,
    })
}

struct FileSink {
    fseq: FseqWriter,
    wav: WavWriter,
}

impl AttackSink for FileSink {
    fn frame(&mut self, frame: Frame, audio: &[f64], _replayed: bool) -> Result<()> {
        self.fseq.write_frame(&frame)?;
        self.wav.write_samples(audio)
    }

    fn audio_tail(&mut self, audio: &[f64]) -> Result<()> {
        self.wav.write_samples(audio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutputs {
    pub fseq: PathBuf,
    pub wav: PathBuf,
    pub events: PathBuf,
    pub summary: AttackSummary,
}

/// Streams live media through the attack into `attacked.*` and `events.csv`.
pub fn run_attack(cfg: &ExperimentConfig, live_fseq: &Path, live_wav: &Path) -> Result<AttackOutputs> {
    cfg.validate()?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    let reader = FseqReader::open(live_fseq)?;
    let header = *reader.header();
    let (sample_rate, samples) = read_wav(live_wav)?;
    let info = StreamInfo {
        width: header.width,
        height: header.height,
        fps_numerator: header.fps_numerator,
        fps_denominator: header.fps_denominator,
        sample_rate,
    };
    let manual = cfg.scene_script()?.manual_trigger_times();

    let fseq = out.join(ATTACKED_FSEQ);
    let wav = out.join(ATTACKED_WAV);
    let mut sink = FileSink {
        fseq: FseqWriter::create(&fseq, header)?,
        wav: WavWriter::create(&wav, sample_rate)?,
    };
    let blocks = into_blocks_iter(sample_rate, &samples, AUDIO_BLOCK).map(Ok);
    let summary = run_attack_stream(&cfg.attack_params(), info, reader, blocks, &manual, &mut sink)?;
    sink.fseq.finish()?;
    sink.wav.finish()?;

    let events = out.join(EVENTS_CSV);
    write_event_log(create_file(&events)?, &summary.events).map_err(|e| with_path(e, &events))?;
    Ok(AttackOutputs {
        fseq,
        wav,
        events,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOutputs {
    pub audio_csv: PathBuf,
    pub video_csv: Option<PathBuf>,
    pub audio: ExtractedEnf,
    pub video: Option<ExtractedEnf>,
}

/// Writes `enf_audio.csv` and, when video is given, `enf_video.csv`.
pub fn run_extract(cfg: &ExperimentConfig, fseq: Option<&Path>, wav: &Path) -> Result<ExtractOutputs> {
    let out = cfg.output_dir();
    create_dir(&out)?;
    let (sample_rate, samples) = read_wav(wav)?;
    let audio = estimate_enf_audio(
        into_blocks_iter(sample_rate, &samples, AUDIO_BLOCK).map(Ok),
        &cfg.audio_params(),
    )?;
    let audio_csv = out.join(AUDIO_ENF_CSV);
    audio
        .write_csv(create_file(&audio_csv)?)
        .map_err(|e| with_path(e, &audio_csv))?;

    let (video, video_csv) = match fseq {
        Some(path) => {
            let reader = FseqReader::open(path)?;
            let h = *reader.header();
            let v = estimate_enf_video(reader, &cfg.video_params(), h.fps_numerator, h.fps_denominator)?;
            let p = out.join(VIDEO_ENF_CSV);
            v.write_csv(create_file(&p)?).map_err(|e| with_path(e, &p))?;
            (Some(v), Some(p))
        }
        None => (None, None),
    };
    Ok(ExtractOutputs {
        audio_csv,
        video_csv,
        audio,
        video,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub onset_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    /// `"present"` or `"absent"`.
    pub status: String,
    pub verdict: Option<Verdict>,
    pub intervals: Vec<Interval>,
    pub windows: BTreeMap<Verdict, usize>,
}

impl PathReport {
    fn absent() -> Self {
        Self {
            status: "absent".into(),
            verdict: None,
            intervals: Vec::new(),
            windows: BTreeMap::new(),
        }
    }

    fn from_windows(windows: &[DetectionWindow]) -> Self {
        let mut counts = BTreeMap::new();
        for w in windows {
            *counts.entry(w.verdict).or_insert(0) += 1;
        }
        Self {
            status: "present".into(),
            verdict: Some(overall_verdict(windows)),
            intervals: intervals(windows),
            windows: counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParameters {
    pub nominal_hz: f64,
    pub audio_extraction: ExtractionParams,
    pub video_extraction: ExtractionParams,
    pub detector: DetectorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    /// Tampered if either path flags a window.
    pub verdict: Verdict,
    pub intervals: Vec<Interval>,
    pub audio: PathReport,
    pub video: PathReport,
    pub parameters: ReportParameters,
    pub seeds: Seeds,
    pub warnings: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl Report {
    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_reader(open_file(path)?).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Tampered if any window is, else authentic if any window is, else
/// indeterminate.
pub fn overall_verdict(windows: &[DetectionWindow]) -> Verdict {
    if windows.iter().any(|w| w.verdict == Verdict::Tampered) {
        Verdict::Tampered
    } else if windows.iter().any(|w| w.verdict == Verdict::Authentic) {
        Verdict::Authentic
    } else {
        Verdict::Indeterminate
    }
}

fn intervals(windows: &[DetectionWindow]) -> Vec<Interval> {
    localize(windows)
        .into_iter()
        .map(|(onset_s, end_s)| Interval { onset_s, end_s })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutputs {
    pub extract: ExtractOutputs,
    pub detection_csv: PathBuf,
    pub report_path: PathBuf,
    pub report: Report,
    pub merged: Vec<DetectionWindow>,
}

/// Extracts both paths, correlates each against the reference and writes the
/// merged `detection.csv` and `report.json`.
pub fn run_detect(cfg: &ExperimentConfig, fseq: Option<&Path>, wav: &Path, reference_csv: &Path) -> Result<DetectOutputs> {
    cfg.validate()?;
    let t0 = Instant::now();
    let reference = EnfSeries::read_csv(open_file(reference_csv)?).map_err(|e| with_path(e, reference_csv))?;
    let extract = run_extract(cfg, fseq, wav)?;
    let t_extract = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut warnings = Vec::new();
    let s = &extract.audio.series;
    if !reference.covers(s.start_time, s.end_time()) {
        let msg = format!(
            "reference covers [{:.3}, {:.3}] s but media ENF spans [{:.3}, {:.3}] s; uncovered windows are indeterminate",
            reference.start_time,
            reference.end_time(),
            s.start_time,
            s.end_time()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let db = ReferenceDb::new(reference);
    let nominal = cfg.grid.f_nominal;
    let audio_windows = slide(&extract.audio, &db, &cfg.detector, nominal)?;
    let video_windows = match &extract.video {
        Some(v) => Some(slide(v, &db, &cfg.detector, nominal)?),
        None => None,
    };
    let merged = match &video_windows {
        Some(v) => merge_windows(&[&audio_windows, v]),
        None => audio_windows.clone(),
    };
    let out = cfg.output_dir();
    let detection_csv = out.join(DETECTION_CSV);
    write_windows_csv(create_file(&detection_csv)?, &merged).map_err(|e| with_path(e, &detection_csv))?;

    let mut timings_s = BTreeMap::new();
    timings_s.insert("extract".to_string(), t_extract);
    timings_s.insert("detect".to_string(), t1.elapsed().as_secs_f64());
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        verdict: overall_verdict(&merged),
        intervals: intervals(&merged),
        audio: PathReport::from_windows(&audio_windows),
        video: video_windows
            .as_deref()
            .map_or_else(PathReport::absent, PathReport::from_windows),
        parameters: ReportParameters {
            nominal_hz: nominal,
            audio_extraction: cfg.audio_params(),
            video_extraction: cfg.video_params(),
            detector: cfg.detector.clone(),
        },
        seeds: cfg.seeds,
        warnings,
        timings_s,
    };
    let report_path = out.join(REPORT_JSON);
    write_json(&report_path, &report)?;
    Ok(DetectOutputs {
        extract,
        detection_csv,
        report_path,
        report,
        merged,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Fseq,
    Wav,
    EnfCsv,
    EventLog,
    DetectionCsv,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: ArtifactKind,
    pub path: PathBuf,
}

impl Artifact {
    fn new(kind: ArtifactKind, path: &Path) -> Self {
        Self {
            kind,
            path: path.to_path_buf(),
        }
    }

    /// Checks the file exists and parses as its kind.
    pub fn validate(&self) -> Result<()> {
        let p = &self.path;
        if !p.is_file() {
            return Err(Error::format(p, "artifact missing"));
        }
        match self.kind {
            ArtifactKind::Fseq => validate_fseq(p).map(|_| ()),
            ArtifactKind::Wav => read_wav(p).map(|_| ()),
            ArtifactKind::EnfCsv => ExtractedEnf::read_csv(open_file(p)?)
                .map(|_| ())
                .map_err(|e| with_path(e, p)),
            ArtifactKind::EventLog => read_event_log(open_file(p)?)
                .map(|_| ())
                .map_err(|e| with_path(e, p)),
            ArtifactKind::DetectionCsv => read_windows_csv(open_file(p)?)
                .map(|_| ())
                .map_err(|e| with_path(e, p)),
            ArtifactKind::Report => Report::read(p).map(|_| ()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
    pub timings_s: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        self.artifacts.iter().try_for_each(Artifact::validate)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_reader(open_file(path)?).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// The config with its paths resolved, so the manifest reruns from anywhere.
fn snapshot(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.scene = cfg.scene.as_deref().map(|p| absolute(&cfg.resolve(p)));
    c.output_dir = absolute(&cfg.output_dir());
    c
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Synthesis, attack (unless skipped) and detection, with the manifest
/// written to `manifest.json` and validated. Errors name the failed stage.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let mut timings_s = BTreeMap::new();
    let mut artifacts = Vec::new();
    use ArtifactKind::*;

    let t = Instant::now();
    let synth = run_synth(cfg).map_err(|e| e.in_stage("synth"))?;
    timings_s.insert("synth".to_string(), t.elapsed().as_secs_f64());
    log::info!("synth finished in {:.1} s", t.elapsed().as_secs_f64());
    artifacts.push(Artifact::new(Fseq, &synth.fseq));
    artifacts.push(Artifact::new(Wav, &synth.wav));
    artifacts.push(Artifact::new(EnfCsv, &synth.reference));

    let (fseq, wav) = if cfg.skip_attack {
        (synth.fseq.clone(), synth.wav.clone())
    } else {
        let t = Instant::now();
        let a = run_attack(cfg, &synth.fseq, &synth.wav).map_err(|e| e.in_stage("attack"))?;
        timings_s.insert("attack".to_string(), t.elapsed().as_secs_f64());
        log::info!("attack finished in {:.1} s", t.elapsed().as_secs_f64());
        artifacts.push(Artifact::new(Fseq, &a.fseq));
        artifacts.push(Artifact::new(Wav, &a.wav));
        artifacts.push(Artifact::new(EventLog, &a.events));
        (a.fseq, a.wav)
    };

    let t = Instant::now();
    let d = run_detect(cfg, Some(&fseq), &wav, &synth.reference).map_err(|e| e.in_stage("detect"))?;
    timings_s.insert("detect".to_string(), t.elapsed().as_secs_f64());
    log::info!("detect finished in {:.1} s", t.elapsed().as_secs_f64());
    artifacts.push(Artifact::new(EnfCsv, &d.extract.audio_csv));
    if let Some(v) = &d.extract.video_csv {
        artifacts.push(Artifact::new(EnfCsv, v));
    }
    artifacts.push(Artifact::new(DetectionCsv, &d.detection_csv));
    artifacts.push(Artifact::new(Report, &d.report_path));

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: snapshot(cfg),
        artifacts,
        timings_s,
        verdict: d.report.verdict,
    };
    manifest.validate().map_err(|e| e.in_stage("manifest"))?;
    write_json(&cfg.output_dir().join(MANIFEST_JSON), &manifest).map_err(|e| e.in_stage("manifest"))?;
    Ok(manifest)
}
