//! Scripted scenarios and in-memory end-to-end evaluation.

use std::time::Instant;

use serde::Serialize;

use crate::attack::{run_attack_stream, AttackEvent, AttackSink, StreamInfo};
use crate::detect::{label_windows, merge_windows, roc_sweep, slide, DetectionWindow, ReferenceDb, RocPoint, ScoredWindows, WindowLabel};
use crate::error::Result;
use crate::extract::{AudioEnfEstimator, ExtractedEnf, VideoEnfEstimator};
use crate::media::{render_audio, render_frames, AttackTimeline, AudioBlock, Event, Frame, SceneScript};
use crate::signal::EnfSeries;

use super::config::{ExperimentConfig, Seeds};
use super::runner::reference_series;

pub const SCENE_DURATION: f64 = 190.0;
const MARKER_POSITION: [u32; 2] = [200, 20];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub script: SceneScript,
    pub seeds: Seeds,
    pub attacked: bool,
}

/// Static opening, two objects crossing the view, a marker shown near the
/// end of the motion and kept up afterwards. Replay starts when the motion
/// ends, with a clip last refreshed before the motion began.
pub fn attacked_scene(i: u32) -> SceneScript {
    let motion_end = 90.0 + 2.0 * i as f64;
    let marker_end = motion_end + 50.0 + 2.0 * i as f64;
    SceneScript::new(SCENE_DURATION)
        .with_event(Event::Motion {
            start: 30.0,
            end: motion_end,
            object_size_px: 48,
            velocity_px_per_s: 120.0,
        })
        .with_event(Event::Motion {
            start: 34.0,
            end: motion_end,
            object_size_px: 40,
            velocity_px_per_s: 97.0,
        })
        .with_event(Event::NoiseBurst {
            start: 12.0,
            end: 13.5,
            amplitude: 0.5,
        })
        .with_event(Event::TriggerAppearance {
            start: motion_end - 15.0,
            end: marker_end,
            position_px: MARKER_POSITION,
        })
}

/// Everyday activity without any marker: passers-by, noise, light changes.
pub fn clean_scene(i: u32) -> SceneScript {
    let o = 3.0 * i as f64;
    SceneScript::new(SCENE_DURATION)
        .with_event(Event::Motion {
            start: 20.0 + o,
            end: 45.0 + o,
            object_size_px: 48,
            velocity_px_per_s: 120.0,
        })
        .with_event(Event::NoiseBurst {
            start: 60.0 + o,
            end: 62.0 + o,
            amplitude: 0.5,
        })
        .with_event(Event::LightToggle {
            time: 80.0 + o,
            new_level: 170.0,
        })
        .with_event(Event::Motion {
            start: 100.0 + o,
            end: 130.0 + o,
            object_size_px: 40,
            velocity_px_per_s: 97.0,
        })
        .with_event(Event::LightToggle {
            time: 140.0 + o,
            new_level: 128.0,
        })
}

/// The built-in scene used when a config names none.
pub fn default_scene() -> SceneScript {
    attacked_scene(0)
}

/// `clean` unattacked and `attacked` attacked scenarios with distinct seeds.
pub fn corpus(clean: u32, attacked: u32) -> Vec<Scenario> {
    let c = (0..clean).map(|i| Scenario {
        name: format!("clean-{i:02}"),
        script: clean_scene(i),
        seeds: Seeds {
            enf: 100 + i as u64,
            noise: 200 + i as u64,
        },
        attacked: false,
    });
    let a = (0..attacked).map(|i| Scenario {
        name: format!("attacked-{i:02}"),
        script: attacked_scene(i),
        seeds: Seeds {
            enf: 300 + i as u64,
            noise: 400 + i as u64,
        },
        attacked: true,
    });
    c.chain(a).collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalTimings {
    /// Rendering plus attack (or rendering alone on clean runs), seconds.
    pub media_s: f64,
    pub detect_s: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub name: String,
    pub attacked: bool,
    pub events: Vec<AttackEvent>,
    pub timeline: AttackTimeline,
    pub reference: EnfSeries,
    pub audio: ExtractedEnf,
    pub video: ExtractedEnf,
    pub audio_windows: Vec<DetectionWindow>,
    pub video_windows: Vec<DetectionWindow>,
    pub merged: Vec<DetectionWindow>,
    pub timings: EvalTimings,
}

impl Evaluation {
    pub fn replay_intervals(&self) -> Vec<(f64, f64)> {
        self.timeline.intervals()
    }

    /// Ground-truth class of each merged window.
    pub fn labels(&self, cfg: &ExperimentConfig) -> Vec<WindowLabel> {
        label_windows(
            &self.merged,
            &self.replay_intervals(),
            self.audio.series.rate,
            cfg.detector.window_len,
            cfg.audio_params().stft_frame / 2.0,
        )
    }
}

struct EstimatorSink {
    audio: AudioEnfEstimator,
    video: VideoEnfEstimator,
    sample_rate: u32,
    offset: u64,
}

impl EstimatorSink {
    fn push_audio(&mut self, samples: &[f64]) -> Result<()> {
        let block = AudioBlock {
            sample_rate: self.sample_rate,
            start_offset: self.offset,
            samples: samples.to_vec(),
        };
        self.offset += samples.len() as u64;
        self.audio.push(&block)?;
        Ok(())
    }
}

impl AttackSink for EstimatorSink {
    fn frame(&mut self, frame: Frame, audio: &[f64], _replayed: bool) -> Result<()> {
        self.video.push(&frame)?;
        self.push_audio(audio)
    }

    fn audio_tail(&mut self, audio: &[f64]) -> Result<()> {
        self.push_audio(audio)
    }
}

/// Renders, optionally attacks, extracts and detects one scenario without
/// touching the file system.
pub fn evaluate(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<Evaluation> {
    let cam = &cfg.camera;
    let script = &scenario.script;
    let enf = crate::signal::synth_enf(&cfg.grid, script.duration + 1.0, scenario.seeds.enf)?;
    let reference = reference_series(cfg, &enf, scenario.seeds.enf)?;
    let mut sink = EstimatorSink {
        audio: AudioEnfEstimator::new(&cfg.audio_params(), cam.audio_sample_rate)?,
        video: VideoEnfEstimator::new(&cfg.video_params(), cam.fps_numerator, cam.fps_denominator, cam.height)?,
        sample_rate: cam.audio_sample_rate,
        offset: 0,
    };
    let frames = render_frames(script, &enf, cam, scenario.seeds.noise)?;
    let audio = render_audio(script, &enf, cam, scenario.seeds.noise)?;

    let t0 = Instant::now();
    let (events, timeline) = if scenario.attacked {
        let info = StreamInfo {
            width: cam.width,
            height: cam.height,
            fps_numerator: cam.fps_numerator,
            fps_denominator: cam.fps_denominator,
            sample_rate: cam.audio_sample_rate,
        };
        let summary = run_attack_stream(
            &cfg.attack_params(),
            info,
            frames.map(Ok),
            audio.map(Ok),
            &script.manual_trigger_times(),
            &mut sink,
        )?;
        (summary.events, summary.timeline)
    } else {
        for f in frames {
            sink.video.push(&f)?;
        }
        for b in audio {
            sink.push_audio(&b.samples)?;
        }
        (
            Vec::new(),
            AttackTimeline {
                fps_numerator: cam.fps_numerator,
                fps_denominator: cam.fps_denominator,
                replays: Vec::new(),
            },
        )
    };
    let media_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let audio = sink.audio.finish()?;
    let video = sink.video.finish()?;
    let db = ReferenceDb::new(reference.clone());
    let nominal = cfg.grid.f_nominal;
    let audio_windows = slide(&audio, &db, &cfg.detector, nominal)?;
    let video_windows = slide(&video, &db, &cfg.detector, nominal)?;
    let merged = merge_windows(&[&audio_windows, &video_windows]);
    Ok(Evaluation {
        name: scenario.name.clone(),
        attacked: scenario.attacked,
        events,
        timeline,
        reference,
        audio,
        video,
        audio_windows,
        video_windows,
        merged,
        timings: EvalTimings {
            media_s,
            detect_s: t1.elapsed().as_secs_f64(),
        },
    })
}

/// Evaluates a corpus and sweeps the detector threshold over its merged
/// windows. Returns the curve and the labeled `(rho, label)` rows per
/// scenario.
pub fn sweep(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario],
    thresholds: &[f64],
) -> Result<(Vec<RocPoint>, Vec<ScoredWindows>)> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let e = evaluate(cfg, s)?;
        let labels = e.labels(cfg);
        rows.push(e.merged.iter().map(|w| w.rho).zip(labels).collect());
    }
    Ok((roc_sweep(&rows, thresholds)?, rows))
}

pub fn write_roc_csv<W: std::io::Write>(out: W, points: &[RocPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| crate::error::Error::format("<roc csv>", e.to_string());
    w.write_record(["threshold", "true_positive_rate", "false_positive_rate"])
        .map_err(err)?;
    for p in points {
        w.write_record([
            format!("{:.6}", p.threshold),
            format!("{:.6}", p.true_positive_rate),
            format!("{:.6}", p.false_positive_rate),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<roc csv>", e))?;
    Ok(())
}
