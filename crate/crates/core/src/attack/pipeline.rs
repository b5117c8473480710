//! Two gating threads feeding the single-writer state machine.

use std::collections::VecDeque;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;

use super::blur::GaussianBlur;
use super::events::{AttackEvent, EventKind};
use super::fsm::{AttackState, Mode, StepInput};
use super::motion::detect_motion;
use super::noise::{NoiseGate, MIN_GATE_BLOCK};
use super::trigger::TemplateMatcher;
use super::AttackParams;
use crate::error::{Error, Result};
use crate::media::{audio_sample_of_frame, AttackTimeline, AudioBlock, Frame, ReplaySpan};

const QUEUE_DEPTH: usize = 16;

/// Stream geometry the splicer needs up front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamInfo {
    pub width: u32,
    pub height: u32,
    pub fps_numerator: u32,
    pub fps_denominator: u32,
    pub sample_rate: u32,
}

impl StreamInfo {
    pub fn fps(&self) -> f64 {
        self.fps_numerator as f64 / self.fps_denominator as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackSummary {
    /// Every event including warnings, in stream order.
    pub events: Vec<AttackEvent>,
    pub timeline: AttackTimeline,
    pub frames: u64,
    pub audio_samples: u64,
}

/// Receives the spliced output in stream order.
pub trait AttackSink {
    fn frame(&mut self, frame: Frame, audio: &[f64], replayed: bool) -> Result<()>;
    /// Audio past the last frame; always live.
    fn audio_tail(&mut self, audio: &[f64]) -> Result<()>;
}

struct VideoMsg {
    frame: Frame,
    motion: bool,
    trigger: bool,
}

struct GateBlock {
    start: u64,
    samples: Vec<f64>,
    noisy: bool,
}

/// Runs the attack over a live frame stream and its audio, handing each
/// output frame and its audio chunk to `sink` in order.
///
/// Frame `k` owns audio samples `[s_k, s_{k+1})` with
/// `s_k = floor(k * rate / fps)`; audio past the last frame passes through.
pub fn run_attack_stream<V, A, S>(
    params: &AttackParams,
    info: StreamInfo,
    frames: V,
    audio: A,
    manual_times: &[f64],
    sink: &mut S,
) -> Result<AttackSummary>
where
    V: Iterator<Item = Result<Frame>> + Send,
    A: Iterator<Item = Result<AudioBlock>> + Send,
    S: AttackSink + ?Sized,
{
    params.validate()?;
    let policy = params.policy(info.fps());
    let mut blur = GaussianBlur::new(&params.blur)?;
    let mut matcher = TemplateMatcher::new(&params.template()?, info.width, info.height)?;
    let mut gate = NoiseGate::new(params.noise.clone())?;
    let ncc_threshold = params.ncc_threshold;
    let motion_params = params.motion.clone();
    let block_len = params.noise.block;
    let sr = info.sample_rate;

    thread::scope(|scope| {
        let (vtx, vrx) = sync_channel::<Result<VideoMsg>>(QUEUE_DEPTH);
        let (atx, arx) = sync_channel::<Result<GateBlock>>(QUEUE_DEPTH);

        scope.spawn(move || {
            let mut prev: Option<Frame> = None;
            for item in frames {
                let msg = item.and_then(|frame| {
                    let blurred = blur.blur(&frame)?;
                    let motion = match &prev {
                        Some(p) => detect_motion(p, &blurred, &motion_params)?.motion,
                        None => false,
                    };
                    prev = Some(blurred);
                    let trigger = matcher.find(&frame, ncc_threshold)?.is_some();
                    Ok(VideoMsg {
                        frame,
                        motion,
                        trigger,
                    })
                });
                let failed = msg.is_err();
                if vtx.send(msg).is_err() || failed {
                    return;
                }
            }
        });

        scope.spawn(move || {
            let mut pending: Vec<f64> = Vec::with_capacity(block_len);
            let mut start = 0u64;
            let mut flush = |samples: Vec<f64>, start: u64| -> Result<GateBlock> {
                if !samples.is_empty() && samples.len() < MIN_GATE_BLOCK {
                    // Too short to gate reliably; treated as quiet.
                    return Ok(GateBlock {
                        start,
                        samples,
                        noisy: false,
                    });
                }
                let noisy = gate.is_noisy(&samples, sr)?;
                Ok(GateBlock {
                    start,
                    samples,
                    noisy,
                })
            };
            for item in audio {
                let block = match item {
                    Ok(b) if b.sample_rate != sr => Err(Error::invalid(format!(
                        "audio block at {} Hz in a {sr} Hz stream",
                        b.sample_rate
                    ))),
                    other => other,
                };
                let block = match block {
                    Ok(b) => b,
                    Err(e) => {
                        let _ = atx.send(Err(e));
                        return;
                    }
                };
                let mut rest = &block.samples[..];
                while !rest.is_empty() {
                    let take = (block_len - pending.len()).min(rest.len());
                    pending.extend_from_slice(&rest[..take]);
                    rest = &rest[take..];
                    if pending.len() == block_len {
                        let samples = std::mem::replace(&mut pending, Vec::with_capacity(block_len));
                        let msg = flush(samples, start);
                        start += block_len as u64;
                        let failed = msg.is_err();
                        if atx.send(msg).is_err() || failed {
                            return;
                        }
                    }
                }
            }
            if !pending.is_empty() {
                let _ = atx.send(flush(pending, start));
            }
        });

        splice(info, &policy, vrx, arx, manual_times, sink)
    })
}

fn splice<S>(
    info: StreamInfo,
    policy: &super::fsm::ClipPolicy,
    video: Receiver<Result<VideoMsg>>,
    audio: Receiver<Result<GateBlock>>,
    manual_times: &[f64],
    sink: &mut S,
) -> Result<AttackSummary>
where
    S: AttackSink + ?Sized,
{
    let (num, den, sr) = (info.fps_numerator, info.fps_denominator, info.sample_rate);
    let mut audio = AudioCursor {
        rx: audio,
        blocks: VecDeque::new(),
        closed: false,
    };
    let mut state = AttackState::new();
    let mut summary = AttackSummary {
        timeline: AttackTimeline {
            fps_numerator: num,
            fps_denominator: den,
            replays: Vec::new(),
        },
        ..Default::default()
    };
    let mut open_span: Option<ReplaySpan> = None;
    let mut k = 0u64;
    for msg in video.iter() {
        let VideoMsg {
            frame,
            motion,
            trigger,
        } = msg?;
        if frame.index != k {
            return Err(Error::invalid(format!(
                "frame index {} out of sequence (expected {k})",
                frame.index
            )));
        }
        let (s0, s1) = (
            audio_sample_of_frame(k, sr, num, den),
            audio_sample_of_frame(k + 1, sr, num, den),
        );
        let (chunk, noise) = audio.take(s0, s1)?;
        let time = frame.timestamp();
        let next = crate::media::frame_timestamp_ns(k + 1, num, den) as f64 * 1e-9;
        let manual = manual_times.iter().any(|&m| m >= time && m < next);
        let out = state.step(
            StepInput {
                time,
                frame,
                audio: chunk,
                motion,
                noise,
                trigger,
                manual,
            },
            policy,
        );
        for e in &out.events {
            if e.kind == EventKind::Warning {
                log::warn!("t={:.3}s: {}", e.time, e.detail);
            }
        }
        if out.replayed {
            let span = open_span.get_or_insert_with(|| ReplaySpan {
                start_frame: k,
                end_frame: k,
                clip_recorded_at: state.clip().map_or(time, |c| c.oldest_time()),
            });
            span.end_frame = k + 1;
        } else if let Some(span) = open_span.take() {
            summary.timeline.replays.push(span);
        }
        summary.audio_samples += out.audio.len() as u64;
        summary.events.extend(out.events);
        sink.frame(out.frame, &out.audio, out.replayed)?;
        k += 1;
    }
    if let Some(span) = open_span.take() {
        summary.timeline.replays.push(span);
    }
    if state.mode == Mode::Replaying {
        let t = crate::media::frame_timestamp_ns(k, num, den) as f64 * 1e-9;
        summary.events.push(AttackEvent {
            time: t,
            frame: k,
            kind: EventKind::ReplayEnd,
            detail: "end of stream".to_string(),
        });
    }
    // Trailing audio beyond the last frame is live.
    let tail_start = audio_sample_of_frame(k, sr, num, den);
    let (tail, _) = audio.take(tail_start, u64::MAX)?;
    if !tail.is_empty() {
        summary.audio_samples += tail.len() as u64;
        sink.audio_tail(&tail)?;
    }
    summary.frames = k;
    Ok(summary)
}

struct AudioCursor {
    rx: Receiver<Result<GateBlock>>,
    blocks: VecDeque<GateBlock>,
    closed: bool,
}

impl AudioCursor {
    fn buffered_end(&self) -> u64 {
        self.blocks
            .back()
            .map_or(0, |b| b.start + b.samples.len() as u64)
    }

    /// Samples in `[s0, s1)` that exist, plus whether any overlapping gate
    /// block was noisy. Blocks ending at or before `s0` are dropped.
    fn take(&mut self, s0: u64, s1: u64) -> Result<(Vec<f64>, bool)> {
        while !self.closed && self.buffered_end() < s1 {
            match self.rx.recv() {
                Ok(b) => self.blocks.push_back(b?),
                Err(_) => self.closed = true,
            }
        }
        while self
            .blocks
            .front()
            .is_some_and(|b| b.start + b.samples.len() as u64 <= s0)
        {
            self.blocks.pop_front();
        }
        let mut out = Vec::new();
        let mut noisy = false;
        for b in &self.blocks {
            let (bs, be) = (b.start, b.start + b.samples.len() as u64);
            if bs >= s1 {
                break;
            }
            let lo = s0.max(bs);
            let hi = s1.min(be);
            if lo < hi {
                noisy |= b.noisy;
                out.extend_from_slice(&b.samples[(lo - bs) as usize..(hi - bs) as usize]);
            }
        }
        Ok((out, noisy))
    }
}
