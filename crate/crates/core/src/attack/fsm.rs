//! Replay state machine.
//!
//! ```text
//!  Monitoring --static--> RecordingStatic --motion/noise--> Monitoring
//!       |                      |  (clip complete after min_clip_len,
//!       |                      |   restarted every refresh_interval)
//!       +------trigger---------+----> Armed --static & clip--> Replaying
//!                                                                  |
//!  Monitoring <------- trigger absent for the cool-down -----------+
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::events::{AttackEvent, EventKind};
use crate::media::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Monitoring,
    RecordingStatic,
    Armed,
    Replaying,
}

/// Clip and replay timing, in frames and seconds of stream time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipPolicy {
    pub min_frames: usize,
    pub max_frames: usize,
    pub refresh_interval: f64,
    pub cooldown: f64,
}

/// Motion- and noise-free recording with the audio captured alongside each
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticClip {
    pub frames: VecDeque<Frame>,
    pub audio: VecDeque<Vec<f64>>,
    pub recorded_at: f64,
    pub complete: bool,
}

impl StaticClip {
    fn start(time: f64, frame: Frame, audio: Vec<f64>) -> Self {
        Self {
            frames: VecDeque::from([frame]),
            audio: VecDeque::from([audio]),
            recorded_at: time,
            complete: false,
        }
    }

    fn push(&mut self, frame: Frame, audio: Vec<f64>, cap: usize) {
        self.frames.push_back(frame);
        self.audio.push_back(audio);
        while self.frames.len() > cap.max(1) {
            self.frames.pop_front();
            self.audio.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Exposure time of the oldest retained frame.
    pub fn oldest_time(&self) -> f64 {
        self.frames.front().map_or(self.recorded_at, |f| f.timestamp())
    }
}

/// One frame period of time-aligned observations.
#[derive(Debug, Clone)]
pub struct StepInput {
    pub time: f64,
    pub frame: Frame,
    pub audio: Vec<f64>,
    pub motion: bool,
    pub noise: bool,
    pub trigger: bool,
    pub manual: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub frame: Frame,
    pub audio: Vec<f64>,
    pub events: Vec<AttackEvent>,
    /// True when the output came from the replay clip.
    pub replayed: bool,
}

#[derive(Debug, Clone)]
pub struct AttackState {
    pub mode: Mode,
    pub trigger_time: Option<f64>,
    pub replay_cursor: usize,
    recording: Option<StaticClip>,
    clip: Option<StaticClip>,
    /// Static frames keep extending the retained clip.
    growing: bool,
    last_trigger: Option<f64>,
    in_motion: bool,
    in_noise: bool,
    warned: bool,
}

impl Default for AttackState {
    fn default() -> Self {
        Self::new()
    }
}

impl AttackState {
    pub fn new() -> Self {
        Self {
            mode: Mode::Monitoring,
            trigger_time: None,
            replay_cursor: 0,
            recording: None,
            clip: None,
            growing: false,
            last_trigger: None,
            in_motion: false,
            in_noise: false,
            warned: false,
        }
    }

    /// The retained complete clip, if any.
    pub fn clip(&self) -> Option<&StaticClip> {
        self.clip.as_ref()
    }

    /// The in-progress recording, if any.
    pub fn recording(&self) -> Option<&StaticClip> {
        self.recording.as_ref()
    }

    /// Transition-relevant state with times taken relative to `now`, so
    /// equivalent states reached at different times compare equal. Used to
    /// deduplicate states when enumerating input sequences.
    pub fn state_key(&self, now: f64, policy: &ClipPolicy) -> impl std::hash::Hash + Eq {
        let rel = |t: f64| ((now - t).min(policy.refresh_interval.max(policy.cooldown) + 1.0) * 1e3) as i64;
        (
            self.mode,
            self.trigger_time.is_some(),
            self.replay_cursor,
            self.recording.as_ref().map(|c| (c.len(), rel(c.recorded_at))),
            self.clip.as_ref().map(|c| (c.len(), rel(c.recorded_at), c.complete)),
            self.growing,
            self.last_trigger.map(rel),
            self.in_motion,
            self.in_noise,
            self.warned,
        )
    }

    /// Whether static recording should restart to pick up drift in the scene.
    pub fn refresh_policy(&self, now: f64, policy: &ClipPolicy) -> bool {
        refresh_due(self.clip.as_ref().map(|c| c.recorded_at), self.recording.is_some(), now, policy.refresh_interval)
    }

    /// Advances the machine by one frame period. This is the only mutator.
    pub fn step(&mut self, input: StepInput, policy: &ClipPolicy) -> StepOutput {
        let StepInput {
            time,
            frame,
            audio,
            motion,
            noise,
            trigger,
            manual,
        } = input;
        let index = frame.index;
        let mut events = Vec::new();
        let mut emit = |kind, detail: String| {
            events.push(AttackEvent {
                time,
                frame: index,
                kind,
                detail,
            })
        };

        if motion != self.in_motion {
            emit(
                if motion { EventKind::MotionStart } else { EventKind::MotionEnd },
                String::new(),
            );
            self.in_motion = motion;
        }
        if noise != self.in_noise {
            emit(
                if noise { EventKind::NoiseStart } else { EventKind::NoiseEnd },
                String::new(),
            );
            self.in_noise = noise;
        }
        let quiet = !motion && !noise;
        let triggered = trigger || manual;
        if triggered {
            self.last_trigger = Some(time);
        }

        let live = |frame: Frame, audio: Vec<f64>, events| StepOutput {
            frame,
            audio,
            events,
            replayed: false,
        };

        match self.mode {
            Mode::Monitoring | Mode::RecordingStatic if triggered => {
                self.mode = Mode::Armed;
                self.trigger_time = Some(time);
                self.growing = false;
                emit(
                    EventKind::Trigger,
                    if manual { "manual" } else { "visual" }.to_string(),
                );
                live(frame, audio, events)
            }
            Mode::Monitoring => {
                if quiet {
                    self.recording = Some(StaticClip::start(time, frame.clone(), audio.clone()));
                    self.mode = Mode::RecordingStatic;
                    self.promote_if_ready(policy, &mut emit);
                }
                live(frame, audio, events)
            }
            Mode::RecordingStatic => {
                if !quiet {
                    self.recording = None;
                    self.growing = false;
                    self.mode = Mode::Monitoring;
                } else if self.refresh_policy(time, policy) {
                    self.growing = false;
                    self.recording = Some(StaticClip::start(time, frame.clone(), audio.clone()));
                    self.promote_if_ready(policy, &mut emit);
                } else {
                    self.record(frame.clone(), audio.clone(), policy, &mut emit);
                }
                live(frame, audio, events)
            }
            Mode::Armed => {
                if !quiet {
                    self.recording = None;
                    return live(frame, audio, events);
                }
                if self.clip.is_some() {
                    self.mode = Mode::Replaying;
                    self.replay_cursor = 0;
                    let clip = self.clip.as_ref().expect("checked");
                    emit(
                        EventKind::ReplayStart,
                        format!(
                            "clip_frames={} clip_start={:.6}",
                            clip.len(),
                            clip.oldest_time()
                        ),
                    );
                    return self.replay(frame, audio, events);
                }
                if !self.warned {
                    self.warned = true;
                    emit(
                        EventKind::Warning,
                        "armed without a complete static clip; waiting".to_string(),
                    );
                }
                match self.recording.as_mut() {
                    Some(_) => self.record(frame.clone(), audio.clone(), policy, &mut emit),
                    None => {
                        self.recording =
                            Some(StaticClip::start(time, frame.clone(), audio.clone()));
                        self.promote_if_ready(policy, &mut emit);
                    }
                }
                self.growing = false;
                live(frame, audio, events)
            }
            Mode::Replaying => {
                let expired = self
                    .last_trigger
                    .is_none_or(|t| time - t >= policy.cooldown - 1e-9);
                if expired {
                    self.mode = Mode::Monitoring;
                    self.trigger_time = None;
                    self.replay_cursor = 0;
                    self.warned = false;
                    emit(EventKind::ReplayEnd, String::new());
                    return live(frame, audio, events);
                }
                self.replay(frame, audio, events)
            }
        }
    }

    fn replay(&mut self, live: Frame, live_audio: Vec<f64>, events: Vec<AttackEvent>) -> StepOutput {
        let clip = self.clip.as_ref().expect("replay requires a clip");
        let i = self.replay_cursor % clip.len();
        self.replay_cursor = (i + 1) % clip.len();
        let src = &clip.frames[i];
        let frame = Frame {
            pixels: src.pixels.clone(),
            ..live.clone_header()
        };
        // Keep the live chunk length so audio and video stay locked.
        let mut audio = clip.audio[i].clone();
        let need = live_audio.len();
        if audio.len() >= need {
            audio.truncate(need);
        } else {
            let pad = audio.last().copied().unwrap_or(0.0);
            audio.resize(need, pad);
        }
        StepOutput {
            frame,
            audio,
            events,
            replayed: true,
        }
    }

    fn record(
        &mut self,
        frame: Frame,
        audio: Vec<f64>,
        policy: &ClipPolicy,
        emit: &mut impl FnMut(EventKind, String),
    ) {
        if let Some(rec) = self.recording.as_mut() {
            rec.push(frame, audio, policy.max_frames);
            self.promote_if_ready(policy, emit);
        } else if self.growing {
            if let Some(clip) = self.clip.as_mut() {
                clip.push(frame, audio, policy.max_frames);
            }
        }
    }

    fn promote_if_ready(&mut self, policy: &ClipPolicy, emit: &mut impl FnMut(EventKind, String)) {
        if self
            .recording
            .as_ref()
            .is_some_and(|r| r.len() >= policy.min_frames)
        {
            let mut clip = self.recording.take().expect("checked");
            clip.complete = true;
            emit(
                EventKind::ClipComplete,
                format!("frames={} recorded_at={:.6}", clip.len(), clip.recorded_at),
            );
            self.clip = Some(clip);
            self.growing = self.mode == Mode::RecordingStatic;
        }
    }
}

/// True when a retained clip started at `recorded_at` is at least
/// `interval` old and no newer recording is already under way.
pub fn refresh_due(recorded_at: Option<f64>, recording: bool, now: f64, interval: f64) -> bool {
    match recorded_at {
        Some(t) if !recording => now - t >= interval,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> ClipPolicy {
        ClipPolicy {
            min_frames: 3,
            max_frames: 5,
            refresh_interval: 5.0,
            cooldown: 2.0,
        }
    }

    fn input(i: u64, motion: bool, trigger: bool) -> StepInput {
        let mut frame = Frame::filled(2, 1, if motion { 200 } else { i as u8 });
        frame.index = i;
        frame.timestamp_ns = i * 1_000_000_000;
        StepInput {
            time: i as f64,
            frame,
            audio: vec![i as f64; 4],
            motion,
            noise: false,
            trigger,
            manual: false,
        }
    }

    #[test]
    fn refresh_policy_by_age() {
        assert!(refresh_due(Some(0.0), false, 6.0, 5.0));
        assert!(!refresh_due(Some(0.0), false, 2.0, 5.0));
        assert!(!refresh_due(Some(0.0), true, 6.0, 5.0));
        assert!(!refresh_due(None, false, 6.0, 5.0));
    }

    #[test]
    fn untriggered_run_is_passthrough() {
        let mut s = AttackState::new();
        for i in 0..20 {
            let inp = input(i, i % 7 == 3, false);
            let want = inp.frame.clone();
            let out = s.step(inp, &policy());
            assert_eq!(out.frame, want);
            assert!(!out.replayed);
        }
    }

    #[test]
    fn trigger_with_clip_replays_clip_start_next() {
        let mut s = AttackState::new();
        for i in 0..4 {
            s.step(input(i, false, false), &policy());
        }
        assert_eq!(s.mode, Mode::RecordingStatic);
        let first = s.clip().unwrap().frames[0].clone();
        let out = s.step(input(4, false, true), &policy());
        assert_eq!(s.mode, Mode::Armed);
        assert!(!out.replayed);
        let out = s.step(input(5, false, false), &policy());
        assert_eq!(s.mode, Mode::Replaying);
        assert_eq!(out.frame.pixels, first.pixels);
        assert_eq!(out.frame.index, 5);
        assert_eq!(out.audio, vec![0.0; 4]);
    }

    #[test]
    fn replay_waits_for_static_scene() {
        let mut s = AttackState::new();
        for i in 0..4 {
            s.step(input(i, false, false), &policy());
        }
        s.step(input(4, true, true), &policy());
        assert_eq!(s.mode, Mode::Armed);
        for i in 5..8 {
            let out = s.step(input(i, true, false), &policy());
            assert!(!out.replayed);
            assert_eq!(s.mode, Mode::Armed);
        }
        let out = s.step(input(8, false, false), &policy());
        assert!(out.replayed);
    }

    #[test]
    fn armed_without_clip_warns_and_waits() {
        let mut s = AttackState::new();
        s.step(input(0, true, true), &policy());
        let out = s.step(input(1, false, false), &policy());
        assert_eq!(s.mode, Mode::Armed);
        assert!(out.events.iter().any(|e| e.kind == EventKind::Warning));
        s.step(input(2, false, false), &policy());
        let out = s.step(input(3, false, false), &policy());
        assert!(out.events.iter().any(|e| e.kind == EventKind::ClipComplete));
        assert!(s.step(input(4, false, false), &policy()).replayed);
    }

    #[test]
    fn replay_ends_after_cooldown() {
        let mut s = AttackState::new();
        for i in 0..4 {
            s.step(input(i, false, false), &policy());
        }
        s.step(input(4, false, true), &policy());
        assert!(s.step(input(5, false, false), &policy()).replayed);
        let out = s.step(input(6, false, false), &policy());
        assert!(!out.replayed);
        assert_eq!(s.mode, Mode::Monitoring);
        assert!(out.events.iter().any(|e| e.kind == EventKind::ReplayEnd));
    }

    #[test]
    fn motion_discards_partial_recording() {
        let mut s = AttackState::new();
        s.step(input(0, false, false), &policy());
        s.step(input(1, false, false), &policy());
        assert_eq!(s.recording().unwrap().len(), 2);
        s.step(input(2, true, false), &policy());
        assert_eq!(s.mode, Mode::Monitoring);
        assert!(s.recording().is_none());
        assert!(s.clip().is_none());
    }

    /// Pixel 0 carries the step, pixel 1 the motion flag; audio carries noise.
    fn tagged(i: u64, motion: bool, noise: bool, trigger: bool, manual: bool) -> StepInput {
        let frame = Frame::new(i, 2, 1, i * 1_000_000_000, 1, vec![i as u8, motion as u8]).unwrap();
        StepInput {
            time: i as f64,
            frame,
            audio: vec![noise as u8 as f64; 3],
            motion,
            noise,
            trigger,
            manual,
        }
    }

    fn assert_pure(clip: &StaticClip) {
        for (f, a) in clip.frames.iter().zip(&clip.audio) {
            assert_eq!(f.pixels[1], 0, "clip holds a frame captured during motion");
            assert!(a.iter().all(|&x| x == 0.0), "clip holds noisy audio");
        }
    }

    #[test]
    fn exhaustive_safety_check() {
        use std::collections::HashSet;
        let policy = ClipPolicy {
            min_frames: 2,
            max_frames: 3,
            refresh_interval: 3.0,
            cooldown: 2.0,
        };
        // (motion, noise, trigger, manual)
        let alphabet = [
            (false, false, false, false),
            (true, false, false, false),
            (false, true, false, false),
            (false, false, true, false),
            (true, false, true, false),
            (false, false, false, true),
        ];
        let mut seen = HashSet::new();
        // (state, step, trigger seen since last idle mode)
        let mut stack = vec![(AttackState::new(), 0u64, false)];
        let mut replay_entries = 0usize;
        let mut visited = 0usize;
        while let Some((state, i, armed_by)) = stack.pop() {
            if i == 12 {
                continue;
            }
            for &(motion, noise, trigger, manual) in &alphabet {
                let mut next = state.clone();
                let out = next.step(tagged(i, motion, noise, trigger, manual), &policy);
                visited += 1;
                let fired = armed_by || trigger || manual;
                if next.mode == Mode::Armed {
                    assert!(fired, "armed without a trigger");
                }
                if next.mode == Mode::Replaying && state.mode != Mode::Replaying {
                    replay_entries += 1;
                    assert!(fired, "replay without a trigger");
                    assert!(!motion && !noise, "replay entered during motion or noise");
                    assert!(next.clip().is_some_and(|c| c.complete && c.len() >= 2));
                }
                if out.replayed {
                    assert_eq!(out.frame.pixels[1], 0);
                    assert_eq!(out.frame.index, i);
                } else {
                    assert_eq!(out.frame.pixels, vec![i as u8, motion as u8]);
                }
                for c in next.clip().into_iter().chain(next.recording()) {
                    assert_pure(c);
                }
                let idle = matches!(next.mode, Mode::Monitoring | Mode::RecordingStatic);
                let flag = fired && !idle;
                if seen.insert((next.state_key(i as f64, &policy), flag)) {
                    stack.push((next, i + 1, flag));
                }
            }
        }
        assert!(replay_entries > 0 && visited > 1000, "{replay_entries} {visited}");
    }

    #[test]
    fn static_run_keeps_clip_fresh() {
        let p = ClipPolicy {
            min_frames: 60,
            max_frames: 300,
            refresh_interval: 5.0,
            cooldown: 3.0,
        };
        let mut s = AttackState::new();
        for i in 0..1800u64 {
            let t = i as f64 / 30.0;
            let mut inp = input(i, false, false);
            inp.time = t;
            s.step(inp, &p);
            if let Some(c) = s.clip() {
                assert!(t - c.recorded_at <= 10.0, "clip age {} at {t}", t - c.recorded_at);
            }
        }
        assert!(s.clip().is_some());
    }

    #[test]
    fn clip_is_bounded_and_refreshed() {
        let mut s = AttackState::new();
        for i in 0..30 {
            s.step(input(i, false, false), &policy());
            if let Some(c) = s.clip() {
                assert!(c.len() <= 5);
                assert!(i as f64 - c.recorded_at <= 10.0);
            }
        }
    }
}
