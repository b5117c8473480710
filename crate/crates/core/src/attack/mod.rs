//! Real-time frame-duplication attack: motion and noise gating, static clip
//! maintenance, visual triggering and synchronized audio-video replay.

mod blur;
mod events;
mod fsm;
mod motion;
mod noise;
mod pipeline;
mod trigger;

use serde::{Deserialize, Serialize};

pub use blur::{gaussian_blur, BlurParams, GaussianBlur};
pub use events::{read_event_log, write_event_log, AttackEvent, EventKind};
pub use fsm::{refresh_due, AttackState, ClipPolicy, Mode, StaticClip, StepInput, StepOutput};
pub use motion::{detect_motion, MotionParams, MotionResult};
pub use noise::{detect_audio_noise, NoiseGate, NoiseGateParams, MIN_GATE_BLOCK};
pub use pipeline::{run_attack_stream, AttackSink, AttackSummary, StreamInfo};
pub use trigger::{detect_trigger, Template, TemplateMatcher, TriggerHit, DEFAULT_NCC_THRESHOLD};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub blur: BlurParams,
    pub motion: MotionParams,
    pub noise: NoiseGateParams,
    pub ncc_threshold: f64,
    /// Seconds of static footage before a clip is usable.
    pub min_clip_len: f64,
    /// Longest clip retained, seconds.
    pub max_clip_len: f64,
    /// Static recording restarts once the retained clip is this old, seconds.
    pub refresh_interval: f64,
    /// Replay ends once the trigger has been absent this long, seconds.
    pub replay_cooldown: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            blur: BlurParams::default(),
            motion: MotionParams::default(),
            noise: NoiseGateParams::default(),
            ncc_threshold: DEFAULT_NCC_THRESHOLD,
            min_clip_len: 2.0,
            max_clip_len: 10.0,
            refresh_interval: 5.0,
            replay_cooldown: 3.0,
        }
    }
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        self.blur.validate()?;
        self.motion.validate()?;
        NoiseGate::new(self.noise.clone())?;
        if !(self.ncc_threshold > -1.0 && self.ncc_threshold < 1.0) {
            return Err(Error::invalid("ncc threshold must be in (-1, 1)"));
        }
        if !(self.min_clip_len > 0.0 && self.max_clip_len >= self.min_clip_len) {
            return Err(Error::invalid("need 0 < min_clip_len <= max_clip_len"));
        }
        if !(self.refresh_interval > 0.0 && self.replay_cooldown > 0.0) {
            return Err(Error::invalid("refresh interval and cool-down must be positive"));
        }
        Ok(())
    }

    pub fn policy(&self, fps: f64) -> ClipPolicy {
        let frames = |s: f64| ((s * fps).round() as usize).max(1);
        ClipPolicy {
            min_frames: frames(self.min_clip_len),
            max_frames: frames(self.max_clip_len),
            refresh_interval: self.refresh_interval,
            cooldown: self.replay_cooldown,
        }
    }

    pub fn template(&self) -> Result<Template> {
        Ok(Template::fiducial())
    }
}
