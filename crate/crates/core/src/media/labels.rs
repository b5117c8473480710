//! Ground-truth live/replayed labels for frames and audio samples.

use serde::{Deserialize, Serialize};

use super::camera::{audio_sample_of_frame, frame_timestamp_ns};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Live,
    Replayed,
}

/// Output frames `[start_frame, end_frame)` were drawn from a replay clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaySpan {
    pub start_frame: u64,
    pub end_frame: u64,
    /// Exposure time of the oldest clip frame at replay start, seconds.
    pub clip_recorded_at: f64,
}

/// What the attack did to the stream, as reported by the splicer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackTimeline {
    pub fps_numerator: u32,
    pub fps_denominator: u32,
    pub replays: Vec<ReplaySpan>,
}

impl AttackTimeline {
    pub fn span_seconds(&self, span: &ReplaySpan) -> (f64, f64) {
        let t = |f| frame_timestamp_ns(f, self.fps_numerator, self.fps_denominator) as f64 * 1e-9;
        (t(span.start_frame), t(span.end_frame))
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.replays.iter().map(|s| self.span_seconds(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub frames: Vec<Label>,
    /// Replayed audio sample ranges `[start, end)`.
    pub audio_spans: Vec<(u64, u64)>,
    pub audio_len: u64,
}

impl LabelTrack {
    pub fn audio_label(&self, sample: u64) -> Label {
        if self
            .audio_spans
            .iter()
            .any(|&(s, e)| sample >= s && sample < e)
        {
            Label::Replayed
        } else {
            Label::Live
        }
    }

    pub fn audio_labels(&self) -> Vec<Label> {
        (0..self.audio_len).map(|n| self.audio_label(n)).collect()
    }

    pub fn replayed_frames(&self) -> usize {
        self.frames.iter().filter(|&&l| l == Label::Replayed).count()
    }
}

/// Labels each frame and audio sample of the output stream.
pub fn ground_truth(
    timeline: &AttackTimeline,
    frame_count: u64,
    audio_sample_rate: u32,
    audio_len: u64,
) -> LabelTrack {
    let mut frames = vec![Label::Live; frame_count as usize];
    let mut audio_spans = Vec::new();
    let (num, den) = (timeline.fps_numerator, timeline.fps_denominator);
    for span in &timeline.replays {
        let end = span.end_frame.min(frame_count);
        for l in &mut frames[span.start_frame.min(end) as usize..end as usize] {
            *l = Label::Replayed;
        }
        if num > 0 {
            let s = audio_sample_of_frame(span.start_frame, audio_sample_rate, num, den);
            let e = audio_sample_of_frame(end, audio_sample_rate, num, den).min(audio_len);
            if s < e {
                audio_spans.push((s, e));
            }
        }
    }
    LabelTrack {
        frames,
        audio_spans,
        audio_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_replay_is_all_live() {
        let t = AttackTimeline {
            fps_numerator: 30,
            fps_denominator: 1,
            replays: vec![],
        };
        let labels = ground_truth(&t, 900, 8000, 240_000);
        assert!(labels.frames.iter().all(|&l| l == Label::Live));
        assert_eq!(labels.audio_label(1000), Label::Live);
    }

    #[test]
    fn ten_second_replay_at_30fps() {
        let t = AttackTimeline {
            fps_numerator: 30,
            fps_denominator: 1,
            replays: vec![ReplaySpan {
                start_frame: 300,
                end_frame: 600,
                clip_recorded_at: 0.0,
            }],
        };
        let labels = ground_truth(&t, 900, 8000, 240_000);
        assert_eq!(labels.replayed_frames(), 300);
        assert_eq!(labels.frames[299], Label::Live);
        assert_eq!(labels.frames[300], Label::Replayed);
        assert_eq!(labels.audio_spans, vec![(80_000, 160_000)]);
        assert_eq!(labels.audio_label(159_999), Label::Replayed);
        assert_eq!(labels.audio_label(160_000), Label::Live);
        assert_eq!(t.intervals(), vec![(10.0, 20.0)]);
    }
}
