use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    MotionStart,
    MotionEnd,
    NoiseStart,
    NoiseEnd,
    ClipComplete,
    Trigger,
    ReplayStart,
    ReplayEnd,
    /// Not part of the CSV log; surfaced through `log::warn!`.
    Warning,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::MotionStart => "motion_start",
            EventKind::MotionEnd => "motion_end",
            EventKind::NoiseStart => "noise_start",
            EventKind::NoiseEnd => "noise_end",
            EventKind::ClipComplete => "clip_complete",
            EventKind::Trigger => "trigger",
            EventKind::ReplayStart => "replay_start",
            EventKind::ReplayEnd => "replay_end",
            EventKind::Warning => "warning",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "motion_start" => EventKind::MotionStart,
            "motion_end" => EventKind::MotionEnd,
            "noise_start" => EventKind::NoiseStart,
            "noise_end" => EventKind::NoiseEnd,
            "clip_complete" => EventKind::ClipComplete,
            "trigger" => EventKind::Trigger,
            "replay_start" => EventKind::ReplayStart,
            "replay_end" => EventKind::ReplayEnd,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackEvent {
    pub time: f64,
    pub frame: u64,
    pub kind: EventKind,
    pub detail: String,
}

/// Writes the `time_s,event,detail` log, skipping warnings.
pub fn write_event_log<W: Write>(out: W, events: &[AttackEvent]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| Error::format("<event log>", e.to_string());
    w.write_record(["time_s", "event", "detail"]).map_err(err)?;
    for e in events.iter().filter(|e| e.kind != EventKind::Warning) {
        w.write_record([format!("{:.6}", e.time), e.kind.to_string(), e.detail.clone()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<event log>", e))?;
    Ok(())
}

/// Parses an event log back into `(time, kind, detail)` rows.
pub fn read_event_log<R: std::io::Read>(input: R) -> Result<Vec<(f64, EventKind, String)>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |m: String| Error::format("<event log>", m);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let t: f64 = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e| bad(format!("{e}")))?;
        let kind = rec
            .get(1)
            .and_then(EventKind::parse)
            .ok_or_else(|| bad(format!("unknown event {:?}", rec.get(1))))?;
        out.push((t, kind, rec.get(2).unwrap_or("").to_string()));
    }
    Ok(out)
}
