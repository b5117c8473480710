//! Declarative scene schedule driving the renderers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// An object of `object_size_px` square sweeping horizontally.
    Motion {
        start: f64,
        end: f64,
        object_size_px: u32,
        velocity_px_per_s: f64,
    },
    /// Light level switches to `new_level` (luminance 0-255) at `time`.
    LightToggle { time: f64, new_level: f64 },
    /// Band-limited acoustic noise of peak amplitude `amplitude`.
    NoiseBurst { start: f64, end: f64, amplitude: f64 },
    /// The fiducial marker is visible with its top-left corner at `position_px`.
    TriggerAppearance {
        start: f64,
        end: f64,
        position_px: [u32; 2],
    },
    ManualTrigger { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub schema_version: u32,
    pub duration: f64,
    /// Light level before any toggle.
    #[serde(default = "default_base_level")]
    pub base_level: f64,
    #[serde(default)]
    pub events: Vec<Event>,
}

fn default_base_level() -> f64 {
    128.0
}

impl SceneScript {
    pub fn new(duration: f64) -> Self {
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            duration,
            base_level: default_base_level(),
            events: Vec::new(),
        }
    }

    pub fn with_event(mut self, event: Event) -> Self {
        self.events.push(event);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported scene schema_version {}",
                self.schema_version
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::invalid("scene duration must be positive"));
        }
        check_level(self.base_level)?;
        let in_span = |t: f64| (0.0..=self.duration).contains(&t);
        let interval = |s: f64, e: f64| -> Result<()> {
            if !in_span(s) || !in_span(e) {
                return Err(Error::invalid(format!(
                    "event interval [{s}, {e}] outside [0, {}]",
                    self.duration
                )));
            }
            if s >= e {
                return Err(Error::invalid(format!("event interval [{s}, {e}] is empty")));
            }
            Ok(())
        };
        for ev in &self.events {
            match *ev {
                Event::Motion {
                    start,
                    end,
                    object_size_px,
                    ..
                } => {
                    interval(start, end)?;
                    if object_size_px < 2 {
                        return Err(Error::invalid("motion object must be at least 2 px"));
                    }
                }
                Event::LightToggle { time, new_level } => {
                    if !in_span(time) {
                        return Err(Error::invalid(format!("light toggle at {time} outside scene")));
                    }
                    check_level(new_level)?;
                }
                Event::NoiseBurst {
                    start,
                    end,
                    amplitude,
                } => {
                    interval(start, end)?;
                    if !(0.0..=1.0).contains(&amplitude) {
                        return Err(Error::invalid("noise amplitude must be in [0, 1]"));
                    }
                }
                Event::TriggerAppearance { start, end, .. } => interval(start, end)?,
                Event::ManualTrigger { time } => {
                    if !in_span(time) {
                        return Err(Error::invalid(format!(
                            "manual trigger at {time} outside scene"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Light level in effect at `t`.
    pub fn light_level(&self, t: f64) -> f64 {
        let mut level = self.base_level;
        let mut latest = f64::NEG_INFINITY;
        for ev in &self.events {
            if let Event::LightToggle { time, new_level } = *ev {
                if time <= t && time >= latest {
                    latest = time;
                    level = new_level;
                }
            }
        }
        level
    }

    pub fn manual_trigger_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match *e {
                Event::ManualTrigger { time } => Some(time),
                _ => None,
            })
            .collect()
    }

    pub fn has_trigger(&self) -> bool {
        self.events.iter().any(|e| {
            matches!(
                e,
                Event::TriggerAppearance { .. } | Event::ManualTrigger { .. }
            )
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let script: SceneScript =
            toml::from_str(text).map_err(|e| Error::invalid(format!("scene script: {e}")))?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene script serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::format(path, msg),
            other => other,
        })
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(0.0..=255.0).contains(&level) {
        return Err(Error::invalid(format!("light level {level} outside [0, 255]")));
    }
    Ok(())
}
