use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackParams;
use crate::detect::DetectorParams;
use crate::error::{Error, Result};
use crate::extract::ExtractionParams;
use crate::media::{CameraParams, SceneScript};
use crate::signal::GridParams;

use super::corpus;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub enf: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { enf: 7, noise: 1 }
    }
}

/// One experiment: scene, media model, attack, extraction and detection
/// settings, seeds and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    /// Scene script file, relative to the config file. Absent selects the
    /// built-in attacked scene.
    pub scene: Option<PathBuf>,
    pub grid: GridParams,
    pub camera: CameraParams,
    pub attack: AttackParams,
    pub audio_extraction: ExtractionParams,
    pub video_extraction: ExtractionParams,
    pub detector: DetectorParams,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    /// Run detection on the live media instead of attacking it.
    pub skip_attack: bool,
    /// Standard deviation of measurement noise added to the reference, Hz.
    pub reference_noise_hz: f64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario: "default".to_string(),
            scene: None,
            grid: GridParams::default(),
            camera: CameraParams::default(),
            attack: AttackParams::default(),
            audio_extraction: ExtractionParams::audio(60.0),
            video_extraction: ExtractionParams::video(60.0),
            detector: DetectorParams::default(),
            seeds: Seeds::default(),
            output_dir: PathBuf::from("out"),
            skip_attack: false,
            reference_noise_hz: 0.0,
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::format("<config>", e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::UnsupportedConfiguration(format!(
                "config schema_version {} (supported: {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Loads a config; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn scene_script(&self) -> Result<SceneScript> {
        match &self.scene {
            Some(p) => SceneScript::load(&self.resolve(p)),
            None => Ok(corpus::default_scene()),
        }
    }

    /// Extraction and gating settings with the grid's nominal applied.
    pub fn audio_params(&self) -> ExtractionParams {
        ExtractionParams {
            nominal: self.grid.f_nominal,
            ..self.audio_extraction.clone()
        }
    }

    pub fn video_params(&self) -> ExtractionParams {
        ExtractionParams {
            nominal: self.grid.f_nominal,
            ..self.video_extraction.clone()
        }
    }

    pub fn attack_params(&self) -> AttackParams {
        let mut a = self.attack.clone();
        a.noise.nominal = self.grid.f_nominal;
        a
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.camera.validate()?;
        self.attack_params().validate()?;
        self.audio_params().validate()?;
        self.video_params().validate()?;
        self.detector.validate()?;
        if !(self.reference_noise_hz >= 0.0) {
            return Err(Error::invalid("reference_noise_hz must be >= 0"));
        }
        if let Some(p) = &self.scene {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(Error::invalid(format!("scene file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
