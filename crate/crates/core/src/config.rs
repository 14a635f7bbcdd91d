//! TOML run configuration shared by every command.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::dynamics::{Affinity, RoomContext};
use crate::error::{Error, Result};
use crate::evaluation::EvaluationConfig;
use crate::ingest::{AugmentationSpec, SensorMap};
use crate::model::EnvProperty;
use crate::synthetic::SyntheticSpec;

/// Input and output locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// CASAS logs, one per resident.
    pub logs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requests: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub detection: DetectionConfig,
    pub evaluation: EvaluationConfig,
    pub augmentation: AugmentationSpec,
    pub synthetic: SyntheticSpec,
    pub sensors: SensorMap,
    pub rooms: Vec<RoomContext>,
    pub affinity: Affinity,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            paths: Paths::default(),
            detection: DetectionConfig::default(),
            evaluation: EvaluationConfig::default(),
            augmentation: AugmentationSpec::default(),
            synthetic: SyntheticSpec::default(),
            sensors: SensorMap::default(),
            rooms: vec![RoomContext::new("living", 40.0)
                .with_baseline(EnvProperty::Temperature, 25.0)
                .with_baseline(EnvProperty::Illumination, 0.0)],
            affinity: Affinity::default_profile(),
        }
    }
}

impl RunConfig {
    /// Parses and validates; every problem found is reported at once.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let errs = cfg.validate();
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        errs.extend(self.detection.validate());
        errs.extend(self.evaluation.validate());
        errs.extend(self.augmentation.validate());
        errs.extend(self.synthetic.validate());
        errs.extend(self.sensors.validate());
        errs.extend(self.affinity.validate());
        for r in &self.rooms {
            errs.extend(r.validate());
        }
        for (i, r) in self.rooms.iter().enumerate() {
            if self.rooms[..i]
                .iter()
                .any(|q| crate::model::same_location(&q.location, &r.location))
            {
                errs.push(format!("rooms: location `{}` listed twice", r.location));
            }
        }
        errs
    }
}
