//! TOML pipeline configuration shared by the command-line tools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{SampleConfig, TrainConfig};
use crate::error::Error;
use crate::grounding::DetectorParams;
use crate::scene::SimConfig;
use crate::Result;

/// Top-level configuration; unknown keys are rejected so typos fail fast.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub bank: BankSection,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub detector: DetectorParams,
    pub metrics: MetricsSection,
    pub generate: GenerateSection,
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Root for bank/, data/, models/, reports/ when the CLI gets no --out.
    pub workdir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankSection {
    /// Synthetic one-occurrence clips generated per class.
    pub per_class: usize,
    pub filter_threshold: f64,
    pub segment_threshold: f64,
}

impl Default for BankSection {
    fn default() -> Self {
        Self {
            per_class: 6,
            filter_threshold: crate::bank::FILTER_THRESHOLD,
            segment_threshold: crate::bank::SEGMENT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Segment length for the segment-based F1, in seconds.
    pub segment_length: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            segment_length: crate::metrics::DEFAULT_SEGMENT_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub guidance_scale: f64,
    /// Clip length assumed when a caption carries no explicit extent.
    pub clip_length: f64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            guidance_scale: 3.0,
            clip_length: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            token_env: "CHAT_API_TOKEN".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: Self =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.train.validate()?;
        if self.metrics.segment_length <= 0.0 {
            return Err(Error::InvalidConfig("segment_length must be positive".into()));
        }
        if self.generate.clip_length <= 0.0 {
            return Err(Error::InvalidConfig("clip_length must be positive".into()));
        }
        if self.bank.per_class == 0 {
            return Err(Error::InvalidConfig("per_class must be positive".into()));
        }
        Ok(())
    }

    pub fn sample_config(&self, seed: u64) -> SampleConfig {
        SampleConfig {
            guidance_scale: self.generate.guidance_scale,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let config = PipelineConfig::default();
        let text = toml::to_string_pretty(&config).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(
            serde_json::to_string(&config).unwrap(),
            serde_json::to_string(&back).unwrap()
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[sim]\nnonsense = 3\n";
        assert!(toml::from_str::<PipelineConfig>(text).is_err());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let text = "[train]\nepochs = 2\n";
        let config: PipelineConfig = toml::from_str(text).unwrap();
        assert_eq!(config.train.epochs, 2);
        assert_eq!(config.sim.clip_length, SimConfig::default().clip_length);
    }
}
