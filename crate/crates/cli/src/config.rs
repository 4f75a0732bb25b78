//! Pipeline configuration: one TOML file with `${ENV_VAR}` interpolation,
//! per-stage provider assignment, and content fingerprints that gate stage
//! reuse on resume.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nuggetbank_core::clusterstage::ClusterConfig;
use nuggetbank_core::error::{Error, Result};
use nuggetbank_core::providers::templates::TEMPLATE_VERSION;
use nuggetbank_core::providers::ProviderConfig;
use nuggetbank_core::rankstats::WpaConfig;
use nuggetbank_core::refinestage::DEFAULT_UNINFORMATIVE;
use nuggetbank_core::selectstage::SelectionConfig;
use nuggetbank_core::util::{sha256_hex, sha256_seed};

/// Provider stage keys: stage1 (summarize + QA generation), embedding,
/// refine (paraphrase verification and stage 2B), criteria, judge.
pub const PROVIDER_STAGES: [&str; 5] = ["stage1", "embedding", "refine", "criteria", "judge"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_top_k")]
    pub top_k_docs: usize,
    #[serde(default = "default_max_doc_chars")]
    pub max_doc_chars: usize,
    /// Label attached to leaderboards produced under this config.
    #[serde(default = "default_label")]
    pub label: String,
    pub paths: Paths,
    pub providers: BTreeMap<String, ProviderConfig>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    /// Path to a trained model file; required by dogmatiq selection.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub wpa: WpaConfig,
    /// Alternation body for the uninformative-answer filter.
    #[serde(default = "default_uninformative")]
    pub uninformative_pattern: String,
}

fn default_parallelism() -> usize {
    1
}

fn default_top_k() -> usize {
    50
}

fn default_max_doc_chars() -> usize {
    24_000
}

fn default_label() -> String {
    "nuggetbank".to_string()
}

fn default_uninformative() -> String {
    DEFAULT_UNINFORMATIVE.to_string()
}

impl PipelineConfig {
    /// Parse a TOML file, interpolating `${VAR}` from the environment.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let interpolated = interpolate_env(&raw)?;
        let mut config: PipelineConfig = toml::from_str(&interpolated)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Paths in the file are relative to the file's directory.
        if let Some(base) = path.parent() {
            config.paths.input_dir = base.join(&config.paths.input_dir);
            config.paths.output_dir = base.join(&config.paths.output_dir);
            if let Some(cache) = &config.paths.cache_dir {
                config.paths.cache_dir = Some(base.join(cache));
            }
            if let Some(model) = &config.model_path {
                config.model_path = Some(base.join(model));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        if self.top_k_docs == 0 {
            return Err(Error::Config("top_k_docs must be >= 1".into()));
        }
        if !self.paths.input_dir.is_dir() {
            return Err(Error::Config(format!(
                "input_dir {} does not exist",
                self.paths.input_dir.display()
            )));
        }
        self.cluster.validate()?;
        self.selection.validate()?;
        self.wpa.validate()?;
        for (stage, provider) in &self.providers {
            if !PROVIDER_STAGES.contains(&stage.as_str()) {
                return Err(Error::Config(format!(
                    "unknown provider stage {stage:?}; expected one of {PROVIDER_STAGES:?}"
                )));
            }
            provider.validate()?;
        }
        Ok(())
    }

    /// The provider config for a stage, seeded and cache-wired for this run.
    pub fn provider(&self, stage: &str) -> Result<ProviderConfig> {
        let mut provider = self
            .providers
            .get(stage)
            .ok_or_else(|| Error::Config(format!("no provider configured for stage {stage:?}")))?
            .clone();
        // Per-stage deterministic seed derived from the run seed.
        provider.seed = sha256_seed(&[b"stage-seed", stage.as_bytes(), &self.seed.to_le_bytes()]);
        if provider.cache_dir.is_empty() {
            let dir = self
                .paths
                .cache_dir
                .clone()
                .unwrap_or_else(|| self.paths.output_dir.join("cache"));
            provider.cache_dir = dir.join(stage).to_string_lossy().into_owned();
        }
        Ok(provider)
    }

    // -- fingerprints -------------------------------------------------------

    /// Slice of a provider config that affects outputs (operational knobs
    /// like rate limits and cache paths are excluded).
    fn provider_slice(&self, stage: &str) -> String {
        match self.providers.get(stage) {
            Some(p) => format!(
                "{stage}|{:?}|{}|{}|{}|{}",
                p.kind, p.model_name, p.endpoint, p.failure_rate, self.seed
            ),
            None => format!("{stage}|absent"),
        }
    }

    pub fn fingerprint_stage1(&self) -> String {
        sha256_hex(&[
            b"stage1",
            self.provider_slice("stage1").as_bytes(),
            &(self.top_k_docs as u64).to_le_bytes(),
            &(self.max_doc_chars as u64).to_le_bytes(),
            TEMPLATE_VERSION.as_bytes(),
        ])
    }

    pub fn fingerprint_stage2a(&self) -> String {
        sha256_hex(&[
            b"stage2a",
            self.fingerprint_stage1().as_bytes(),
            self.provider_slice("embedding").as_bytes(),
            self.provider_slice("refine").as_bytes(),
            self.cluster.cosine_threshold.to_bits().to_le_bytes().as_slice(),
            &[self.cluster.verify_with_llm as u8],
            TEMPLATE_VERSION.as_bytes(),
        ])
    }

    pub fn fingerprint_stage2b(&self) -> String {
        sha256_hex(&[
            b"stage2b",
            self.fingerprint_stage2a().as_bytes(),
            self.provider_slice("refine").as_bytes(),
            self.uninformative_pattern.as_bytes(),
            TEMPLATE_VERSION.as_bytes(),
        ])
    }

    /// `model_digest` is the hash of the model file when dogmatiq selection
    /// is in effect (the model is an input to stage 3).
    pub fn fingerprint_stage3(&self, model_digest: &str) -> String {
        sha256_hex(&[
            b"stage3",
            self.fingerprint_stage2b().as_bytes(),
            self.provider_slice("criteria").as_bytes(),
            format!("{:?}", self.selection.method).as_bytes(),
            &(self.selection.cap as u64).to_le_bytes(),
            &self.selection.seed.to_le_bytes(),
            model_digest.as_bytes(),
            TEMPLATE_VERSION.as_bytes(),
        ])
    }

    /// Fingerprint of everything that affects pipeline outputs. Paths,
    /// parallelism, and provider operational knobs are excluded: two runs
    /// that differ only in where they read and write are the same run.
    pub fn fingerprint(&self) -> String {
        let wpa = serde_json::to_string(&self.wpa).expect("wpa serializes");
        sha256_hex(&[
            b"config",
            self.fingerprint_stage2b().as_bytes(),
            self.provider_slice("criteria").as_bytes(),
            self.provider_slice("judge").as_bytes(),
            format!("{:?}", self.selection.method).as_bytes(),
            &(self.selection.cap as u64).to_le_bytes(),
            &self.selection.seed.to_le_bytes(),
            wpa.as_bytes(),
            self.label.as_bytes(),
            TEMPLATE_VERSION.as_bytes(),
        ])
    }
}

/// Replace `${NAME}` with the environment variable's value; unknown
/// variables are a configuration error.
pub fn interpolate_env(raw: &str) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::Config("unclosed ${ in config".into()))?;
        let name = &after[..end];
        let value = std::env::var(name)
            .map_err(|_| Error::Config(format!("environment variable {name:?} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
