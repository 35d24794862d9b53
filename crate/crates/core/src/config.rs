//! Run configuration: a TOML file, with command-line flags layered on top.
//!
//! Relative paths in the file resolve against the file's directory, so a
//! config can travel with its data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusConfig;
use crate::expl_eval::Aggregation;
use crate::rank_eval::{Gain, GoldSetting};
use crate::schema::SchemaScoring;
use crate::service::ServeConfig;
use crate::text_align;

pub const CONFIG_ENV: &str = "EXPLBENCH_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{field} must be finite, got {value}")]
    NotFinite { field: &'static str, value: f64 },
    #[error("{field} must be within [{min}, {max}], got {value}")]
    OutOfRange { field: &'static str, value: f64, min: f64, max: f64 },
    #[error("{field} must be at least 1")]
    Zero { field: &'static str },
    #[error("{field}: {path} does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub kb_dir: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub scores: Vec<PathBuf>,
    pub generated: Option<PathBuf>,
    pub schemas: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            kb_dir: None,
            questions: None,
            ratings: None,
            scores: Vec::new(),
            generated: None,
            schemas: None,
            overrides: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum ROUGE-1 F1 for a generated string to count as a KB fact.
    pub rouge: f64,
    pub clip: f64,
    pub filter: f64,
    /// Facts kept per question for top-K explanations.
    pub top_k: usize,
    /// Facts taken from each ranker when shortlisting.
    pub shortlist_k: usize,
    pub n_schemas: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rouge: text_align::DEFAULT_THRESHOLD,
            clip: 0.0,
            filter: 0.0,
            top_k: 8,
            shortlist_k: 20,
            n_schemas: SchemaScoring::default().n_schemas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub setting: GoldSetting,
    pub aggregation: Aggregation,
    pub ndcg_cutoff: Option<usize>,
    pub gain: Gain,
    pub separator: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            setting: GoldSetting::Tr2,
            aggregation: Aggregation::PerQuestion,
            ndcg_cutoff: None,
            gain: Gain::default(),
            separator: text_align::DEFAULT_SEPARATOR.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub thresholds: Thresholds,
    pub eval: EvalOptions,
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
    pub serve: ServeConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// The file named by `explicit`, else by `EXPLBENCH_CONFIG`, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for opt in [&mut p.kb_dir, &mut p.questions, &mut p.ratings, &mut p.generated, &mut p.schemas, &mut p.overrides]
        {
            if let Some(x) = opt.as_mut() {
                fix(x);
            }
        }
        p.scores.iter_mut().for_each(fix);
        fix(&mut p.output_dir);
        fix(&mut self.serve.data_dir);
        if let Some(ui) = self.serve.ui_dir.as_mut() {
            fix(ui);
        }
    }

    /// Threshold sanity plus existence of every configured input path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        for (field, value) in [("thresholds.rouge", t.rouge), ("thresholds.clip", t.clip), ("thresholds.filter", t.filter)] {
            if value.is_nan() || (field == "thresholds.rouge" && value.is_infinite()) {
                return Err(ConfigError::NotFinite { field, value });
            }
        }
        if !(0.0..=1.0).contains(&t.rouge) {
            return Err(ConfigError::OutOfRange {
                field: "thresholds.rouge",
                value: t.rouge,
                min: 0.0,
                max: 1.0,
            });
        }
        for (field, v) in [
            ("thresholds.top_k", t.top_k),
            ("thresholds.shortlist_k", t.shortlist_k),
            ("thresholds.n_schemas", t.n_schemas),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero { field });
            }
        }
        if self.workers == Some(0) {
            return Err(ConfigError::Zero { field: "workers" });
        }
        let p = &self.paths;
        let inputs = [
            ("paths.kb_dir", &p.kb_dir),
            ("paths.questions", &p.questions),
            ("paths.ratings", &p.ratings),
            ("paths.generated", &p.generated),
            ("paths.schemas", &p.schemas),
            ("paths.overrides", &p.overrides),
        ];
        for (field, path) in inputs {
            if let Some(path) = path.as_ref().filter(|p| !p.exists()) {
                return Err(ConfigError::MissingPath { field, path: path.clone() });
            }
        }
        if let Some(path) = p.scores.iter().find(|p| !p.exists()) {
            return Err(ConfigError::MissingPath {
                field: "paths.scores",
                path: path.clone(),
            });
        }
        Ok(())
    }

    pub fn schema_scoring(&self) -> SchemaScoring {
        SchemaScoring {
            clip_threshold: self.thresholds.clip,
            filter_threshold: self.thresholds.filter,
            n_schemas: self.thresholds.n_schemas,
        }
    }

    /// Short hash of the settings that affect report contents. Paths and
    /// service settings are left out so the same run on moved data hashes
    /// the same.
    pub fn hash(&self) -> String {
        let material = serde_json::json!({
            "corpus": self.corpus,
            "thresholds": self.thresholds,
            "eval": self.eval,
        });
        let digest = Sha256::digest(material.to_string().as_bytes());
        hex::encode(&digest[..6])
    }

    /// Header line stamped on every report.
    pub fn stamp(&self) -> String {
        format!("# explbench {} config {}\n", env!("CARGO_PKG_VERSION"), self.hash())
    }
}
