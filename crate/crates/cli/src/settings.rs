//! Settings file plus flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crossprune::config::validate_config;
use crossprune::dataset::FieldMap;
use crossprune::llm::{EndpointConfig, TOKEN_ENV};
use crossprune::scorer::ScorerFactory;
use crossprune::{CompressionConfig, LayerSelect, ScorerKind, Strategy};

use crate::args::RunArgs;
use crate::failure::Failure;

/// Mirror of the shared run flags. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub compression: Option<CompressionConfig>,
    pub scorer: Option<String>,
    pub model: Option<PathBuf>,
    pub mock_table: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub strict: Option<bool>,
    pub seed: Option<u64>,
    pub fields: Vec<String>,
    pub endpoint: Option<EndpointConfig>,
}

impl SettingsFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings for one run.
#[derive(Debug)]
pub struct Settings {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub compression: CompressionConfig,
    pub scorer: ScorerKind,
    pub model: Option<PathBuf>,
    pub mock_table: Option<PathBuf>,
    pub jobs: usize,
    pub strict: bool,
    pub seed: u64,
    pub fields: FieldMap,
}

impl Settings {
    pub fn resolve(file: &SettingsFile, flags: &RunArgs) -> Result<Self, Failure> {
        let mut cfg = file.compression.clone().unwrap_or_default();
        if let Some(t) = flags.tau {
            cfg.tau = t;
        }
        if let Some(s) = flags.sigma {
            cfg.sigma = s;
        }
        if let Some(k) = flags.window {
            cfg.window_k = k;
        }
        if let Some(c) = flags.chunk_size {
            cfg.chunk_size = c;
        }
        if let Some(s) = &flags.strategy {
            cfg.strategy = s.parse::<Strategy>().map_err(Failure::usage)?;
        }
        if let Some(l) = &flags.layers {
            cfg.layer_select = l.parse::<LayerSelect>().map_err(Failure::usage)?;
        }
        let compression = validate_config(cfg).map_err(Failure::from_config)?;

        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let scorer_name = flags
            .scorer
            .clone()
            .or_else(|| file.scorer.clone())
            .unwrap_or_else(|| "cross-first".into());
        let scorer = ScorerKind::parse(&scorer_name, seed).map_err(Failure::usage)?;

        let input = flags
            .input
            .clone()
            .or_else(|| file.input.clone())
            .ok_or_else(|| Failure::usage("--input is required"))?;
        let jobs = flags
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        let mut fields = FieldMap::default();
        for entry in file.fields.iter().chain(&flags.fields) {
            fields = fields.with_override(entry).map_err(|e| Failure::usage(e.to_string()))?;
        }
        Ok(Settings {
            input,
            output: flags.output.clone().or_else(|| file.output.clone()),
            compression,
            scorer,
            model: flags.model.clone().or_else(|| file.model.clone()),
            mock_table: flags.mock_table.clone().or_else(|| file.mock_table.clone()),
            jobs,
            strict: flags.strict || file.strict.unwrap_or(false),
            seed,
            fields,
        })
    }

    pub fn factory(&self, kind: ScorerKind) -> Result<ScorerFactory, Failure> {
        let f = ScorerFactory::new(kind, self.model.as_deref(), self.mock_table.as_deref())?;
        f.build()?;
        Ok(f)
    }

    /// Dataset id reported in outputs: the input file stem.
    pub fn dataset_id(&self) -> String {
        self.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

/// Endpoint settings: file values, then `--endpoint`, then the token variable.
pub fn endpoint(file: &SettingsFile, url: Option<&str>) -> Result<EndpointConfig, Failure> {
    let mut cfg = file.endpoint.clone().unwrap_or_default();
    match url {
        Some(u) => cfg.base_url = u.to_string(),
        None if file.endpoint.is_none() => {
            return Err(Failure::usage("exact match needs --endpoint URL"));
        }
        None => {}
    }
    cfg.bearer_token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}
