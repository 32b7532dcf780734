use std::collections::HashMap;
use std::fs;
use std::path::Path;
#[cfg(feature = "onnx")]
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{MockScorer, RandomScorer, Scorer, ScorerKind};

/// Word table for the mock scorer, as read from JSON:
/// `{"scores": {"barn": 1.0}, "default": 0.0}`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockTable {
    pub scores: HashMap<String, f64>,
    #[serde(default)]
    pub default: Option<f64>,
}

impl MockTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn scorer(&self) -> MockScorer {
        let s = MockScorer::new(self.scores.clone());
        match self.default {
            Some(d) => s.with_default(d),
            None => s,
        }
    }
}

/// Builds one scorer per worker from shared, already-loaded state.
#[derive(Debug, Clone)]
pub struct ScorerFactory {
    kind: ScorerKind,
    mock: Option<MockTable>,
    #[cfg(feature = "onnx")]
    model: Option<Arc<super::onnx::OnnxModel>>,
}

impl ScorerFactory {
    /// `model` is required for model-backed kinds, `mock_table` for `mock`
    /// (without one every word scores 1).
    pub fn new(kind: ScorerKind, model: Option<&Path>, mock_table: Option<&Path>) -> Result<Self> {
        let mock = match (kind, mock_table) {
            (ScorerKind::Mock, Some(p)) => Some(MockTable::load(p)?),
            (ScorerKind::Mock, None) => Some(MockTable {
                scores: HashMap::new(),
                default: Some(1.0),
            }),
            _ => None,
        };
        let needs_model = !matches!(kind, ScorerKind::Mock | ScorerKind::Random { .. });
        if needs_model && model.is_none() {
            return Err(Error::InvalidConfig {
                field: "model",
                reason: format!("scorer {} needs --model <dir>", kind.label()),
            });
        }
        #[cfg(feature = "onnx")]
        let model = match model {
            Some(dir) if needs_model => Some(Arc::new(super::onnx::OnnxModel::load(dir)?)),
            _ => None,
        };
        #[cfg(not(feature = "onnx"))]
        if needs_model {
            return Err(Error::Artifact {
                path: model.map(Path::to_path_buf).unwrap_or_default(),
                reason: "built without the onnx feature".into(),
            });
        }
        Ok(ScorerFactory {
            kind,
            mock,
            #[cfg(feature = "onnx")]
            model,
        })
    }

    /// Same kind, reusing the loaded model.
    pub fn with_kind(&self, kind: ScorerKind) -> Result<Self> {
        let mut f = self.clone();
        f.kind = kind;
        f.build()?;
        Ok(f)
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn build(&self) -> Result<Box<dyn Scorer>> {
        match self.kind {
            ScorerKind::Mock => Ok(Box::new(self.mock.clone().unwrap_or_default().scorer())),
            ScorerKind::Random { seed } => Ok(Box::new(RandomScorer::new(seed))),
            #[cfg(feature = "onnx")]
            kind => {
                let model = self.model.clone().ok_or_else(|| Error::InvalidConfig {
                    field: "model",
                    reason: format!("scorer {} needs --model <dir>", kind.label()),
                })?;
                Ok(Box::new(super::onnx::OnnxScorer::new(model, kind)?))
            }
            #[cfg(not(feature = "onnx"))]
            kind => Err(Error::Artifact {
                path: Default::default(),
                reason: format!("{} needs the onnx feature", kind.label()),
            }),
        }
    }
}
