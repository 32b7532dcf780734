//! Model artifact directory layout and its manifest.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/encoder.onnx    inputs: input_ids, attention_mask (int64 [1, S])
//!                       outputs: last_hidden_state [1, S, D], optional self_attn_<l> [1, H, S, S]
//! <dir>/decoder.onnx    inputs: decoder_input_ids (int64 [1, T]), encoder_hidden_states,
//!                               encoder_attention_mask
//!                       outputs: cross_attn_<l> [1, H, T, S], one per decoder layer
//! <dir>/tokenizer.json  HuggingFace tokenizers definition
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportManifest {
    pub model_name: String,
    pub layer_count: usize,
    pub head_count: usize,
    pub start_token_id: u32,
    /// Longest encoder input, query and special tokens included.
    pub max_length: usize,
    #[serde(default)]
    pub files: ArtifactFiles,
    /// Per-layer cross-attention output names in the decoder graph.
    pub cross_attention_outputs: Vec<String>,
    #[serde(default = "default_hidden_output")]
    pub hidden_state_output: String,
    /// Per-layer encoder self-attention outputs; empty when not exported.
    #[serde(default)]
    pub self_attention_outputs: Vec<String>,
    #[serde(default)]
    pub causal_lm: Option<CausalLmSpec>,
    /// Hex SHA-256 per file name, relative to the artifact directory.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
}

fn default_hidden_output() -> String {
    "last_hidden_state".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactFiles {
    pub encoder: String,
    pub decoder: String,
    pub tokenizer: String,
}

impl Default for ArtifactFiles {
    fn default() -> Self {
        ArtifactFiles {
            encoder: "encoder.onnx".into(),
            decoder: "decoder.onnx".into(),
            tokenizer: "tokenizer.json".into(),
        }
    }
}

/// Optional causal language model for the self-information baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalLmSpec {
    pub file: String,
    pub tokenizer: String,
    pub bos_token_id: u32,
    pub max_length: usize,
    #[serde(default = "default_logits_output")]
    pub logits_output: String,
}

fn default_logits_output() -> String {
    "logits".into()
}

impl ExportManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: ExportManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text).map_err(|e| Error::Artifact {
            path,
            reason: e.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidInput(format!("manifest: {reason}"));
        if self.layer_count == 0 || self.head_count == 0 {
            return Err(bad("layer_count and head_count must be positive".into()));
        }
        if self.cross_attention_outputs.len() != self.layer_count {
            return Err(bad(format!(
                "{} cross-attention outputs for {} layers",
                self.cross_attention_outputs.len(),
                self.layer_count
            )));
        }
        if self.max_length < 2 {
            return Err(bad("max_length must be at least 2".into()));
        }
        for (name, digest) in &self.checksums {
            if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(bad(format!("checksum for {name} is not a hex SHA-256")));
            }
        }
        Ok(())
    }

    /// Every file the manifest refers to.
    pub fn referenced_files(&self) -> Vec<&str> {
        let mut out = vec![
            self.files.encoder.as_str(),
            self.files.decoder.as_str(),
            self.files.tokenizer.as_str(),
        ];
        if let Some(lm) = &self.causal_lm {
            out.push(&lm.file);
            out.push(&lm.tokenizer);
        }
        out
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Outcome of checking an artifact directory against its manifest.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ArtifactCheck {
    pub dir: PathBuf,
    pub manifest: Option<ExportManifest>,
    pub problems: Vec<String>,
    pub checked_files: Vec<String>,
}

impl ArtifactCheck {
    pub fn ok(&self) -> bool {
        self.manifest.is_some() && self.problems.is_empty()
    }
}

/// Validates manifest, file presence, checksums and (with the `onnx` feature)
/// that every named tensor exists in the graphs.
pub fn check_artifacts(dir: &Path) -> ArtifactCheck {
    let mut check = ArtifactCheck {
        dir: dir.to_path_buf(),
        ..Default::default()
    };
    let manifest = match ExportManifest::load(dir) {
        Ok(m) => m,
        Err(e) => {
            check.problems.push(e.to_string());
            return check;
        }
    };
    for file in manifest.referenced_files() {
        if !dir.join(file).is_file() {
            check.problems.push(format!("missing file {file}"));
        }
    }
    for (name, expected) in &manifest.checksums {
        match sha256_file(&dir.join(name)) {
            Ok(actual) if actual.eq_ignore_ascii_case(expected) => {
                check.checked_files.push(name.clone())
            }
            Ok(actual) => check
                .problems
                .push(format!("checksum mismatch for {name}: expected {expected}, found {actual}")),
            Err(e) => check.problems.push(e.to_string()),
        }
    }
    #[cfg(feature = "onnx")]
    if check.problems.is_empty() {
        check.problems.extend(super::onnx::check_graph_outputs(dir, &manifest));
    }
    check.manifest = Some(manifest);
    check
}
