//! Scorers backed by exported ONNX graphs, run on CPU with tract.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use tokenizers::Tokenizer;
use tract_onnx::prelude::*;

use crate::config::LayerSelect;
use crate::error::{Error, Result};
use crate::segmenter::TokenSpan;

use super::manifest::{CausalLmSpec, ExportManifest};
use super::{
    AttentionRequest, RawScoreVector, Scorer, ScorerKind,
    CONTEXT_QUERY_SEPARATOR,
};

type Plan = Arc<TypedRunnableModel>;

fn artifact_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Artifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn infer_err(e: impl std::fmt::Display) -> Error {
    Error::Inference(format!("{e:#}"))
}

fn load_plan(path: &Path, outputs: &[String]) -> Result<Plan> {
    tract_onnx::onnx()
        .model_for_path(path)
        .and_then(|m| m.with_outputs_by_name(outputs))
        .and_then(|m| m.into_optimized())
        .and_then(|m| m.into_runnable())
        .map_err(|e| artifact_err(path, format!("{e:#}")))
}

fn load_tokenizer(path: &Path) -> Result<Tokenizer> {
    Tokenizer::from_file(path).map_err(|e| artifact_err(path, e))
}

fn ids_tensor(ids: &[u32]) -> Result<TValue> {
    let v: Vec<i64> = ids.iter().map(|&i| i64::from(i)).collect();
    let t = tract_ndarray::Array2::from_shape_vec((1, v.len()), v).map_err(infer_err)?;
    Ok(Tensor::from(t).into())
}

/// Reads a `[1, H, T, S]` attention tensor as an owned f32 array.
fn attention(value: &TValue, name: &str) -> Result<tract_ndarray::Array4<f32>> {
    let view = value.to_plain_array_view::<f32>().map_err(infer_err)?;
    let shape = view.shape().to_vec();
    view.into_dimensionality::<tract_ndarray::Ix4>()
        .map(|v| v.to_owned())
        .map_err(|_| Error::Inference(format!("output {name} has shape {shape:?}, expected [1, H, T, S]")))
}

/// Encoder input for one request.
struct EncodedInput {
    ids: Vec<u32>,
    /// Encoder positions of the context tokens, in order.
    context_positions: Vec<usize>,
    context_spans: Vec<TokenSpan>,
    /// Encoder positions of the query tokens.
    query_positions: Vec<usize>,
}

/// Exported encoder-decoder model plus tokenizer.
pub struct OnnxModel {
    dir: PathBuf,
    manifest: ExportManifest,
    tokenizer: Tokenizer,
    encoder: Plan,
    encoder_with_attn: Option<Plan>,
    decoder: Plan,
    lm: Option<CausalLm>,
}

struct CausalLm {
    spec: CausalLmSpec,
    tokenizer: Tokenizer,
    plan: Plan,
}

impl std::fmt::Debug for OnnxModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxModel")
            .field("dir", &self.dir)
            .field("model_name", &self.manifest.model_name)
            .finish_non_exhaustive()
    }
}

impl OnnxModel {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = ExportManifest::load(dir)?;
        let tokenizer = load_tokenizer(&dir.join(&manifest.files.tokenizer))?;
        let enc_path = dir.join(&manifest.files.encoder);
        let encoder = load_plan(&enc_path, std::slice::from_ref(&manifest.hidden_state_output))?;
        let encoder_with_attn = if manifest.self_attention_outputs.is_empty() {
            None
        } else {
            let mut outs = vec![manifest.hidden_state_output.clone()];
            outs.extend(manifest.self_attention_outputs.iter().cloned());
            Some(load_plan(&enc_path, &outs)?)
        };
        let decoder = load_plan(
            &dir.join(&manifest.files.decoder),
            &manifest.cross_attention_outputs,
        )?;
        let lm = match &manifest.causal_lm {
            Some(spec) => Some(CausalLm {
                tokenizer: load_tokenizer(&dir.join(&spec.tokenizer))?,
                plan: load_plan(&dir.join(&spec.file), std::slice::from_ref(&spec.logits_output))?,
                spec: spec.clone(),
            }),
            None => None,
        };
        log::info!("loaded model {} from {}", manifest.model_name, dir.display());
        Ok(OnnxModel {
            dir: dir.to_path_buf(),
            manifest,
            tokenizer,
            encoder,
            encoder_with_attn,
            decoder,
            lm,
        })
    }

    pub fn manifest(&self) -> &ExportManifest {
        &self.manifest
    }

    /// Non-special tokens of `text`, with byte offsets.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("cannot tokenize empty text".into()));
        }
        let enc = self.tokenizer.encode(text, false).map_err(infer_err)?;
        Ok(spans_of(&enc))
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        self.tokenizer.decode(ids, true).map_err(infer_err)
    }

    fn encode_input(&self, req: &AttentionRequest<'_>) -> Result<EncodedInput> {
        req.validate()?;
        let joined = format!("{}{CONTEXT_QUERY_SEPARATOR}{}", req.context, req.query);
        let enc = self.tokenizer.encode(joined.as_str(), true).map_err(infer_err)?;
        let ids = enc.get_ids().to_vec();
        if ids.len() > self.manifest.max_length {
            return Err(Error::WindowOverflow {
                tokens: ids.len(),
                limit: self.manifest.max_length,
            });
        }
        let boundary = req.context.len();
        let mut context_positions = Vec::new();
        let mut context_spans = Vec::new();
        let mut query_positions = Vec::new();
        for (pos, (&(start, end), &special)) in enc
            .get_offsets()
            .iter()
            .zip(enc.get_special_tokens_mask())
            .enumerate()
        {
            if special == 1 {
                continue;
            }
            if start < boundary {
                context_spans.push(TokenSpan::new(
                    context_spans.len(),
                    ids[pos],
                    start,
                    end.min(boundary),
                ));
                context_positions.push(pos);
            } else {
                query_positions.push(pos);
            }
        }
        if context_positions.is_empty() {
            return Err(Error::Inference("context produced no tokens".into()));
        }
        Ok(EncodedInput {
            ids,
            context_positions,
            context_spans,
            query_positions,
        })
    }

    fn run_encoder(&self, plan: &Plan, ids: &[u32]) -> Result<TVec<TValue>> {
        let mask = vec![1u32; ids.len()];
        plan.run(tvec![ids_tensor(ids)?, ids_tensor(&mask)?])
            .map_err(infer_err)
    }

    /// Mean cross-attention over selected layers, all heads and the given
    /// decoder steps, indexed by encoder position.
    fn cross_attention(
        &self,
        input: &EncodedInput,
        decoder_ids: &[u32],
        layers: &LayerSelect,
    ) -> Result<Vec<f64>> {
        let layer_ix = layers.resolve(self.manifest.layer_count)?;
        let hidden = self
            .run_encoder(&self.encoder, &input.ids)?
            .remove(0);
        let mask = vec![1u32; input.ids.len()];
        let outputs = self
            .decoder
            .run(tvec![ids_tensor(decoder_ids)?, hidden, ids_tensor(&mask)?])
            .map_err(infer_err)?;
        let seq = input.ids.len();
        let mut acc = vec![0f64; seq];
        let mut count = 0usize;
        for &l in &layer_ix {
            let name = &self.manifest.cross_attention_outputs[l];
            let a = attention(&outputs[l], name)?;
            let (_, heads, steps, keys) = a.dim();
            if keys != seq || steps != decoder_ids.len() {
                return Err(Error::Inference(format!(
                    "{name}: expected {} steps over {seq} keys, got {steps} x {keys}",
                    decoder_ids.len()
                )));
            }
            for h in 0..heads {
                for t in 0..steps {
                    for (k, slot) in acc.iter_mut().enumerate() {
                        *slot += f64::from(a[[0, h, t, k]]);
                    }
                    count += 1;
                }
            }
        }
        Ok(acc.into_iter().map(|v| v / count as f64).collect())
    }

    pub fn score_cross_first(
        &self,
        req: &AttentionRequest<'_>,
        layers: &LayerSelect,
    ) -> Result<RawScoreVector> {
        let input = self.encode_input(req)?;
        let full = self.cross_attention(&input, &[self.manifest.start_token_id], layers)?;
        restrict(full, input)
    }

    /// Teacher-forced: the decoder sees the start token followed by the gold
    /// answer tokens; one step per answer token.
    pub fn score_cross_total(
        &self,
        req: &AttentionRequest<'_>,
        layers: &LayerSelect,
    ) -> Result<RawScoreVector> {
        let target = req
            .target
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| Error::InvalidInput("cross-total scoring needs a non-empty target".into()))?;
        let target_ids = self.tokenizer.encode(target, false).map_err(infer_err)?;
        let target_ids = target_ids.get_ids();
        if target_ids.is_empty() {
            return Err(Error::InvalidInput("target produced no tokens".into()));
        }
        let mut decoder_ids = vec![self.manifest.start_token_id];
        decoder_ids.extend_from_slice(&target_ids[..target_ids.len() - 1]);
        let input = self.encode_input(req)?;
        let full = self.cross_attention(&input, &decoder_ids, layers)?;
        restrict(full, input)
    }

    /// Attention mass each context token receives from the query tokens,
    /// averaged over the selected encoder layers and all heads.
    pub fn score_self_attention(
        &self,
        req: &AttentionRequest<'_>,
        layers: &LayerSelect,
    ) -> Result<RawScoreVector> {
        let plan = self.encoder_with_attn.as_ref().ok_or_else(|| {
            Error::ScorerNotConfigured(format!(
                "{} exports no encoder self-attention outputs",
                self.dir.display()
            ))
        })?;
        let names = &self.manifest.self_attention_outputs;
        let layer_ix = layers.resolve(names.len())?;
        let input = self.encode_input(req)?;
        let outputs = self.run_encoder(plan, &input.ids)?;
        let seq = input.ids.len();
        let mut acc = vec![0f64; seq];
        let mut count = 0usize;
        for &l in &layer_ix {
            let a = attention(&outputs[l + 1], &names[l])?;
            let (_, heads, rows, keys) = a.dim();
            if rows != seq || keys != seq {
                return Err(Error::Inference(format!(
                    "{}: expected {seq} x {seq} attention, got {rows} x {keys}",
                    names[l]
                )));
            }
            for h in 0..heads {
                for &q in &input.query_positions {
                    for (k, slot) in acc.iter_mut().enumerate() {
                        *slot += f64::from(a[[0, h, q, k]]);
                    }
                }
                count += 1;
            }
        }
        let full = acc.into_iter().map(|v| v / count as f64).collect();
        restrict(full, input)
    }

    /// Surprisal `-log2 p(x_i | x_<i)` of each context token under the
    /// causal LM; the query is ignored.
    pub fn score_self_information(&self, req: &AttentionRequest<'_>) -> Result<RawScoreVector> {
        req.validate()?;
        let lm = self.lm.as_ref().ok_or_else(|| {
            Error::ScorerNotConfigured(format!(
                "{} has no causal_lm entry in its manifest",
                self.dir.display()
            ))
        })?;
        let enc = lm.tokenizer.encode(req.context, false).map_err(infer_err)?;
        let spans = spans_of(&enc);
        let ids: Vec<u32> = spans.iter().map(|t| t.token_id).collect();
        if ids.len() + 1 > lm.spec.max_length {
            return Err(Error::WindowOverflow {
                tokens: ids.len() + 1,
                limit: lm.spec.max_length,
            });
        }
        let mut input = vec![lm.spec.bos_token_id];
        input.extend_from_slice(&ids);
        let out = lm.plan.run(tvec![ids_tensor(&input)?]).map_err(infer_err)?;
        let logits = out[0].to_plain_array_view::<f32>().map_err(infer_err)?;
        let logits = logits
            .into_dimensionality::<tract_ndarray::Ix3>()
            .map_err(|_| Error::Inference("logits must be [1, S, V]".into()))?;
        let mut scores = Vec::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            let row = logits.slice(tract_ndarray::s![0, i, ..]);
            let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
            let log_z = max + row.iter().map(|&v| (f64::from(v) - max).exp()).sum::<f64>().ln();
            let log_p = f64::from(row[id as usize]) - log_z;
            // -log2 p computed from log p directly to keep precision for tiny p
            scores.push(-log_p / std::f64::consts::LN_2);
        }
        RawScoreVector::new(scores, spans)
    }
}

fn spans_of(enc: &tokenizers::Encoding) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    for ((&id, &off), &special) in enc
        .get_ids()
        .iter()
        .zip(enc.get_offsets())
        .zip(enc.get_special_tokens_mask())
    {
        if special == 0 {
            out.push(TokenSpan::new(out.len(), id, off.0, off.1));
        }
    }
    out
}

fn restrict(full: Vec<f64>, input: EncodedInput) -> Result<RawScoreVector> {
    let scores = input.context_positions.iter().map(|&p| full[p]).collect();
    RawScoreVector::new(scores, input.context_spans)
}

/// One scoring method of a shared [`OnnxModel`].
#[derive(Debug, Clone)]
pub struct OnnxScorer {
    model: Arc<OnnxModel>,
    kind: ScorerKind,
}

impl OnnxScorer {
    pub fn new(model: Arc<OnnxModel>, kind: ScorerKind) -> Result<Self> {
        match kind {
            ScorerKind::CrossAttnFirst
            | ScorerKind::CrossAttnTotal
            | ScorerKind::SelfAttention
            | ScorerKind::SelfInformation => Ok(OnnxScorer { model, kind }),
            other => Err(Error::InvalidInput(format!(
                "{} is not a model-backed scorer",
                other.label()
            ))),
        }
    }

    pub fn model(&self) -> &OnnxModel {
        &self.model
    }
}

impl Scorer for OnnxScorer {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        if self.kind == ScorerKind::SelfInformation {
            if let Some(lm) = &self.model.lm {
                let enc = lm.tokenizer.encode(text, false).map_err(infer_err)?;
                return Ok(spans_of(&enc));
            }
        }
        self.model.tokenize(text)
    }

    fn score(&self, req: &AttentionRequest<'_>, layers: &LayerSelect) -> Result<RawScoreVector> {
        match self.kind {
            ScorerKind::CrossAttnFirst => self.model.score_cross_first(req, layers),
            ScorerKind::CrossAttnTotal => self.model.score_cross_total(req, layers),
            ScorerKind::SelfAttention => self.model.score_self_attention(req, layers),
            ScorerKind::SelfInformation => self.model.score_self_information(req),
            _ => unreachable!("checked in OnnxScorer::new"),
        }
    }

    fn name(&self) -> String {
        format!("{}@{}", self.kind.label(), self.model.manifest.model_name)
    }

    fn input_format(&self) -> String {
        match self.kind {
            ScorerKind::SelfInformation => "context only, BOS-prefixed".into(),
            _ => format!(
                "tokenizer(context + {CONTEXT_QUERY_SEPARATOR:?} + query) with special tokens; decoder starts at id {}",
                self.model.manifest.start_token_id
            ),
        }
    }
}

/// Names declared in the manifest that are missing from the graph outputs.
pub(crate) fn check_graph_outputs(dir: &Path, manifest: &ExportManifest) -> Vec<String> {
    let mut problems = Vec::new();
    let mut check = |file: &str, wanted: Vec<&String>| {
        let path = dir.join(file);
        match tract_onnx::onnx().proto_model_for_path(&path) {
            Ok(proto) => {
                let outputs: Vec<String> = proto
                    .graph
                    .map(|g| g.output.into_iter().map(|o| o.name).collect())
                    .unwrap_or_default();
                for name in wanted {
                    if !outputs.contains(name) {
                        problems.push(format!("{file}: output {name:?} not found"));
                    }
                }
            }
            Err(e) => problems.push(format!("{file}: cannot load graph: {e}")),
        }
    };
    let mut enc_names = vec![&manifest.hidden_state_output];
    enc_names.extend(manifest.self_attention_outputs.iter());
    check(&manifest.files.encoder, enc_names);
    check(&manifest.files.decoder, manifest.cross_attention_outputs.iter().collect());
    if let Some(lm) = &manifest.causal_lm {
        check(&lm.file, vec![&lm.logits_output]);
    }
    problems
}
