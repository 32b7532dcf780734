//! Client for an external answer-generation endpoint, used to measure exact
//! match on compressed contexts.
//!
//! Wire format: `POST <base_url>` with body `{"model", "prompt", "max_tokens"}`;
//! the response must be JSON with a string at `text_path` (dot separated,
//! numeric segments index arrays, e.g. `choices.0.text`).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{CompressionConfig, QaRecord};
use crate::eval::{exact_match, EvalReport, Exclusion, Metric, EM_NORMALIZATION};
use crate::pipeline::compress;
use crate::scorer::Scorer;

/// Environment variable holding the bearer token, if any.
pub const TOKEN_ENV: &str = "CROSSPRUNE_ENDPOINT_TOKEN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("prompt template: {0}")]
    Template(String),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("connection failed after {attempts} attempts: {message}")]
    Connection { attempts: u32, message: String },
    #[error("endpoint returned HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: missing string field {field:?}")]
    Malformed { field: String },
}

impl LlmError {
    fn is_transient(&self) -> bool {
        match self {
            LlmError::Timeout { .. } | LlmError::Connection { .. } => true,
            LlmError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub timeout_secs: f64,
    pub max_output_tokens: u32,
    /// Must contain `{context}` and `{question}` exactly once each.
    pub prompt_template: String,
    pub text_path: String,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    /// Requests in flight at once.
    pub concurrency: usize,
    #[serde(skip)]
    pub bearer_token: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: "default".into(),
            timeout_secs: 60.0,
            max_output_tokens: 32,
            prompt_template: "Answer the question based on the context.\n\nContext: {context}\n\nQuestion: {question}\n\nAnswer:".into(),
            text_path: "text".into(),
            max_attempts: 3,
            backoff_ms: 200,
            concurrency: 4,
            bearer_token: None,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        for ph in ["{context}", "{question}"] {
            let n = self.prompt_template.matches(ph).count();
            if n != 1 {
                return Err(LlmError::Template(format!("{ph} appears {n} times, expected once")));
            }
        }
        Ok(())
    }

    /// Fills the template in one pass, so placeholder-like text inside the
    /// context is never substituted.
    pub fn render(&self, context: &str, question: &str) -> Result<String, LlmError> {
        self.validate()?;
        let t = &self.prompt_template;
        let c = t.find("{context}").unwrap();
        let q = t.find("{question}").unwrap();
        let mut parts = [(c, "{context}".len(), context), (q, "{question}".len(), question)];
        parts.sort_by_key(|p| p.0);
        let mut out = String::with_capacity(t.len() + context.len() + question.len());
        let mut at = 0;
        for (pos, len, value) in parts {
            out.push_str(&t[at..pos]);
            out.push_str(value);
            at = pos + len;
        }
        out.push_str(&t[at..]);
        Ok(out)
    }

    pub fn request_body(&self, context: &str, question: &str) -> Result<Value, LlmError> {
        Ok(json!({
            "model": self.model_name,
            "prompt": self.render(context, question)?,
            "max_tokens": self.max_output_tokens,
        }))
    }
}

/// Looks up a dot path such as `choices.0.text`.
pub fn extract_text<'a>(value: &'a Value, path: &str) -> Option<&'a str> {
    let mut cur = value;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        cur = match cur {
            Value::Object(m) => m.get(seg)?,
            Value::Array(a) => a.get(seg.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    cur.as_str()
}

pub struct LlmClient {
    agent: ureq::Agent,
    cfg: EndpointConfig,
}

impl LlmClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LlmClient { agent, cfg })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// Sends one question; retries transient failures with exponential backoff.
    pub fn answer(&self, context: &str, question: &str) -> Result<String, LlmError> {
        let body = self.cfg.request_body(context, question)?;
        self.post(&body)
    }

    pub fn post(&self, body: &Value) -> Result<String, LlmError> {
        log::debug!("request body: {body}");
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            match self.post_once(body, attempt) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < attempts => {
                    let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1));
                    log::warn!("attempt {attempt} failed ({e}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn post_once(&self, body: &Value, attempt: u32) -> Result<String, LlmError> {
        let mut req = self.agent.post(&self.cfg.base_url);
        if let Some(token) = &self.cfg.bearer_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::Timeout { attempts: attempt },
            other => LlmError::Connection {
                attempts: attempt,
                message: other.to_string(),
            },
        })?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::Timeout { attempts: attempt },
            other => LlmError::Connection {
                attempts: attempt,
                message: other.to_string(),
            },
        })?;
        if !(200..300).contains(&code) {
            return Err(LlmError::Status { code, body: text });
        }
        let value: Value = serde_json::from_str(&text).map_err(|_| LlmError::Malformed {
            field: self.cfg.text_path.clone(),
        })?;
        extract_text(&value, &self.cfg.text_path)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| LlmError::Malformed {
                field: self.cfg.text_path.clone(),
            })
    }
}

/// Exact-match report plus the request log for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamReport {
    pub report: EvalReport,
    pub predictions: Vec<String>,
    /// Request bodies in record order; `null` where compression failed.
    pub requests: Vec<Value>,
}

/// Compresses every record, asks the endpoint, and scores exact match.
///
/// A record whose compression or request fails scores 0 and is listed in
/// `report.excluded` with the reason; `report.failures` counts them.
pub fn evaluate_downstream(
    dataset_id: &str,
    records: &[QaRecord],
    cfg: &CompressionConfig,
    client: &LlmClient,
    scorer: &dyn Scorer,
) -> DownstreamReport {
    let mut requests = Vec::with_capacity(records.len());
    let mut errors: Vec<Option<String>> = Vec::with_capacity(records.len());
    for r in records {
        match compress(r, cfg, scorer)
            .map_err(|e| e.to_string())
            .and_then(|c| client.cfg.request_body(&c.compressed_text, &r.query).map_err(|e| e.to_string()))
        {
            Ok(body) => {
                requests.push(body);
                errors.push(None);
            }
            Err(e) => {
                requests.push(Value::Null);
                errors.push(Some(e));
            }
        }
    }

    let slots: Vec<Mutex<Option<Result<String, LlmError>>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = client.cfg.concurrency.clamp(1, records.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= records.len() {
                    break;
                }
                if errors[i].is_some() {
                    continue;
                }
                let outcome = client.post(&requests[i]);
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut report = EvalReport::new(dataset_id, Metric::Em, format!("downstream tau={}", cfg.tau))
        .with_config(cfg);
    report.normalization = EM_NORMALIZATION.into();
    let mut predictions = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let outcome = slots[i].lock().unwrap().take();
        let (pred, failure) = match (&errors[i], outcome) {
            (Some(e), _) => (String::new(), Some(e.clone())),
            (None, Some(Ok(text))) => (text, None),
            (None, Some(Err(e))) => (String::new(), Some(e.to_string())),
            (None, None) => (String::new(), Some("request never ran".to_string())),
        };
        let score = if failure.is_some() || r.answers.is_empty() {
            0.0
        } else {
            exact_match(&pred, &r.answers)
        };
        if let Some(reason) = failure {
            log::warn!("record {}: {reason}", r.id);
            report.failures += 1;
            report.excluded.push(Exclusion {
                id: r.id.clone(),
                reason,
            });
        }
        report.push(r.id.clone(), score);
        predictions.push(pred);
    }
    DownstreamReport {
        report,
        predictions,
        requests,
    }
}

/// One downstream run per config (e.g. tau = 1.0 and tau = 0.5); the reports
/// share the dataset id and differ in label.
pub fn compare_downstream(
    dataset_id: &str,
    records: &[QaRecord],
    cfgs: &[CompressionConfig],
    client: &LlmClient,
    scorer: &dyn Scorer,
) -> Vec<DownstreamReport> {
    cfgs.iter()
        .map(|c| evaluate_downstream(dataset_id, records, c, client, scorer))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_placeholders_exactly_once() {
        let mut cfg = EndpointConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.prompt_template = "{context} {context} {question}".into();
        assert!(cfg.validate().is_err());
        cfg.prompt_template = "{context}".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn render_is_single_pass() {
        let cfg = EndpointConfig {
            prompt_template: "Q: {question} C: {context}".into(),
            ..Default::default()
        };
        assert_eq!(cfg.render("has {question} inside", "why").unwrap(), "Q: why C: has {question} inside");
    }

    #[test]
    fn dot_path_lookup() {
        let v = json!({"choices": [{"text": " hi "}], "text": "top"});
        assert_eq!(extract_text(&v, "choices.0.text"), Some(" hi "));
        assert_eq!(extract_text(&v, "text"), Some("top"));
        assert_eq!(extract_text(&v, "choices.1.text"), None);
        assert_eq!(extract_text(&v, "choices"), None);
    }

    #[test]
    fn transient_classification() {
        assert!(LlmError::Timeout { attempts: 1 }.is_transient());
        assert!(LlmError::Status { code: 503, body: String::new() }.is_transient());
        assert!(LlmError::Status { code: 429, body: String::new() }.is_transient());
        assert!(!LlmError::Status { code: 400, body: String::new() }.is_transient());
        assert!(!LlmError::Malformed { field: "text".into() }.is_transient());
    }
}
