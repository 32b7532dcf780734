//! Line-delimited JSON datasets and result files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{CompressionResult, QaRecord};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, MrrTable, SweepReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Keys under which a dataset line stores each record field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answers: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            context: "context".into(),
            question: "question".into(),
            answers: "answers".into(),
        }
    }
}

impl FieldMap {
    /// Applies `name=key` overrides, e.g. `question=query`.
    pub fn with_override(mut self, spec: &str) -> Result<Self> {
        let (field, key) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("field map entry {spec:?} is not name=key")))?;
        let slot = match field.trim() {
            "id" => &mut self.id,
            "context" => &mut self.context,
            "question" => &mut self.question,
            "answers" => &mut self.answers,
            other => return Err(Error::InvalidInput(format!("unknown record field {other:?}"))),
        };
        *slot = key.trim().to_string();
        Ok(self)
    }

    /// Extracts a record from one parsed line. `line` numbers missing ids.
    pub fn record_from(&self, value: &Value, line: usize) -> std::result::Result<QaRecord, String> {
        let obj = value.as_object().ok_or("line is not a JSON object")?;
        let text = |key: &str| -> std::result::Result<String, String> {
            match obj.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(format!("field {key:?} is not a string")),
                None => Err(format!("missing field {key:?}")),
            }
        };
        let id = match obj.get(&self.id) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            None => line.to_string(),
            Some(_) => return Err(format!("field {:?} is not a string or number", self.id)),
        };
        let answers = match obj.get(&self.answers) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| format!("field {:?} must hold strings", self.answers))?,
            Some(_) => return Err(format!("field {:?} must be a string or list", self.answers)),
        };
        let record = QaRecord {
            id,
            context: text(&self.context)?,
            query: text(&self.question)?,
            answers,
        };
        record.validate().map_err(|e| e.to_string())?;
        Ok(record)
    }
}

/// A dataset line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Streaming reader over a JSONL dataset.
///
/// Lenient mode skips malformed lines and remembers them; strict mode yields
/// the first one as an error and stops.
pub struct RecordStream<R> {
    path: PathBuf,
    reader: R,
    fields: FieldMap,
    strict: bool,
    line: usize,
    buf: Vec<u8>,
    rejected: Vec<Rejection>,
    done: bool,
}

impl<R: BufRead> RecordStream<R> {
    pub fn from_reader(reader: R, path: impl Into<PathBuf>, fields: FieldMap, strict: bool) -> Self {
        RecordStream {
            path: path.into(),
            reader,
            fields,
            strict,
            line: 0,
            buf: Vec::new(),
            rejected: Vec::new(),
            done: false,
        }
    }

    pub fn rejected(&self) -> &[Rejection] {
        &self.rejected
    }
}

impl<R: BufRead> Iterator for RecordStream<R> {
    type Item = Result<QaRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line += 1;
                    let parsed = match std::str::from_utf8(&self.buf) {
                        Ok(text) if text.trim().is_empty() => continue,
                        Ok(text) => serde_json::from_str::<Value>(text.trim())
                            .map_err(|e| e.to_string())
                            .and_then(|v| self.fields.record_from(&v, self.line)),
                        Err(e) => Err(format!("line is not valid UTF-8: {e}")),
                    };
                    match parsed {
                        Ok(r) => return Some(Ok(r)),
                        Err(reason) if self.strict => {
                            self.done = true;
                            return Some(Err(Error::MalformedLine {
                                path: self.path.clone(),
                                line: self.line,
                                reason,
                            }));
                        }
                        Err(reason) => {
                            log::warn!("{}:{}: skipped: {reason}", self.path.display(), self.line);
                            self.rejected.push(Rejection {
                                line: self.line,
                                reason,
                            });
                        }
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            }
        }
        None
    }
}

pub fn load_jsonl(
    path: impl AsRef<Path>,
    fields: FieldMap,
    strict: bool,
) -> Result<RecordStream<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(RecordStream::from_reader(BufReader::new(file), path, fields, strict))
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputRecord {
    CompressionResult(CompressionResult),
    EvalReport(EvalReport),
    MrrTable(MrrTable),
    SweepReport(SweepReport),
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    inner: T,
}

/// Writes one versioned JSON object per line and returns the count.
pub fn write_results<W: Write>(out: W, results: impl IntoIterator<Item = OutputRecord>) -> Result<usize> {
    let mut out = BufWriter::new(out);
    let mut written = 0usize;
    for item in results {
        let line = serde_json::to_string(&Versioned {
            schema_version: SCHEMA_VERSION,
            inner: item,
        })?;
        writeln!(out, "{line}").map_err(|source| Error::PartialWrite { written, source })?;
        written += 1;
    }
    out.flush().map_err(|source| Error::PartialWrite { written, source })?;
    Ok(written)
}

pub fn write_results_file(path: impl AsRef<Path>, results: impl IntoIterator<Item = OutputRecord>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(file, results)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<OutputRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Versioned<OutputRecord> = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("unsupported schema_version {}", v.schema_version),
            });
        }
        out.push(v.inner);
    }
    Ok(out)
}

pub fn write_mrr_csv(table: &MrrTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let res: csv::Result<()> = (|| {
        w.write_record(["scorer", "mean_mrr", "n_records", "error"])?;
        for r in &table.rows {
            w.write_record([
                r.scorer.clone(),
                format!("{:.6}", r.mean_mrr),
                r.n_records.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e.into()))
}

pub fn write_sweep_csv(report: &SweepReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let res: csv::Result<()> = (|| {
        w.write_record(["sigma", "coverage", "overlap_with_first"])?;
        for r in &report.rows {
            w.write_record([
                r.sigma.to_string(),
                format!("{:.6}", r.coverage),
                format!("{:.6}", r.overlap_with_first),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e.into()))
}
