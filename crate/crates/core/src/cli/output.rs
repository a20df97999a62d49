use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::MetricReport;
use crate::montecarlo::{EmpiricalTransition, SimReport};

pub const TOOL_NAME: &str = "pnopt";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Embedded in every output: enough to rerun the command that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The fully resolved arguments, defaults included.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config,
            seed,
        }
    }

    /// Single-line CSV comment carrying the provenance JSON.
    pub fn csv_comment(&self) -> String {
        format!(
            "# provenance: {}\n",
            serde_json::to_string(self).expect("provenance serializes")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// A record with a fixed CSV layout.
pub trait Row: Serialize {
    /// Key of the result array in the JSON document.
    const JSON_KEY: &'static str;
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// `eval` and `sweep` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub constellation: String,
    pub m: usize,
    #[serde(flatten)]
    pub report: MetricReport,
}

impl Row for MetricRow {
    const JSON_KEY: &'static str = "results";
    const HEADER: &'static [&'static str] = &[
        "constellation",
        "m",
        "constellation_hash",
        "sigma_p2",
        "eb_n0_db",
        "n0",
        "metric",
        "value",
        "error_estimate",
        "flags",
    ];

    fn record(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            self.constellation.clone(),
            self.m.to_string(),
            r.constellation_hash.clone(),
            num(r.sigma_p2),
            opt(r.eb_n0_db),
            num(r.n0),
            r.metric.clone(),
            num(r.value),
            opt(r.error_estimate),
            r.flags.join(";"),
        ]
    }
}

/// `floor` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorRow {
    pub constellation: String,
    pub m: usize,
    pub constellation_hash: String,
    pub sigma_p2: f64,
    pub form: String,
    pub floor: f64,
}

impl Row for FloorRow {
    const JSON_KEY: &'static str = "floors";
    const HEADER: &'static [&'static str] = &["constellation", "m", "constellation_hash", "sigma_p2", "form", "floor"];

    fn record(&self) -> Vec<String> {
        vec![
            self.constellation.clone(),
            self.m.to_string(),
            self.constellation_hash.clone(),
            num(self.sigma_p2),
            self.form.clone(),
            num(self.floor),
        ]
    }
}

/// `simulate` output. Transition runs report the MI of the empirical matrix
/// as their scalar estimate and carry the matrix in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub constellation: String,
    pub m: usize,
    pub estimator: String,
    pub report: SimReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<EmpiricalTransition>,
}

impl Row for SimRow {
    const JSON_KEY: &'static str = "simulations";
    const HEADER: &'static [&'static str] = &[
        "constellation",
        "m",
        "sigma_p2",
        "eb_n0_db",
        "n0",
        "estimator",
        "kind",
        "estimate",
        "std_error",
        "n_samples",
        "seed",
        "errors",
    ];

    fn record(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            self.constellation.clone(),
            self.m.to_string(),
            num(r.params.sigma_p2),
            opt(r.params.eb_n0_db),
            num(r.params.n0),
            self.estimator.clone(),
            r.kind.clone(),
            num(r.estimate),
            if r.std_error.is_nan() {
                String::new()
            } else {
                num(r.std_error)
            },
            r.n_samples.to_string(),
            r.seed.to_string(),
            r.errors.map(|e| e.to_string()).unwrap_or_default(),
        ]
    }
}

/// Writes records as they arrive.
///
/// CSV rows are flushed one by one. A JSON file is rewritten atomically
/// after each record so that it always parses; JSON on stdout is written
/// once at the end.
pub struct Emitter<R: Row> {
    provenance: Provenance,
    sink: Sink<R>,
}

enum Sink<R> {
    Csv(Box<csv::Writer<Box<dyn Write>>>),
    Json { path: Option<PathBuf>, rows: Vec<R> },
}

impl<R: Row> Emitter<R> {
    pub fn new(provenance: Provenance, format: Format, path: Option<&Path>) -> Result<Self> {
        let sink = match format {
            Format::Csv => {
                let mut out = open(path)?;
                out.write_all(provenance.csv_comment().as_bytes())?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(R::HEADER)?;
                w.flush()?;
                Sink::Csv(Box::new(w))
            }
            Format::Json => Sink::Json {
                path: path.map(Path::to_path_buf),
                rows: Vec::new(),
            },
        };
        let mut e = Emitter { provenance, sink };
        e.checkpoint_json()?;
        Ok(e)
    }

    pub fn push(&mut self, row: R) -> Result<()> {
        match &mut self.sink {
            Sink::Csv(w) => {
                w.write_record(row.record())?;
                w.flush()?;
            }
            Sink::Json { rows, .. } => rows.push(row),
        }
        self.checkpoint_json()
    }

    pub fn finish(self) -> Result<()> {
        match self.sink {
            Sink::Csv(mut w) => w.flush()?,
            Sink::Json { path: None, rows } => {
                let doc = document(&self.provenance, R::JSON_KEY, &rows)?;
                let mut out = io::stdout().lock();
                out.write_all(&doc)?;
                out.flush()?;
            }
            Sink::Json { path: Some(_), .. } => {}
        }
        Ok(())
    }

    fn checkpoint_json(&mut self) -> Result<()> {
        if let Sink::Json { path: Some(path), rows } = &self.sink {
            write_atomic(path, &document(&self.provenance, R::JSON_KEY, rows)?)?;
        }
        Ok(())
    }
}

/// `{"provenance": …, key: value}`, pretty-printed, newline-terminated.
pub fn document<T: Serialize + ?Sized>(provenance: &Provenance, key: &str, value: &T) -> Result<Vec<u8>> {
    let mut doc = serde_json::Map::new();
    doc.insert("provenance".into(), serde_json::to_value(provenance)?);
    doc.insert(key.into(), serde_json::to_value(value)?);
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `bytes` to `path`, or stdout when `path` is `None`.
pub fn emit_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout()),
    })
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
