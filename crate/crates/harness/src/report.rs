//! Risk reports and their CSV / JSON encodings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};
use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Column order of the CSV encoding.
pub const COLUMNS: [&str; 15] = [
    "d",
    "n",
    "k",
    "m",
    "spectrum_id",
    "K",
    "exact_risk",
    "mc_risk",
    "mc_stderr",
    "lemma4_bound",
    "thm2_floor",
    "contraction_prob",
    "radius",
    "slope",
    "seed",
];

/// Tolerance of the row-wise bound checks.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub d: u32,
    pub n: f64,
    pub k: u64,
    pub m: u64,
    pub spectrum_id: String,
    /// Truncation level: number of basis functions.
    #[serde(rename = "K")]
    pub basis_len: u64,
    pub exact_risk: f64,
    pub mc_risk: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub lemma4_bound: f64,
    /// Absent for rows whose truth is not a member of the adversarial family.
    pub thm2_floor: Option<f64>,
    pub contraction_prob: Option<f64>,
    pub radius: Option<f64>,
    pub slope: Option<f64>,
    pub seed: u64,
    /// Mode-specific diagnostics. JSON only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl RiskRow {
    /// Whether the row claims the classical theorem floor: it is only
    /// asserted from `n >= 2 (d+2)!` on.
    pub fn floor_applies(&self) -> bool {
        gplb_core::adversarial::floor_sample_size(self.d).is_ok_and(|t| self.n >= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    /// Resolved config, seed included.
    pub config: ExperimentConfig,
    pub rows: Vec<RiskRow>,
}

/// A row that breaks a bound-below-risk invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub row: usize,
    pub column: &'static str,
    pub bound: f64,
    pub risk: f64,
}

impl RiskReport {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            rows: Vec::new(),
        }
    }

    /// Rows where `lemma4_bound` or (from the floor threshold on)
    /// `thm2_floor` exceeds `exact_risk` by more than [`BOUND_TOLERANCE`].
    pub fn bound_violations(&self) -> Vec<BoundViolation> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if row.lemma4_bound > row.exact_risk + BOUND_TOLERANCE {
                out.push(BoundViolation {
                    row: i,
                    column: "lemma4_bound",
                    bound: row.lemma4_bound,
                    risk: row.exact_risk,
                });
            }
            let floor = row.thm2_floor.filter(|_| row.floor_applies());
            if let Some(floor) = floor.filter(|f| *f > row.exact_risk + BOUND_TOLERANCE) {
                out.push(BoundViolation {
                    row: i,
                    column: "thm2_floor",
                    bound: floor,
                    risk: row.exact_risk,
                });
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| HarnessError::Malformed(e.to_string());
        w.write_record(COLUMNS).map_err(map)?;
        for row in &self.rows {
            let fields = [
                row.d.to_string(),
                fmt_f64(row.n),
                row.k.to_string(),
                row.m.to_string(),
                row.spectrum_id.clone(),
                row.basis_len.to_string(),
                fmt_f64(row.exact_risk),
                fmt_opt(row.mc_risk),
                fmt_opt(row.mc_stderr),
                fmt_f64(row.lemma4_bound),
                fmt_opt(row.thm2_floor),
                fmt_opt(row.contraction_prob),
                fmt_opt(row.radius),
                fmt_opt(row.slope),
                row.seed.to_string(),
            ];
            w.write_record(&fields).map_err(map)?;
        }
        w.flush().map_err(|e| HarnessError::Malformed(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Parses rows written by [`RiskReport::write_csv`]. Extras are not
    /// part of the CSV and come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<RiskRow>> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| HarnessError::Malformed(e.to_string()))?;
        if header.iter().ne(COLUMNS.iter().copied()) {
            return Err(HarnessError::Malformed(format!(
                "unexpected CSV header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut rows = Vec::new();
        for (line, record) in r.records().enumerate() {
            let rec = record.map_err(|e| HarnessError::Malformed(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let ctx = |i: usize| format!("row {}, column {}", line + 1, COLUMNS[i]);
            rows.push(RiskRow {
                d: parse_int(field(0), || ctx(0))?,
                n: parse_f64(field(1), || ctx(1))?,
                k: parse_int(field(2), || ctx(2))?,
                m: parse_int(field(3), || ctx(3))?,
                spectrum_id: field(4).to_owned(),
                basis_len: parse_int(field(5), || ctx(5))?,
                exact_risk: parse_f64(field(6), || ctx(6))?,
                mc_risk: parse_opt(field(7), || ctx(7))?,
                mc_stderr: parse_opt(field(8), || ctx(8))?,
                lemma4_bound: parse_f64(field(9), || ctx(9))?,
                thm2_floor: parse_opt(field(10), || ctx(10))?,
                contraction_prob: parse_opt(field(11), || ctx(11))?,
                radius: parse_opt(field(12), || ctx(12))?,
                slope: parse_opt(field(13), || ctx(13))?,
                seed: parse_int(field(14), || ctx(14))?,
                extras: BTreeMap::new(),
            });
        }
        Ok(rows)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let doc = JsonDocument {
            schema_version: SCHEMA_VERSION,
            config: self.config.clone(),
            rows: self.rows.clone(),
        };
        serde_json::to_writer_pretty(out, &doc).map_err(|e| HarnessError::Malformed(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_reader(input).map_err(|e| HarnessError::Malformed(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| HarnessError::Malformed("missing schema_version".into()))?;
        if found != SCHEMA_VERSION {
            return Err(HarnessError::SchemaVersion {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let doc: JsonDocument = serde_json::from_value(value).map_err(|e| HarnessError::Malformed(e.to_string()))?;
        Ok(Self {
            config: doc.config,
            rows: doc.rows,
        })
    }

    /// Writes the report to `path`. CSV output gets a `<path>.config.toml`
    /// sidecar holding the resolved config, since the CSV schema has no
    /// room for it.
    pub fn emit(&self, path: &Path, format: Format) -> Result<()> {
        match format {
            Format::Csv => {
                write_file(path, |w| self.write_csv(w))?;
                let sidecar = sidecar_path(path);
                std::fs::write(&sidecar, self.config.to_toml_string()).map_err(|e| HarnessError::io(sidecar, e))
            }
            Format::Json => write_file(path, |w| self.write_json(w)),
        }
    }

    pub fn write_to<W: Write>(&self, out: W, format: Format) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.toml");
    PathBuf::from(name)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| match e {
        HarnessError::Malformed(msg) => HarnessError::io(path, std::io::Error::other(msg)),
        other => other,
    })?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    schema_version: u64,
    config: ExperimentConfig,
    rows: Vec<RiskRow>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str, ctx: impl Fn() -> String) -> Result<f64> {
    s.parse()
        .map_err(|_| HarnessError::Malformed(format!("{}: not a number: {s:?}", ctx())))
}

fn parse_opt(s: &str, ctx: impl Fn() -> String) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, ctx).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(s: &str, ctx: impl Fn() -> String) -> Result<T> {
    s.parse()
        .map_err(|_| HarnessError::Malformed(format!("{}: not an integer: {s:?}", ctx())))
}
