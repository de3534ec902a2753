//! Dataset and scenario files.
//!
//! Datasets are CSV with a required header `label,y,n,pi0[,weight]` (UTF-8,
//! `#` comment lines ignored) or a JSON array of objects with the same
//! field names. Scenarios are JSON: a single scenario object or an array.

use std::fs;
use std::path::{Path, PathBuf};

use basket_core::{Basket, BasketTable, ScenarioSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}{}: {message}", origin, line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        origin: String,
        line: Option<u64>,
        message: String,
    },
    #[error("{}{}: {source}", origin, line.map(|l| format!(":{l}")).unwrap_or_default())]
    Invalid {
        origin: String,
        line: Option<u64>,
        source: basket_core::Error,
    },
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    label: String,
    y: u64,
    n: u64,
    pi0: f64,
    #[serde(default)]
    weight: Option<f64>,
}

const REQUIRED: [&str; 4] = ["label", "y", "n", "pi0"];

/// Parses CSV text. `origin` names the source in error messages.
pub fn parse_table_csv(text: &str, origin: &str) -> Result<BasketTable, IoError> {
    let parse = |line: Option<u64>, message: String| IoError::Parse {
        origin: origin.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse(e.position().map(|p| p.line()), e.to_string()))?
        .clone();
    let header_line = reader.position().line().max(1);
    if headers.iter().all(|h| h.is_empty()) {
        return Err(IoError::Invalid {
            origin: origin.to_string(),
            line: None,
            source: basket_core::Error::EmptyTable,
        });
    }
    for name in REQUIRED {
        if !headers.iter().any(|h| h == name) {
            return Err(parse(
                Some(header_line),
                format!("header must contain `label,y,n,pi0[,weight]`; missing `{name}`"),
            ));
        }
    }
    if let Some(extra) = headers
        .iter()
        .find(|h| !REQUIRED.contains(h) && *h != "weight")
    {
        return Err(parse(
            Some(header_line),
            format!("unknown column `{extra}`"),
        ));
    }

    let mut baskets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse(e.position().map(|p| p.line()), e.to_string()))?;
        let line = record.position().map(|p| p.line());
        let row: CsvRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse(line, csv_field_message(&e, &headers)))?;
        let mut basket = Basket::new(row.label, row.y, row.n, row.pi0);
        basket.weight = row.weight;
        // Validate the row on its own so errors carry its line number.
        BasketTable::new(vec![basket.clone()]).map_err(|source| IoError::Invalid {
            origin: origin.to_string(),
            line,
            source,
        })?;
        baskets.push(basket);
    }
    BasketTable::new(baskets).map_err(|source| IoError::Invalid {
        origin: origin.to_string(),
        line: None,
        source,
    })
}

fn csv_field_message(e: &csv::Error, headers: &csv::StringRecord) -> String {
    if let csv::ErrorKind::Deserialize { err, .. } = e.kind() {
        if let Some(field) = err.field().and_then(|i| headers.get(i as usize)) {
            return format!("column `{field}`: {}", err.kind());
        }
        return err.to_string();
    }
    e.to_string()
}

/// Parses a JSON array of basket objects.
pub fn parse_table_json(text: &str, origin: &str) -> Result<BasketTable, IoError> {
    let baskets: Vec<Basket> = serde_json::from_str(text).map_err(|e| IoError::Parse {
        origin: origin.to_string(),
        line: Some(e.line() as u64),
        message: e.to_string(),
    })?;
    BasketTable::new(baskets).map_err(|source| IoError::Invalid {
        origin: origin.to_string(),
        line: None,
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a dataset; `.json` files are parsed as JSON, anything else as CSV.
pub fn read_table(path: &Path) -> Result<BasketTable, IoError> {
    let text = read_text(path)?;
    let origin = path.display().to_string();
    if is_json(path) {
        parse_table_json(&text, &origin)
    } else {
        parse_table_csv(&text, &origin)
    }
}

/// Serializes a table as CSV with the dataset header.
pub fn table_to_csv(table: &BasketTable) -> String {
    let weighted = table.iter().any(|b| b.weight.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label", "y", "n", "pi0"];
    if weighted {
        header.push("weight");
    }
    w.write_record(&header).expect("in-memory write");
    for b in table {
        let mut rec = vec![
            b.label.clone(),
            b.responders.to_string(),
            b.patients.to_string(),
            b.null_rate.to_string(),
        ];
        if weighted {
            rec.push(b.weight.map(|x| x.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

/// Which study a scenario drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Estimation,
    Identification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub study: StudyKind,
    #[serde(flatten)]
    pub spec: ScenarioSpec,
    /// Free-text provenance, ignored by the runners.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Parses scenario JSON and validates every scenario.
pub fn parse_scenarios(text: &str, origin: &str) -> Result<Vec<Scenario>, IoError> {
    // Untagged enums hide field errors, so split arrays by hand.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
        origin: origin.to_string(),
        line: Some(e.line() as u64),
        message: e.to_string(),
    })?;
    let scenarios = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| scenario_from_value(v, &format!("{origin}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?,
        other => vec![scenario_from_value(other, origin)?],
    };
    if scenarios.is_empty() {
        return Err(IoError::Parse {
            origin: origin.to_string(),
            line: None,
            message: "no scenarios".into(),
        });
    }
    Ok(scenarios)
}

fn scenario_from_value(v: serde_json::Value, origin: &str) -> Result<Scenario, IoError> {
    let s: Scenario = serde_json::from_value(v).map_err(|e| IoError::Parse {
        origin: origin.to_string(),
        line: None,
        message: e.to_string(),
    })?;
    s.spec.validate().map_err(|source| IoError::Invalid {
        origin: format!("{origin} ({})", s.spec.label),
        line: None,
        source,
    })?;
    Ok(s)
}

pub fn read_scenarios(path: &Path) -> Result<Vec<Scenario>, IoError> {
    let text = read_text(path)?;
    parse_scenarios(&text, &path.display().to_string())
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    let wrap = |source| IoError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    fs::write(path, contents).map_err(wrap)
}
