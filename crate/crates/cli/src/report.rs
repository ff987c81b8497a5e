//! Report envelope, hashing, JSON/CSV emission and structured errors.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ConfigEcho, Format, RunConfig};

/// Exit code for invalid input.
pub const EXIT_INVALID: i32 = 2;
/// Exit code for a failed assertion (example, axiom or cross-oracle check).
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Invalid { kind: String, message: String },
    Assertion { message: String },
}

impl CliError {
    pub fn invalid(kind: &str, message: impl Into<String>) -> CliError {
        CliError::Invalid { kind: kind.into(), message: message.into() }
    }

    pub fn assertion(message: impl Into<String>) -> CliError {
        CliError::Assertion { message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } => EXIT_INVALID,
            CliError::Assertion { .. } => EXIT_ASSERTION,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Invalid { kind, message } => (kind.as_str(), message.as_str()),
            CliError::Assertion { message } => ("assertion", message.as_str()),
        };
        json!({ "error": { "kind": kind, "message": message, "exit_code": self.exit_code() } })
    }
}

impl From<pisupport::Error> for CliError {
    fn from(e: pisupport::Error) -> CliError {
        CliError::invalid(e.kind(), e.to_string())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a corpus directory: SHA-256 over `name sha256\n` lines of every
/// `*.json` file, sorted by name.  `None` if the directory is unreadable.
pub fn corpus_hash(dir: &Path) -> Option<CorpusHash> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter_map(|p| {
            let bytes = std::fs::read(&p).ok()?;
            Some((p.file_name()?.to_string_lossy().into_owned(), sha256_hex(&bytes)))
        })
        .collect();
    files.sort();
    let listing: String = files.iter().map(|(n, h)| format!("{n} {h}\n")).collect();
    Some(CorpusHash { sha256: sha256_hex(listing.as_bytes()), files: files.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusHash {
    pub sha256: String,
    pub files: usize,
}

/// An input as named on the command line, with the hash of its bytes.
#[derive(Clone, Debug, Serialize)]
pub struct InputRef {
    pub role: String,
    pub source: String,
    pub sha256: String,
}

/// A flat table for CSV output.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Outcome of a command: a JSON result, its CSV view, and whether an
/// assertion in it failed (exit code 3 after the report is printed).
pub struct Outcome {
    pub result: Value,
    pub table: Table,
    pub failed: Option<String>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: ConfigEcho,
    inputs: &'a [InputRef],
    corpus: Option<CorpusHash>,
    status: &'static str,
    result: &'a Value,
}

pub fn render(command: &str, cfg: &RunConfig, inputs: &[InputRef], outcome: &Outcome) -> Result<String, CliError> {
    let corpus = corpus_hash(&cfg.corpus);
    let status = if outcome.failed.is_some() { "fail" } else { "ok" };
    match cfg.format {
        Format::Json => {
            let env = Envelope {
                tool: "pisupport",
                version: env!("CARGO_PKG_VERSION"),
                command,
                config: cfg.echo(),
                inputs,
                corpus,
                status,
                result: &outcome.result,
            };
            let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::invalid("output", e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let echo = cfg.echo();
            let mut out = format!(
                "# pisupport {} {command} status={status}\n# p={} tower={} r={}..{} seed={} samples={} verify={}\n",
                env!("CARGO_PKG_VERSION"),
                echo.p,
                echo.tower.join(";"),
                echo.r[0],
                echo.r[1],
                echo.seed,
                echo.samples,
                serde_json::to_value(echo.verify).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            );
            match &corpus {
                Some(c) => out += &format!("# corpus_sha256={} files={}\n", c.sha256, c.files),
                None => out += "# corpus_sha256=none\n",
            }
            for i in inputs {
                out += &format!("# input {}={} sha256={}\n", i.role, i.source, i.sha256);
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            let to_err = |e: csv::Error| CliError::invalid("output", e.to_string());
            w.write_record(&outcome.table.header).map_err(to_err)?;
            for row in &outcome.table.rows {
                w.write_record(row).map_err(to_err)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::invalid("output", e.to_string()))?;
            out += &String::from_utf8_lossy(&bytes);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn errors_carry_exit_codes() {
        let e = CliError::from(pisupport::Error::Parse("x".into()));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_json()["error"]["kind"], "parse");
        assert_eq!(CliError::assertion("no").to_json()["error"]["exit_code"], 3);
    }
}
