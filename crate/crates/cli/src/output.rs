use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use reachset::io::to_json_string;
use reachset::Result;
use serde::Serialize;
use serde_json::Value;

/// Writes `text` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// CSV into a string buffer; callers pass already formatted fields.
pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

/// `<out>.meta.json` next to an output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct Timing {
    started_unix: f64,
    elapsed_s: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    workers: usize,
    config: &'a Value,
    timing: Timing,
    #[serde(skip_serializing_if = "Value::is_null")]
    diagnostics: Value,
}

/// Run bookkeeping for the metadata sidecar.
pub struct Run {
    pub command: &'static str,
    pub config: Value,
    started: SystemTime,
    clock: Instant,
}

impl Run {
    pub fn start<C: Serialize>(command: &'static str, config: &C) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).expect("serializable config"),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn write_meta(&self, path: &Path, diagnostics: Value) -> Result<()> {
        let meta = Metadata {
            tool: "reachset",
            version: reachset::VERSION,
            command: self.command,
            workers: rayon::current_num_threads(),
            config: &self.config,
            timing: Timing {
                started_unix: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                elapsed_s: self.clock.elapsed().as_secs_f64(),
            },
            diagnostics,
        };
        std::fs::write(path, to_json_string(&meta))?;
        Ok(())
    }

    /// Sidecar for a single output file; nothing is written for stdout output.
    pub fn finish(&self, out: Option<&Path>, diagnostics: Value) -> Result<()> {
        match out {
            Some(p) => self.write_meta(&sidecar_path(p), diagnostics),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta.json"));
        assert_eq!(sidecar_path(Path::new("bound.json")), PathBuf::from("bound.json.meta.json"));
    }

    #[test]
    fn csv_quotes_nothing_for_numbers() {
        let s = csv_string(&["t".into(), "ZI".into()], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(s, "t,ZI\n1,2\n");
    }
}
