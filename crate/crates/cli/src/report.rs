use std::io::Write;

use quadwalk::io::OutputFormat;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

enum Body {
    Rows {
        headers: Vec<&'static str>,
        rows: Vec<Vec<String>>,
    },
    /// CSV already rendered by a library writer.
    Csv(Vec<u8>),
}

/// One command's result, renderable as CSV or JSON.
pub struct Report {
    command: String,
    body: Body,
    json: Value,
}

impl Report {
    pub fn rows(command: &str, headers: Vec<&'static str>, rows: Vec<Vec<String>>, json: impl Serialize) -> Self {
        Report {
            command: command.to_string(),
            body: Body::Rows { headers, rows },
            json: serde_json::to_value(json).expect("result serializes"),
        }
    }

    pub fn csv(command: &str, csv: Vec<u8>, json: impl Serialize) -> Self {
        Report {
            command: command.to_string(),
            body: Body::Csv(csv),
            json: serde_json::to_value(json).expect("result serializes"),
        }
    }

    pub fn write(&self, format: OutputFormat, out: &mut impl Write) -> std::io::Result<()> {
        match format {
            OutputFormat::Json => {
                let doc = json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": self.command,
                    "result": self.json,
                });
                serde_json::to_writer_pretty(&mut *out, &doc)?;
                writeln!(out)
            }
            OutputFormat::Csv => match &self.body {
                Body::Csv(bytes) => out.write_all(bytes),
                Body::Rows { headers, rows } => {
                    let mut w = csv::Writer::from_writer(out);
                    w.write_record(headers)?;
                    for r in rows {
                        w.write_record(r)?;
                    }
                    w.flush()
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_and_json_envelope() {
        let r = Report::rows("dp count", vec!["count"], vec![vec!["7".into()]], json!({ "count": "7" }));
        let mut csv = Vec::new();
        r.write(OutputFormat::Csv, &mut csv).unwrap();
        assert_eq!(csv, b"count\n7\n");
        let mut js = Vec::new();
        r.write(OutputFormat::Json, &mut js).unwrap();
        let doc: Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(doc["schema_version"], SCHEMA_VERSION);
        assert_eq!(doc["result"]["count"], "7");
    }
}
