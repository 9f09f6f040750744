//! Input parsing and table export.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dp::Barrier;
use crate::error::{Error, Result};
use crate::ladder::RenewalTable;
use crate::model::StepDistribution;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    steps: Vec<StepEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct StepEntry {
    dx: i64,
    dy: i64,
    w: f64,
}

/// Parses `{"steps": [{"dx": .., "dy": .., "w": ..}, ..]}`; weights are normalized.
pub fn parse_steps_json(text: &str) -> Result<StepDistribution> {
    let file: StepFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let raw: Vec<_> = file.steps.iter().map(|s| (s.dx, s.dy, s.w)).collect();
    Ok(StepDistribution::from_raw(&raw)?.normalize())
}

pub fn read_steps_json(path: &Path) -> Result<StepDistribution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_steps_json(&text)
}

pub fn steps_to_json(sd: &StepDistribution) -> String {
    let file = StepFile {
        steps: sd
            .atoms()
            .iter()
            .map(|a| StepEntry {
                dx: a.dx,
                dy: a.dy,
                w: a.weight,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("step file serializes")
}

fn parse_items<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    if text.trim().is_empty() {
        return Err(Error::Parse(format!("empty {what}")));
    }
    text.split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {what} entry {:?}", item.trim())))
        })
        .collect()
}

fn two<T: Copy>(v: Vec<T>, text: &str) -> Result<(T, T)> {
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Parse(format!("expected two comma-separated values, got {text:?}"))),
    }
}

/// `"a,b"` as an integer pair.
pub fn parse_pair(text: &str) -> Result<(i64, i64)> {
    two(parse_items(text, "pair")?, text)
}

pub fn parse_pair_f64(text: &str) -> Result<(f64, f64)> {
    let (a, b) = two(parse_items::<f64>(text, "pair")?, text)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Parse(format!("non-finite value in {text:?}")));
    }
    Ok((a, b))
}

/// Comma-separated list of nonnegative integers.
pub fn parse_list(text: &str) -> Result<Vec<u64>> {
    parse_items(text, "list")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Parse(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum BarrierSetting {
    At(i64),
    Named(BarrierName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierName {
    Auto,
    None,
}

impl BarrierSetting {
    pub fn to_barrier(self) -> Barrier {
        match self {
            BarrierSetting::At(l) => Barrier::At(l),
            BarrierSetting::Named(BarrierName::Auto) => Barrier::Auto,
            BarrierSetting::Named(BarrierName::None) => Barrier::None,
        }
    }
}

impl FromStr for BarrierSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BarrierSetting::Named(BarrierName::Auto)),
            "none" => Ok(BarrierSetting::Named(BarrierName::None)),
            _ => s
                .parse::<i64>()
                .map(BarrierSetting::At)
                .map_err(|_| Error::Parse(format!("barrier must be an integer, \"auto\" or \"none\", got {s:?}"))),
        }
    }
}

/// Optional TOML run configuration; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: Option<PathBuf>,
    pub convention: Option<String>,
    pub barrier: Option<BarrierSetting>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config file; a relative `steps` path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(steps), Some(dir)) = (&cfg.steps, path.parent()) {
            if steps.is_relative() {
                cfg.steps = Some(dir.join(steps));
            }
        }
        Ok(cfg)
    }
}

/// CSV with columns `u,value` for `u = 0..=max_u`.
pub fn write_renewal_csv<W: Write>(table: &RenewalTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "value"]).map_err(|e| Error::Io(e.to_string()))?;
    for u in 0..=table.max_u() {
        w.serialize((u, table.value(u))).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
