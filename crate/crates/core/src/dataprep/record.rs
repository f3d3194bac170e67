//! The newline-delimited JSON measurement record shared by historical files
//! and the live stream.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of RSRQ histogram bins; reported values are integers in `0..RSRQ_BINS`.
pub const RSRQ_BINS: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topic {
    /// PRB utilization in `[0, 1]`.
    Load,
    /// Active UE count, `>= 0`.
    Ue,
    /// One RSRQ report, integer in `0..=34`.
    Rsrq,
    /// Carrier frequency band in MHz (configuration change event).
    Band,
    /// Transmit power in dBm (configuration change event).
    Power,
    /// Channel bandwidth in MHz (configuration change event).
    Bandwidth,
}

impl Topic {
    pub fn as_str(self) -> &'static str {
        match self {
            Topic::Load => "load",
            Topic::Ue => "ue",
            Topic::Rsrq => "rsrq",
            Topic::Band => "band",
            Topic::Power => "power",
            Topic::Bandwidth => "bandwidth",
        }
    }

    pub fn parse(s: &str) -> Option<Topic> {
        Some(match s {
            "load" => Topic::Load,
            "ue" => Topic::Ue,
            "rsrq" => Topic::Rsrq,
            "band" => Topic::Band,
            "power" => Topic::Power,
            "bandwidth" => Topic::Bandwidth,
            _ => return None,
        })
    }

    pub fn is_config(self) -> bool {
        matches!(self, Topic::Band | Topic::Power | Topic::Bandwidth)
    }
}

/// One timestamped measurement for one cell on one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub topic: Topic,
    pub cell: String,
    /// UTC epoch seconds.
    pub ts: i64,
    pub value: f64,
}

impl CellRecord {
    pub fn new(topic: Topic, cell: impl Into<String>, ts: i64, value: f64) -> Self {
        Self {
            topic,
            cell: cell.into(),
            ts,
            value,
        }
    }

    /// Checks the value range for the record's topic.
    pub fn validate(&self) -> Result<()> {
        let v = self.value;
        let ok = v.is_finite()
            && match self.topic {
                Topic::Load => (0.0..=1.0).contains(&v),
                Topic::Ue => v >= 0.0,
                Topic::Rsrq => v.fract() == 0.0 && (0.0..RSRQ_BINS as f64).contains(&v),
                Topic::Band | Topic::Bandwidth => v > 0.0,
                Topic::Power => true,
            };
        if ok && !self.cell.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{} value {} out of range for cell {:?}",
                self.topic.as_str(),
                v,
                self.cell
            )))
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Outcome of parsing one NDJSON line.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLine {
    Record(CellRecord),
    Blank,
    Malformed,
    OutOfRange,
}

pub fn parse_line(line: &str) -> ParsedLine {
    let line = line.trim();
    if line.is_empty() {
        return ParsedLine::Blank;
    }
    match serde_json::from_str::<CellRecord>(line) {
        Ok(r) => match r.validate() {
            Ok(()) => ParsedLine::Record(r),
            Err(_) => ParsedLine::OutOfRange,
        },
        Err(_) => ParsedLine::Malformed,
    }
}

/// Records read from a file plus counts of rejected lines.
#[derive(Debug, Clone, Default)]
pub struct RecordBatch {
    pub records: Vec<CellRecord>,
    pub malformed: usize,
    pub out_of_range: usize,
}

pub fn read_records<R: BufRead>(reader: R) -> Result<RecordBatch> {
    let mut out = RecordBatch::default();
    for line in reader.lines() {
        match parse_line(&line?) {
            ParsedLine::Record(r) => out.records.push(r),
            ParsedLine::Blank => {}
            ParsedLine::Malformed => out.malformed += 1,
            ParsedLine::OutOfRange => out.out_of_range += 1,
        }
    }
    Ok(out)
}

pub fn read_records_file(path: &std::path::Path) -> Result<RecordBatch> {
    let f = std::fs::File::open(path)?;
    read_records(std::io::BufReader::new(f))
}

pub fn write_records<'a, W: Write>(mut w: W, records: impl IntoIterator<Item = &'a CellRecord>) -> Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    w.flush()?;
    Ok(())
}
