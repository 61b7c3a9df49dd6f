//! Named sequence records, the bundled reference sequences, and their TOML form.
//!
//! On disk angles are in units of π. A file holds either a single record
//! (`name`, `angles_pi`, `mask` at top level) or several `[[sequence]]` tables.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::ExchangeSequence;
use crate::link::SLOT_COUNT;

/// Significant digits kept when angles are written to disk.
pub const ANGLE_DIGITS: usize = 12;

/// Names of the bundled sequences.
pub const BUNDLED: [&str; 3] = ["no_flag", "best_flag", "worst_flag"];

/// A sequence as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub name: String,
    pub angles_pi: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceSet {
    sequence: Vec<SequenceRecord>,
}

impl SequenceRecord {
    pub fn from_sequence(name: impl Into<String>, seq: &ExchangeSequence) -> Self {
        SequenceRecord {
            name: name.into(),
            angles_pi: seq.angles_pi().iter().map(|&a| round_significant(a, ANGLE_DIGITS)).collect(),
            mask: seq.mask().to_vec(),
        }
    }

    pub fn to_sequence(&self) -> Result<ExchangeSequence> {
        let angles_pi: [f64; SLOT_COUNT] = self.angles_pi.as_slice().try_into().map_err(|_| {
            Error::invalid(format!(
                "sequence '{}': expected {SLOT_COUNT} angles, got {}",
                self.name,
                self.angles_pi.len()
            ))
        })?;
        let mask: [bool; SLOT_COUNT] = self.mask.as_slice().try_into().map_err(|_| {
            Error::invalid(format!(
                "sequence '{}': expected {SLOT_COUNT} mask entries, got {}",
                self.name,
                self.mask.len()
            ))
        })?;
        ExchangeSequence::new(angles_pi.map(|a| a * PI), mask)
            .map_err(|e| match e {
                Error::InvalidArgument(m) => Error::invalid(format!("sequence '{}': {m}", self.name)),
                e => e,
            })
    }
}

/// Round to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// `arccos(1/3)/π`, the first angle of the unflaggable reference sequence.
pub fn q1() -> f64 {
    (1.0f64 / 3.0).acos() / PI
}

fn no_flag_angles_pi() -> [f64; SLOT_COUNT] {
    let q1 = q1();
    [
        q1, 0.0, 2.0 - q1, 1.0, 1.5, 1.5, 0.0, 1.0, 1.5, 0.5, 0.0, 1.0, 1.5, 1.5, 1.0, 1.0, 1.0,
        0.0, 0.0, 0.0,
    ]
}

const BEST_FLAG_PI: [f64; SLOT_COUNT] = [
    0.496474, 0.511053, 0.407919, 1.128462, 0.644573, 1.456051, 0.233065, 1.473077, 1.574455,
    1.481738, 0.296057, 0.778243, 0.458866, 0.762262, 0.654983, 0.907327, 0.495382, 0.403991, 0.0,
    1.700957,
];

const WORST_FLAG_PI: [f64; SLOT_COUNT] = [
    1.540024, 1.988000, 1.646738, 0.463540, 1.603884, 0.829024, 1.183458, 1.404117, 0.613810,
    1.416749, 1.310604, 1.379647, 1.556976, 1.310274, 0.517602, 1.411259, 1.144766, 0.015345, 0.0,
    0.516077,
];

/// Bundled sequence by name. Angles are kept at full precision (no rounding).
pub fn bundled(name: &str) -> Option<(ExchangeSequence, bool)> {
    let (angles_pi, flaggable) = match name {
        "no_flag" => (no_flag_angles_pi(), false),
        "best_flag" => (BEST_FLAG_PI, true),
        "worst_flag" => (WORST_FLAG_PI, true),
        _ => return None,
    };
    let seq = ExchangeSequence::from_angles_pi(angles_pi).expect("bundled sequences are valid");
    Some((seq, flaggable))
}

/// Whether a bundled sequence is flaggable; `None` for unknown names.
pub fn bundled_is_flaggable(name: &str) -> Option<bool> {
    bundled(name).map(|(_, f)| f)
}

/// Parse a file holding one record or a `[[sequence]]` list.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<SequenceRecord>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
    if table.contains_key("sequence") {
        let set: SequenceSet = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        Ok(set.sequence)
    } else {
        let one: SequenceRecord = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        Ok(vec![one])
    }
}

pub fn read_records(path: &Path) -> Result<Vec<SequenceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, path)
}

pub fn records_to_string(records: &[SequenceRecord]) -> Result<String> {
    let set = SequenceSet {
        sequence: records.to_vec(),
    };
    toml::to_string(&set).map_err(|e| Error::invalid(format!("cannot serialise sequences: {e}")))
}

pub fn write_records(path: &Path, records: &[SequenceRecord]) -> Result<()> {
    std::fs::write(path, records_to_string(records)?).map_err(|e| Error::io(path, e))
}

/// Resolve a bundled name or a path. A file with several records must be
/// disambiguated with `path#name`.
pub fn resolve(spec: &str) -> Result<(String, ExchangeSequence)> {
    if let Some((seq, _)) = bundled(spec) {
        return Ok((spec.to_string(), seq));
    }
    let (path, wanted) = match spec.rsplit_once('#') {
        Some((p, n)) => (p, Some(n)),
        None => (spec, None),
    };
    let path = Path::new(path);
    if !path.exists() {
        return Err(Error::invalid(format!(
            "'{spec}' is neither a bundled sequence ({}) nor an existing file",
            BUNDLED.join(", ")
        )));
    }
    let records = read_records(path)?;
    let record = match wanted {
        Some(n) => records
            .iter()
            .find(|r| r.name == n)
            .ok_or_else(|| Error::invalid(format!("no sequence named '{n}' in {}", path.display())))?,
        None if records.len() == 1 => &records[0],
        None => {
            return Err(Error::invalid(format!(
                "{} holds {} sequences; select one with '{}#<name>'",
                path.display(),
                records.len(),
                path.display()
            )))
        }
    };
    Ok((record.name.clone(), record.to_sequence()?))
}
