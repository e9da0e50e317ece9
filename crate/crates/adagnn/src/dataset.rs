//! Labeled datasets as JSON lines.
//!
//! One object per line: `id` (optional), `lattice` (three rows in Å),
//! `atomic_numbers`, exactly one of `cart_coords` (Å) or `frac_coords`, and
//! a finite `target`. Blank lines are skipped.

use std::io::Write;
use std::path::Path;

use adagnn_core::crystal::{Lattice, Vec3};
use adagnn_core::{Crystal, PropertyRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, LineError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    lattice: [Vec3; 3],
    atomic_numbers: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cart_coords: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frac_coords: Option<Vec<Vec3>>,
    target: f64,
}

fn record_from_line(text: &str) -> std::result::Result<PropertyRecord, String> {
    let line: RecordLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let lattice = Lattice::new(line.lattice).map_err(|e| e.to_string())?;
    let crystal = match (line.cart_coords, line.frac_coords) {
        (Some(c), None) => Crystal::new(line.atomic_numbers, c, lattice, line.id),
        (None, Some(f)) => Crystal::from_fractional(line.atomic_numbers, &f, lattice, line.id),
        _ => return Err("give exactly one of cart_coords or frac_coords".into()),
    }
    .map_err(|e| e.to_string())?;
    PropertyRecord::new(crystal, line.target).map_err(|e| e.to_string())
}

/// Records in file order; every bad line is reported together.
pub fn parse_dataset_str(text: &str) -> Result<Vec<PropertyRecord>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match record_from_line(line) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(Error::Dataset(errors))
    }
}

pub fn parse_dataset_jsonl(path: &Path) -> Result<Vec<PropertyRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_str(&text)
}

pub fn dataset_line(record: &PropertyRecord) -> String {
    let c = &record.crystal;
    let line = RecordLine {
        id: c.id().map(str::to_string),
        lattice: *c.lattice().rows(),
        atomic_numbers: c.atomic_numbers().to_vec(),
        cart_coords: Some(c.cart_coords().to_vec()),
        frac_coords: None,
        target: record.target,
    };
    serde_json::to_string(&line).expect("plain data serializes")
}

pub fn write_dataset_jsonl(path: &Path, records: &[PropertyRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        writeln!(file, "{}", dataset_line(r)).map_err(|e| Error::io(path, e))?;
    }
    file.flush().map_err(|e| Error::io(path, e))
}
