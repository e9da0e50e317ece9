//! Training reports as JSON and per-epoch CSV.

use std::path::Path;

use adagnn_core::TrainReport;

use crate::error::{Error, Result};

pub fn write_report_json(path: &Path, report: &TrainReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    crate::write_atomic(path, text.as_bytes())
}

pub fn read_report_json(path: &Path) -> Result<TrainReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn report_csv(report: &TrainReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "learning_rate", "train_mse", "train_mae", "valid_mse", "valid_mae", "seconds"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &report.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.learning_rate.to_string(),
            e.train_mse.to_string(),
            e.train_mae.to_string(),
            opt(e.valid_mse),
            opt(e.valid_mae),
            e.seconds.to_string(),
        ])?;
    }
    let bytes = w.into_inner().expect("in-memory writer");
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_report_csv(path: &Path, report: &TrainReport) -> Result<()> {
    crate::write_atomic(path, report_csv(report)?.as_bytes())
}
