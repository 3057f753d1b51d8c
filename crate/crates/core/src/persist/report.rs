//! JSON and CSV summaries of evaluation runs.
//!
//! Everything except `timing.json` is a pure function of the metrics, so
//! two runs with the same configuration produce byte-identical files.

use std::path::Path;

use serde::Serialize;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::experiment::{ComparisonRow, EvalReport, SweepCurve};
use crate::scae::ScaeHistory;
use crate::sim::StateTag;

fn json<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(fmt)?;
    for r in rows {
        w.write_record(r).map_err(fmt)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn state_columns() -> Vec<String> {
    StateTag::ALL.iter().map(|t| t.as_str().to_string()).collect()
}

fn state_cells(per_state: &std::collections::BTreeMap<String, crate::experiment::StateAccuracy>) -> Vec<String> {
    StateTag::ALL
        .iter()
        .map(|t| per_state.get(t.as_str()).map_or(String::new(), |s| s.accuracy.to_string()))
        .collect()
}

/// Writes `report.json`, `confusion.csv`, `train_loss.csv`, `scae_loss.csv`
/// and `timing.json` into `dir`.
pub fn emit_report(dir: &Path, report: &EvalReport) -> Result<()> {
    let mut value = serde_json::to_value(report).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("wall_clock_s");
    }
    write_atomic(&dir.join("report.json"), &json(&value)?)?;
    write_atomic(&dir.join("timing.json"), &json(&serde_json::json!({ "wall_clock_s": report.wall_clock_s }))?)?;

    let mut header = vec!["true".to_string()];
    header.extend((0..report.class_count).map(|c| format!("pred_{c}")));
    let rows: Vec<Vec<String>> = report
        .confusion
        .iter()
        .enumerate()
        .map(|(i, row)| std::iter::once(i.to_string()).chain(row.iter().map(|v| v.to_string())).collect())
        .collect();
    write_atomic(&dir.join("confusion.csv"), &csv_bytes(&header, &rows)?)?;
    emit_train_loss(dir, &report.train_loss)?;
    emit_scae_loss(dir, &report.scae_loss)
}

/// Writes `scae_loss.csv`: one row per pair and epoch.
pub fn emit_scae_loss(dir: &Path, histories: &[ScaeHistory]) -> Result<()> {
    let mut rows = Vec::new();
    for h in histories {
        for (e, b) in h.epochs.iter().enumerate() {
            rows.push(vec![
                (h.pair + 1).to_string(),
                (e + 1).to_string(),
                b.l_recst.to_string(),
                b.l_clst.to_string(),
                b.l_total.to_string(),
            ]);
        }
    }
    let header: Vec<String> = ["pair", "epoch", "l_recst", "l_clst", "l_total"].map(String::from).to_vec();
    write_atomic(&dir.join("scae_loss.csv"), &csv_bytes(&header, &rows)?)
}

/// Writes `train_loss.csv`: mean cross-entropy per epoch.
pub fn emit_train_loss(dir: &Path, loss: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = loss.iter().enumerate().map(|(e, l)| vec![(e + 1).to_string(), l.to_string()]).collect();
    write_atomic(&dir.join("train_loss.csv"), &csv_bytes(&["epoch".into(), "loss".into()], &rows)?)
}

/// Writes `sweep.json` and `sweep.csv`.
pub fn emit_sweep(dir: &Path, curve: &SweepCurve) -> Result<()> {
    write_atomic(&dir.join("sweep.json"), &json(curve)?)?;
    let mut header = vec![curve.axis.as_str().to_string(), "accuracy".into()];
    header.extend(state_columns());
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            let mut r = vec![p.value.to_string(), p.accuracy.to_string()];
            r.extend(state_cells(&p.per_state));
            r
        })
        .collect();
    write_atomic(&dir.join("sweep.csv"), &csv_bytes(&header, &rows)?)
}

/// Writes `{name}.json` and `{name}.csv` for a table of compared runs.
pub fn emit_comparison(dir: &Path, name: &str, rows: &[ComparisonRow]) -> Result<()> {
    write_atomic(&dir.join(format!("{name}.json")), &json(rows)?)?;
    let mut header = vec!["run".to_string(), "accuracy".into()];
    header.extend(state_columns());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![r.name.clone(), r.accuracy.to_string()];
            c.extend(state_cells(&r.per_state));
            c
        })
        .collect();
    write_atomic(&dir.join(format!("{name}.csv")), &csv_bytes(&header, &table)?)
}
