//! CSV renderings. Matrices are flattened to one row per entry.

use std::io::{self, Write};

use serde::Serialize;

use mjls_core::io::{GainsDump, TablesDump};
use mjls_core::reproduce::ReproduceReport;
use mjls_core::verify::VerifyReport;

use crate::Failure;

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

/// Emits the buffered table; a closed stdout is not an error.
fn finish(w: csv::Writer<Vec<u8>>) -> Result<(), Failure> {
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    match io::stdout().lock().write_all(&bytes) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn fail(e: csv::Error) -> Failure {
    Failure::input(e.to_string())
}

fn join(modes: &[usize]) -> String {
    modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("-")
}

pub fn tables_csv(dump: &TablesDump) -> Result<(), Failure> {
    let mut w = writer();
    w.write_record(["quantity", "j", "time", "modes", "row", "col", "value"]).map_err(fail)?;
    for e in &dump.entries {
        let j = e.j.map(|j| j.to_string()).unwrap_or_default();
        for (r, row) in e.value.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                w.write_record([&e.quantity, &j, &e.time.to_string(), &join(&e.modes), &r.to_string(), &c.to_string(), &v.to_string()])
                    .map_err(fail)?;
            }
        }
    }
    finish(w)
}

pub fn gains_csv(dump: &GainsDump) -> Result<(), Failure> {
    let mut w = writer();
    w.write_record(["t", "mode", "gain", "row", "col", "value"]).map_err(fail)?;
    for tg in &dump.gains {
        for mg in &tg.modes {
            let named = std::iter::once(("K_x".to_string(), &mg.kx))
                .chain(mg.ku.iter().enumerate().map(|(j, k)| (format!("K_u{}", j + 1), k)));
            for (name, mat) in named {
                for (r, row) in mat.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        w.write_record([&tg.t.to_string(), &mg.mode.to_string(), &name, &r.to_string(), &c.to_string(), &v.to_string()])
                            .map_err(fail)?;
                    }
                }
            }
        }
    }
    finish(w)
}

pub fn single_row_csv<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut w = writer();
    w.serialize(value).map_err(fail)?;
    finish(w)
}

pub fn verify_csv(report: &VerifyReport) -> Result<(), Failure> {
    let mut w = writer();
    for check in &report.checks {
        w.serialize(check).map_err(fail)?;
    }
    finish(w)
}

pub fn reproduce_csv(report: &ReproduceReport) -> Result<(), Failure> {
    let mut w = writer();
    w.write_record(["item", "printed", "computed", "status"]).map_err(fail)?;
    for row in report.table.iter().chain(&report.gains) {
        let status = serde_json::to_value(row.status).map_err(|e| Failure::input(e.to_string()))?;
        w.write_record([&row.item, &row.printed.to_string(), &row.computed.to_string(), status.as_str().unwrap_or("")])
            .map_err(fail)?;
    }
    let cost = &report.optimal_cost;
    let status = serde_json::to_value(cost.status).map_err(|e| Failure::input(e.to_string()))?;
    w.write_record(["optimal cost", &cost.printed.to_string(), &cost.closed_form.to_string(), status.as_str().unwrap_or("")])
        .map_err(fail)?;
    finish(w)
}
