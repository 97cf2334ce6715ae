//! CSV and JSON artifacts written and read by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zrp_core::analysis::ComparisonReport;
use zrp_core::dynamics::Configuration;
use zrp_core::pde::DensityProfile;
use zrp_core::{Result, ZrpError};

fn csv_err(e: csv::Error) -> ZrpError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ZrpError::Io(io),
        other => ZrpError::Parse(format!("csv: {other:?}")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OccupancyRow {
    site: usize,
    row: String,
    occupancy: u32,
}

/// Writes one configuration as `(site, row, occupancy)` rows, upper row first.
pub fn write_configuration(path: &Path, config: &Configuration) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (v, &occupancy) in config.occupancy().iter().enumerate() {
        let row = if v % 2 == 0 { "upper" } else { "lower" };
        w.serialize(OccupancyRow {
            site: v / 2,
            row: row.into(),
            occupancy,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_configuration(path: &Path) -> Result<Configuration> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut cells = Vec::new();
    for rec in r.deserialize::<OccupancyRow>() {
        let rec = rec.map_err(csv_err)?;
        let lower = match rec.row.as_str() {
            "upper" => 0,
            "lower" => 1,
            other => {
                return Err(ZrpError::Parse(format!(
                    "{}: row must be upper or lower, got {other}",
                    path.display()
                )))
            }
        };
        cells.push((2 * rec.site + lower, rec.occupancy));
    }
    let vertices = cells.len();
    if vertices == 0 || vertices % 2 != 0 {
        return Err(ZrpError::Parse(format!(
            "{}: expected two rows per site",
            path.display()
        )));
    }
    let mut occ = vec![None; vertices];
    for (v, k) in cells {
        match occ.get_mut(v) {
            Some(slot @ None) => *slot = Some(k),
            _ => {
                return Err(ZrpError::Parse(format!(
                    "{}: duplicate or out-of-range vertex {v}",
                    path.display()
                )))
            }
        }
    }
    Ok(Configuration::from_occupancy(
        occ.into_iter().map(|k| k.unwrap_or(0)).collect(),
    ))
}

pub fn replica_file(dir: &Path, replica: usize) -> PathBuf {
    dir.join(format!("replica_{replica:05}.csv"))
}

pub fn snapshot_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("snapshot_{index:03}"))
}

/// All `replica_*.csv` files of a snapshot directory, in replica order.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<Configuration>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("replica_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ZrpError::Input(format!("no replica_*.csv files in {}", dir.display())));
    }
    files.iter().map(|p| read_configuration(p)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    x: f64,
    rho: f64,
}

pub fn write_profile(path: &Path, profile: &DensityProfile<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (i, &rho) in profile.values.iter().enumerate() {
        w.serialize(ProfileRow { x: profile.x(i), rho }).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `(x, rho)` profile; the nodes must be the uniform grid `i/M`.
pub fn read_profile(path: &Path) -> Result<DensityProfile<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let rows: Vec<ProfileRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    let m = rows.len();
    if m < 2 {
        return Err(ZrpError::Input(format!(
            "{}: profile needs at least two nodes",
            path.display()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if (row.x - i as f64 / m as f64).abs() > 1e-9 {
            return Err(ZrpError::Input(format!(
                "{}: node {i} at x = {}, expected the uniform grid i/{m}",
                path.display(),
                row.x
            )));
        }
    }
    Ok(DensityProfile::new(rows.into_iter().map(|r| r.rho).collect(), 0.0))
}

pub fn write_block_rows(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in &report.blocks {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON to `out`, or to stdout when no path is given.
pub fn emit_json<S: Serialize>(out: Option<&Path>, value: &S) -> Result<()> {
    match out {
        Some(path) => zrp_core::pipeline::write_json(path, value),
        None => {
            use std::io::Write;
            let text = serde_json::to_string_pretty(value)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
