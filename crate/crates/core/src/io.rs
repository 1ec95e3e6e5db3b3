//! On-disk formats.
//!
//! All numeric CSV values are written in scientific notation with 15
//! significant digits, so reading a file and writing it back reproduces it
//! byte for byte. Heatmaps are binary 8-bit PGM, one row per `ξ` step,
//! each row scaled to its own maximum.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::calibration::{CalibratedXi, ReferenceReading};
use crate::error::{Error, Result};
use crate::evolution::EvolutionMap;
use crate::reconstruction::{FidelityCurve, Snapshot};

/// Rows read from CSV must sum to one within this.
pub const READ_NORM_TOLERANCE: f64 = 1e-12;

pub fn format_value(v: f64) -> String {
    format!("{v:.14e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(format_value).collect::<Vec<_>>().join(",")
}

struct Table {
    header: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses a header line plus numeric rows. Blank lines are skipped.
fn parse_table(text: &str, path: &str) -> Result<Table> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, text) in lines {
        let cells: Vec<&str> = text.split(',').collect();
        if cells.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} columns, found {}", header.len(), cells.len()),
            ));
        }
        let values = cells
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    parse_error(path, line, format!("column {:?}: not a number: {:?}", header[col], cell))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(Table { header, rows })
}

fn expect_header(table: &Table, path: &str, prefix: &[&str]) -> Result<()> {
    let matches = table.header.len() >= prefix.len()
        && table.header.iter().zip(prefix).all(|(h, p)| h == p);
    if !matches {
        return Err(parse_error(
            path,
            1,
            format!("expected header starting with {:?}, found {:?}", prefix.join(","), table.header.join(",")),
        ));
    }
    Ok(())
}

/// `xi,0,1,…,n−1` header followed by one row per grid point.
pub fn map_to_csv(map: &EvolutionMap) -> String {
    let mut out = String::from("xi");
    for k in 0..map.n_guides() {
        out.push_str(&format!(",{k}"));
    }
    out.push('\n');
    for (xi, row) in map.xi_grid().iter().zip(map.rows()) {
        out.push_str(&format_value(*xi));
        out.push(',');
        out.push_str(&join(row.iter().copied()));
        out.push('\n');
    }
    out
}

pub fn map_from_csv(text: &str, path: &str) -> Result<EvolutionMap> {
    let table = parse_table(text, path)?;
    expect_header(&table, path, &["xi"])?;
    for (k, h) in table.header.iter().skip(1).enumerate() {
        if h != &k.to_string() {
            return Err(parse_error(path, 1, format!("column {} should be guide {k}, found {h:?}", k + 1)));
        }
    }
    if table.header.len() < 2 {
        return Err(parse_error(path, 1, "no waveguide columns"));
    }
    if table.rows.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let mut grid = Vec::with_capacity(table.rows.len());
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, values) in &table.rows {
        let total: f64 = values[1..].iter().sum();
        if values[1..].iter().any(|v| *v < 0.0) || (total - 1.0).abs() > READ_NORM_TOLERANCE {
            return Err(parse_error(path, *line, "row is not a normalized intensity distribution"));
        }
        if let Some(&last) = grid.last() {
            if values[0] <= last {
                return Err(parse_error(path, *line, "xi values must be strictly increasing"));
            }
        }
        grid.push(values[0]);
        rows.push(values[1..].to_vec());
    }
    EvolutionMap::from_normalized(grid, rows, READ_NORM_TOLERANCE)
        .map_err(|e| parse_error(path, 2, e.to_string()))
}

/// Binary PGM (P5), width = guides, height = rows.
pub fn map_to_pgm(map: &EvolutionMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.n_guides(), map.n_rows()).into_bytes();
    for row in map.rows() {
        let peak = row.iter().copied().fold(0.0, f64::max);
        out.extend(row.iter().map(|&v| {
            if peak > 0.0 {
                (255.0 * v / peak).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        }));
    }
    out
}

pub fn snapshots_to_csv(snapshots: &[Snapshot]) -> Result<String> {
    let n = snapshots.first().map_or(0, |s| s.raw_intensities.len());
    let mut out = String::from("strain,wavelength,p_bar,p_cross");
    for k in 0..n {
        out.push_str(&format!(",I_{k}"));
    }
    out.push('\n');
    for s in snapshots {
        if s.raw_intensities.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.raw_intensities.len(),
            });
        }
        let fields = [s.strain, s.wavelength, s.reference.p_bar, s.reference.p_cross]
            .into_iter()
            .chain(s.raw_intensities.iter().copied());
        out.push_str(&join(fields));
        out.push('\n');
    }
    Ok(out)
}

pub fn snapshots_from_csv(text: &str, path: &str) -> Result<Vec<Snapshot>> {
    let table = parse_table(text, path)?;
    expect_header(&table, path, &["strain", "wavelength", "p_bar", "p_cross"])?;
    if table.header.len() < 5 {
        return Err(parse_error(path, 1, "no intensity columns"));
    }
    table
        .rows
        .into_iter()
        .map(|(line, v)| {
            let snapshot = Snapshot {
                raw_intensities: v[4..].to_vec(),
                reference: ReferenceReading {
                    p_bar: v[2],
                    p_cross: v[3],
                },
                strain: v[0],
                wavelength: v[1],
                seed: None,
            };
            snapshot
                .validate()
                .map_err(|e| parse_error(path, line, e.to_string()))?;
            Ok(snapshot)
        })
        .collect()
}

pub fn snapshots_to_json(snapshots: &[Snapshot]) -> String {
    serde_json::to_string_pretty(snapshots).expect("snapshots serialize")
}

pub fn snapshots_from_json(text: &str, path: &str) -> Result<Vec<Snapshot>> {
    let snapshots: Vec<Snapshot> = serde_json::from_str(text)
        .map_err(|e| parse_error(path, e.line(), e.to_string()))?;
    for (i, s) in snapshots.iter().enumerate() {
        s.validate()
            .map_err(|e| parse_error(path, 0, format!("snapshot {i}: {e}")))?;
    }
    Ok(snapshots)
}

/// Loads snapshots from `.json` or CSV, by extension.
pub fn read_snapshots(path: &Path) -> Result<Vec<Snapshot>> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    if path.extension().is_some_and(|e| e == "json") {
        snapshots_from_json(&text, &name)
    } else {
        snapshots_from_csv(&text, &name)
    }
}

/// `strain,p_bar,p_cross` rows.
pub fn readings_from_csv(text: &str, path: &str) -> Result<Vec<(f64, ReferenceReading)>> {
    let table = parse_table(text, path)?;
    expect_header(&table, path, &["strain", "p_bar", "p_cross"])?;
    if table.header.len() != 3 {
        return Err(parse_error(path, 1, "expected exactly 3 columns"));
    }
    table
        .rows
        .into_iter()
        .map(|(line, v)| {
            let reading =
                ReferenceReading::new(v[1], v[2]).map_err(|e| parse_error(path, line, e.to_string()))?;
            Ok((v[0], reading))
        })
        .collect()
}

pub fn readings_to_csv(readings: &[(f64, ReferenceReading)]) -> String {
    let mut out = String::from("strain,p_bar,p_cross\n");
    for (strain, r) in readings {
        out.push_str(&join([*strain, r.p_bar, r.p_cross]));
        out.push('\n');
    }
    out
}

/// `strain,xi,branch,residual` rows.
pub fn calibration_to_csv(strains: &[f64], calibration: &[CalibratedXi]) -> String {
    let mut out = String::from("strain,xi,branch,residual\n");
    for (strain, c) in strains.iter().zip(calibration) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_value(*strain),
            format_value(c.xi),
            c.branch,
            format_value(c.residual)
        ));
    }
    out
}

pub fn calibration_from_csv(text: &str, path: &str) -> Result<Vec<(f64, CalibratedXi)>> {
    let table = parse_table(text, path)?;
    expect_header(&table, path, &["strain", "xi", "branch", "residual"])?;
    table
        .rows
        .into_iter()
        .map(|(line, v)| {
            if v[2] < 0.0 || v[2].fract() != 0.0 || v[1] < 0.0 {
                return Err(parse_error(path, line, "invalid xi or branch"));
            }
            Ok((
                v[0],
                CalibratedXi {
                    xi: v[1],
                    branch: v[2] as u32,
                    residual: v[3],
                },
            ))
        })
        .collect()
}

pub fn fidelity_to_csv(curve: &FidelityCurve) -> String {
    let mut out = String::from("xi,fidelity\n");
    for (xi, f) in curve.xi_grid.iter().zip(&curve.values) {
        out.push_str(&join([*xi, *f]));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
