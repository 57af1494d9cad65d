//! CSV ingestion and output.
//!
//! Dialect: comma separated, `.` decimals, LF line endings, UTF-8. A single
//! header row is detected by a non-numeric first record; lines starting with
//! `#` are comments and carry the run manifest in files written here.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Dataset, Grid};
use crate::synth::SyntheticDataset;
use crate::utility::DiscreteMeasure;

/// How raw columns are brought into `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Normalize {
    /// Reject out-of-range values.
    #[default]
    None,
    /// Affine map of each column's observed range onto `[-1, 1]`.
    MinMax,
}

/// Per-column affine map `x ↦ 2 (x − min) / (max − min) − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

/// Parsed numeric table with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// SHA-256 of the raw file bytes.
    pub sha256: String,
}

/// Reads a numeric CSV file.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let sha256 = hex_digest(&bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut header = None;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 && header.is_none() => {
                header = Some(record.iter().map(str::to_string).collect());
            }
            Err(err) => {
                return Err(Error::invalid(format!(
                    "{}: row {} is not numeric ({err})",
                    path.display(),
                    rows.len()
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} contains no data rows", path.display())));
    }
    Ok(Table { header, rows, sha256 })
}

/// Reads a dataset with `d` columns (inferred when `None`).
///
/// With [`Normalize::MinMax`] each column is mapped onto `[-1, 1]`; constant
/// columns map to 0. The map is derived from the data itself and is not
/// privatized.
pub fn ingest(path: &Path, d: Option<usize>, normalize: Normalize) -> Result<(Dataset, Option<Vec<ColumnRange>>, String)> {
    let table = read_table(path)?;
    let d = d.unwrap_or(table.rows[0].len());
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!(
                "{}: row {i} has {} columns, expected {d}",
                path.display(),
                row.len()
            )));
        }
    }
    let mut values: Vec<f64> = table.rows.into_iter().flatten().collect();
    let ranges = match normalize {
        Normalize::None => None,
        Normalize::MinMax => {
            let ranges = min_max_normalize(&mut values, d);
            log::warn!("min-max normalization uses the raw data range and is not differentially private");
            for (j, r) in ranges.iter().enumerate() {
                log::info!("column {j}: [{}, {}] mapped onto [-1, 1]", r.min, r.max);
            }
            Some(ranges)
        }
    };
    Ok((Dataset::new(d, values)?, ranges, table.sha256))
}

fn min_max_normalize(values: &mut [f64], d: usize) -> Vec<ColumnRange> {
    let mut ranges = vec![
        ColumnRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY
        };
        d
    ];
    for row in values.chunks_exact(d) {
        for (r, &v) in ranges.iter_mut().zip(row) {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
    }
    for row in values.chunks_exact_mut(d) {
        for (v, r) in row.iter_mut().zip(&ranges) {
            *v = if r.max > r.min {
                (2.0 * (*v - r.min) / (r.max - r.min) - 1.0).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
    }
    ranges
}

/// Reads a dataset or a synthetic file (`d` coordinates plus an optional
/// trailing multiplicity column) as a probability measure.
pub fn read_measure(path: &Path, d: usize) -> Result<DiscreteMeasure> {
    let table = read_table(path)?;
    let mut points = Vec::with_capacity(table.rows.len() * d);
    let mut weights = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let weight = match row.len() {
            n if n == d => 1.0,
            n if n == d + 1 => row[d],
            n => {
                return Err(Error::invalid(format!(
                    "{}: row {i} has {n} columns, expected {d} (or {} with counts)",
                    path.display(),
                    d + 1
                )))
            }
        };
        if let Some(&bad) = row[..d].iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "{}: row {i} has value {bad} outside [-1, 1]",
                path.display()
            )));
        }
        points.extend_from_slice(&row[..d]);
        weights.push(weight);
    }
    DiscreteMeasure::new(d, points, weights)
}

/// Reads a synthetic CSV back onto `grid`; every row must be a grid point.
pub fn read_synthetic(path: &Path, grid: &Grid) -> Result<SyntheticDataset> {
    let d = grid.dim();
    let table = read_table(path)?;
    let mut counts = vec![0u64; grid.num_cells()];
    for (i, row) in table.rows.iter().enumerate() {
        let (coords, count) = match row.len() {
            n if n == d => (&row[..], 1.0),
            n if n == d + 1 => (&row[..d], row[d]),
            n => return Err(Error::invalid(format!("row {i} has {n} columns"))),
        };
        let cell = grid.nearest_cell(coords);
        if grid.point(cell) != coords || count < 0.0 || count.fract() != 0.0 {
            return Err(Error::invalid(format!("row {i} is not a grid point with an integer count")));
        }
        counts[cell] += count as u64;
    }
    SyntheticDataset::new(grid.clone(), counts)
}

/// Writes a dataset with a `x1..xd` header.
pub fn write_dataset(path: &Path, data: &Dataset, comments: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(coordinate_header(data.dim()))?;
    for row in data.rows() {
        writer.write_record(row.iter().map(f64::to_string))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes occupied cells with a `count` column, or one row per point when
/// `expand` is set. Floats use the shortest round-trip representation.
pub fn write_synthetic(path: &Path, synthetic: &SyntheticDataset, expand: bool, comments: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header = coordinate_header(synthetic.grid().dim());
    if !expand {
        header.push("count".to_string());
    }
    writer.write_record(&header)?;
    for (point, count) in synthetic.support() {
        let coords: Vec<String> = point.iter().map(f64::to_string).collect();
        if expand {
            for _ in 0..count {
                writer.write_record(&coords)?;
            }
        } else {
            writer.write_record(coords.iter().cloned().chain([count.to_string()]))?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes pretty-printed JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn coordinate_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn ingest_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let plain = write(&dir, "a.csv", "0.1,0.2\n-0.5,1\n0,0\n");
        let (data, _, _) = ingest(&plain, Some(2), Normalize::None).unwrap();
        assert_eq!(data.len(), 3);
        let headed = write(&dir, "b.csv", "# note\nx,y\n0.1,0.2\n");
        let (data, _, _) = ingest(&headed, None, Normalize::None).unwrap();
        assert_eq!(data.row(0), &[0.1, 0.2]);
    }

    #[test]
    fn ingest_rejects_out_of_range_and_bad_arity() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "0.1\n1.5\n");
        let err = ingest(&path, Some(1), Normalize::None).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        let path = write(&dir, "b.csv", "0.1,0.2\n0.3\n");
        assert!(ingest(&path, Some(2), Normalize::None).is_err());
        let path = write(&dir, "c.csv", "x,y\n");
        assert!(ingest(&path, None, Normalize::None).is_err());
    }

    #[test]
    fn min_max_maps_range_midpoint_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "0,3\n10,3\n5,3\n");
        let (data, ranges, _) = ingest(&path, Some(2), Normalize::MinMax).unwrap();
        assert_eq!(data.values(), &[-1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(ranges.unwrap()[0], ColumnRange { min: 0.0, max: 10.0 });
    }

    #[test]
    fn synthetic_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 4).unwrap();
        let counts: Vec<u64> = (0..16).map(|c| (c * 7 % 5) as u64).collect();
        let syn = SyntheticDataset::new(grid.clone(), counts).unwrap();
        for expand in [false, true] {
            let path = dir.path().join(format!("s{expand}.csv"));
            write_synthetic(&path, &syn, expand, &["manifest test".into()]).unwrap();
            assert_eq!(read_synthetic(&path, &grid).unwrap(), syn);
            if !expand {
                assert_eq!(read_measure(&path, 2).unwrap(), DiscreteMeasure::from(&syn));
            }
        }
    }
}
