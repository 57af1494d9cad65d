//! The regular grid over `[-1, 1]^d` and rounding of raw data onto it.

use crate::basis::checked_pow;
use crate::error::{Error, Result};

/// Default cap on the number of grid cells `r^d`.
pub const DEFAULT_GRID_CAP: u128 = 1 << 22;

/// Regular grid `{-1, -1+Δ, …, 1-Δ}^d` with `r` points per axis and `Δ = 2/r`.
///
/// Cells are enumerated row-major with axis 0 most significant, so cell `J`
/// sits at `(-1 + j_1 Δ, …, -1 + j_d Δ)` with zero-based `j_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    d: usize,
    r: usize,
    delta: f64,
}

/// Builds the grid for degree cap `m` and smoothness `k`: `r = m^k`, `Δ = 2 m^{-k}`.
pub fn build_grid(d: usize, m: usize, k: u32) -> Result<Grid> {
    Grid::for_mechanism(d, m, k, DEFAULT_GRID_CAP)
}

impl Grid {
    pub fn new(d: usize, r: usize) -> Result<Self> {
        Self::with_cap(d, r, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(d: usize, r: usize, cap: u128) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::invalid("grid needs d >= 1 and r >= 1"));
        }
        check_cells(d, r as u128, cap)?;
        Ok(Grid {
            d,
            r,
            delta: 2.0 / r as f64,
        })
    }

    pub fn for_mechanism(d: usize, m: usize, k: u32, cap: u128) -> Result<Self> {
        if d == 0 || m == 0 || k == 0 {
            return Err(Error::invalid("grid needs d, m, k >= 1"));
        }
        let r = checked_pow(m as u128, k as usize).ok_or(Error::CapExceeded {
            what: "grid cells r^d",
            requested: u128::MAX,
            cap,
        })?;
        check_cells(d, r, cap)?;
        Self::with_cap(d, r as usize, cap)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.r
    }

    /// Grid width `Δ`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_cells(&self) -> usize {
        self.r.pow(self.d as u32)
    }

    /// Coordinate of the zero-based axis position `j`.
    #[inline]
    pub fn coordinate(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.delta
    }

    pub fn axis_points(&self) -> Vec<f64> {
        (0..self.r).map(|j| self.coordinate(j)).collect()
    }

    /// Per-axis positions of cell `cell`.
    pub fn cell_position(&self, cell: usize) -> Vec<usize> {
        let mut pos = vec![0; self.d];
        let mut rem = cell;
        for slot in pos.iter_mut().rev() {
            *slot = rem % self.r;
            rem /= self.r;
        }
        pos
    }

    pub fn cell_index(&self, position: &[usize]) -> usize {
        position.iter().fold(0, |acc, &j| acc * self.r + j)
    }

    pub fn point(&self, cell: usize) -> Vec<f64> {
        self.cell_position(cell)
            .into_iter()
            .map(|j| self.coordinate(j))
            .collect()
    }

    /// Nearest axis position to `x`; equidistant values go to the lower position
    /// and values beyond the last point (`1 − Δ`) snap to it.
    pub fn nearest_axis_position(&self, x: f64) -> usize {
        let t = (x + 1.0) / self.delta;
        let lower = t.floor().clamp(0.0, (self.r - 1) as f64) as usize;
        if lower + 1 >= self.r {
            return self.r - 1;
        }
        let d_lower = (x - self.coordinate(lower)).abs();
        let d_upper = (self.coordinate(lower + 1) - x).abs();
        if d_upper < d_lower {
            lower + 1
        } else {
            lower
        }
    }

    /// Cell nearest to `x` in ℓ₂. Per-axis rounding is exact on an axis-aligned grid.
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        x.iter()
            .fold(0, |acc, &xi| acc * self.r + self.nearest_axis_position(xi))
    }
}

fn check_cells(d: usize, r: u128, cap: u128) -> Result<()> {
    match checked_pow(r, d) {
        Some(c) if c <= cap => Ok(()),
        other => Err(Error::CapExceeded {
            what: "grid cells r^d",
            requested: other.unwrap_or(u128::MAX),
            cap,
        }),
    }
}

/// A dataset `X = (x_1, …, x_n)` of points in `[-1, 1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    values: Vec<f64>,
}

impl Dataset {
    /// Validates `values` (row-major, `d` columns). Coordinates outside
    /// `[-1, 1]` are rejected with the offending row number (zero-based).
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dataset dimension must be at least 1"));
        }
        if values.is_empty() {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} values cannot be split into rows of {d}",
                values.len()
            )));
        }
        if let Some(pos) = values
            .iter()
            .position(|v| !v.is_finite() || !(-1.0..=1.0).contains(v))
        {
            return Err(Error::invalid(format!(
                "row {} column {} has value {} outside [-1, 1]",
                pos / d,
                pos % d,
                values[pos]
            )));
        }
        Ok(Dataset { d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(d, values)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Replaces row `i`, producing an adjacent dataset.
    pub fn with_row_replaced(&self, i: usize, row: &[f64]) -> Result<Self> {
        let mut values = self.values.clone();
        values[i * self.d..(i + 1) * self.d].copy_from_slice(row);
        Self::new(self.d, values)
    }
}

/// Rounds every row of `data` to its nearest grid point.
pub fn snap(data: &Dataset, grid: &Grid) -> Result<Dataset> {
    if data.dim() != grid.dim() {
        return Err(Error::invalid(format!(
            "dataset has dimension {} but grid has {}",
            data.dim(),
            grid.dim()
        )));
    }
    let values = data
        .values()
        .iter()
        .map(|&x| grid.coordinate(grid.nearest_axis_position(x)))
        .collect();
    Ok(Dataset { d: data.d, values })
}

/// Number of rows of `data` falling in each grid cell after rounding.
pub fn cell_counts(data: &Dataset, grid: &Grid) -> Vec<u64> {
    let mut counts = vec![0u64; grid.num_cells()];
    for row in data.rows() {
        counts[grid.nearest_cell(row)] += 1;
    }
    counts
}
