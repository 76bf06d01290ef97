//! Mapping of a grading field onto a manufacturing grid of square cells, each
//! perforated by a centred hole whose area fraction is `1 - mean(chi)`.

use std::path::Path;

use serde::Serialize;

use super::dump::FieldDump;
use crate::error::{Error, Result};

/// Cells whose mean grading is at least this close to 1 are left solid.
pub const SOLID_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfillCell {
    pub i: usize,
    pub j: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
    pub mean_chi: f64,
    pub hole_width_mm: f64,
    pub hole_height_mm: f64,
}

impl InfillCell {
    /// Fraction of the cell that stays solid.
    pub fn solid_fraction(&self) -> f64 {
        1.0 - (self.hole_width_mm * self.hole_height_mm) / (self.width_mm * self.height_mm)
    }
}

/// Cells are `cell_mm` squares from the origin; the last column and row are
/// truncated when the domain is not a multiple of the cell size, and their holes
/// keep the cell's aspect ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfillGrid {
    pub cell_mm: f64,
    pub cells_x: usize,
    pub cells_y: usize,
    pub cells: Vec<InfillCell>,
}

impl InfillGrid {
    /// Area-weighted solid fraction of the whole grid.
    pub fn solid_fraction(&self) -> f64 {
        let (solid, total) = self.cells.iter().fold((0.0, 0.0), |(s, t), c| {
            let a = c.width_mm * c.height_mm;
            (s + a * c.solid_fraction(), t + a)
        });
        solid / total
    }

    /// CSV with one row per cell, header included.
    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for cell in &self.cells {
            w.serialize(cell)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for cell in &self.cells {
            w.serialize(cell).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn cell_count(length: f64, cell: f64) -> usize {
    // tolerate rounding so 2.0 / 0.25 gives 8 cells, not 9
    ((length / cell) - 1e-9).ceil().max(1.0) as usize
}

pub fn infill_map(chi: &FieldDump, cell_mm: f64) -> Result<InfillGrid> {
    let mesh = chi.mesh()?;
    let spacing = mesh.hx().max(mesh.hy());
    if !(cell_mm > 0.0) || cell_mm < 2.0 * spacing - 1e-12 {
        return Err(Error::invalid(format!(
            "cell size {cell_mm} mm must be at least two node spacings ({} mm)",
            2.0 * spacing
        )));
    }
    let cells_x = cell_count(mesh.lx(), cell_mm);
    let cells_y = cell_count(mesh.ly(), cell_mm);
    let mut cells = Vec::with_capacity(cells_x * cells_y);
    for cj in 0..cells_y {
        for ci in 0..cells_x {
            let x0 = ci as f64 * cell_mm;
            let y0 = cj as f64 * cell_mm;
            let x1 = (x0 + cell_mm).min(mesh.lx());
            let y1 = (y0 + cell_mm).min(mesh.ly());
            let tol = 1e-9 * spacing;
            let (mut sum, mut count) = (0.0, 0usize);
            for j in 0..chi.nodes_y {
                let y = j as f64 * mesh.hy();
                if y < y0 - tol || y > y1 + tol {
                    continue;
                }
                for i in 0..chi.nodes_x {
                    let x = i as f64 * mesh.hx();
                    if x >= x0 - tol && x <= x1 + tol {
                        sum += chi.value(i, j);
                        count += 1;
                    }
                }
            }
            let mean_chi = (sum / count as f64).clamp(0.0, 1.0);
            let scale = if mean_chi >= SOLID_THRESHOLD {
                0.0
            } else {
                (1.0 - mean_chi).max(0.0).sqrt()
            };
            cells.push(InfillCell {
                i: ci,
                j: cj,
                x_mm: x0,
                y_mm: y0,
                width_mm: x1 - x0,
                height_mm: y1 - y0,
                mean_chi,
                hole_width_mm: scale * (x1 - x0),
                hole_height_mm: scale * (y1 - y0),
            });
        }
    }
    Ok(InfillGrid {
        cell_mm,
        cells_x,
        cells_y,
        cells,
    })
}
