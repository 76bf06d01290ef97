//! 8-bit grayscale PNG rasters of nodal fields: one pixel per node, row 0 at the top.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};

/// `round(255 v)` with halves rounded up; `v` is clamped to `[0, 1]` first.
pub fn gray_level(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u8
}

/// Image of a row-major nodal field (`y = 0` row first in `values`).
pub fn field_image(nodes_x: usize, nodes_y: usize, values: &[f64]) -> Result<GrayImage> {
    if values.len() != nodes_x * nodes_y {
        return Err(Error::DimensionMismatch {
            expected: nodes_x * nodes_y,
            actual: values.len(),
        });
    }
    let (w, h) = (nodes_x as u32, nodes_y as u32);
    Ok(GrayImage::from_fn(w, h, |px, py| {
        let j = (h - 1 - py) as usize;
        image::Luma([gray_level(values[j * nodes_x + px as usize])])
    }))
}

pub fn write_field_png(path: &Path, nodes_x: usize, nodes_y: usize, values: &[f64]) -> Result<()> {
    field_image(nodes_x, nodes_y, values)?
        .save(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
