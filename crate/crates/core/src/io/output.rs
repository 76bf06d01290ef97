//! Run artifacts: `log.csv`, field dumps and grayscale rasters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::dump::FieldDump;
use super::infill::csv_error;
use super::raster::write_field_png;
use crate::bench::SweepResult;
use crate::error::{Error, Result};
use crate::fem::mesh::StructuredQuadMesh;
use crate::opt::{IterationRecord, RunRecord};

/// Column order of `log.csv`.
pub const LOG_COLUMNS: [&str; 6] = ["iter", "compliance", "volume", "m_chi", "delta_phi", "delta_chi"];

#[derive(Serialize)]
struct LogRow {
    iter: usize,
    compliance: f64,
    volume: f64,
    m_chi: f64,
    delta_phi: f64,
    delta_chi: Option<f64>,
}

impl From<&IterationRecord> for LogRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            compliance: r.compliance,
            volume: r.volume,
            m_chi: r.m_chi,
            delta_phi: r.delta_phi,
            delta_chi: r.delta_chi,
        }
    }
}

pub fn write_log_csv(path: &Path, rows: &[IterationRecord]) -> Result<()> {
    // explicit header so an empty log still names its columns
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(LOG_COLUMNS).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(LogRow::from(row)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sweep table with columns value, compliance, m_chi, converged, iterations, wall_time_s, error.
pub fn write_sweep_csv<W: std::io::Write>(out: W, sweep: &SweepResult) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in &sweep.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes run artifacts into one directory; use [`RunWriter::observe`] as the
/// optimizer observer for periodic dumps and [`RunWriter::finish`] at the end.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    dump_every: usize,
    mesh: StructuredQuadMesh,
    error: Option<Error>,
}

impl RunWriter {
    pub fn create(dir: &Path, dump_every: usize, mesh: &StructuredQuadMesh) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            dump_every,
            mesh: mesh.clone(),
            error: None,
        })
    }

    pub fn directory(&self) -> &Path {
        &self.dir
    }

    fn dump(&self, name: &str, iteration: usize, values: &[f64], suffix: &str) -> Result<()> {
        let dump = FieldDump::new(&self.mesh, name, iteration, values)?;
        dump.write(&self.dir.join(format!("{name}_{suffix}.txt")))
    }

    /// Periodic dumps; the first write error is kept and reported by `finish`.
    pub fn observe(&mut self, row: &IterationRecord, phi: &[f64], chi: Option<&[f64]>) {
        if self.error.is_some() || self.dump_every == 0 || row.iter % self.dump_every != 0 {
            return;
        }
        let suffix = format!("{:05}", row.iter);
        let mut result = self.dump("phi", row.iter, phi, &suffix);
        if let (Ok(()), Some(chi)) = (&result, chi) {
            result = self.dump("chi", row.iter, chi, &suffix);
        }
        if let Err(e) = result {
            self.error = Some(e);
        }
    }

    /// Log, final dumps (`phi_final.txt`, `chi_final.txt`) and rasters (`phi.png`, `chi.png`).
    pub fn finish(self, record: &RunRecord) -> Result<()> {
        if let Some(e) = self.error {
            return Err(e);
        }
        write_outputs(&self.dir, &self.mesh, record)
    }
}

pub fn write_outputs(dir: &Path, mesh: &StructuredQuadMesh, record: &RunRecord) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_log_csv(&dir.join("log.csv"), &record.rows)?;
    let iteration = record.iterations();
    let (nx, ny) = (mesh.nx() + 1, mesh.ny() + 1);
    let mut fields = vec![("phi", &record.phi)];
    if let Some(chi) = &record.chi {
        fields.push(("chi", chi));
    }
    for (name, values) in fields {
        FieldDump::new(mesh, name, iteration, values)?.write(&dir.join(format!("{name}_final.txt")))?;
        write_field_png(&dir.join(format!("{name}.png")), nx, ny, values)?;
    }
    Ok(())
}
