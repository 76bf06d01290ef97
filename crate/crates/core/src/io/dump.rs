//! Plain-text nodal field dumps.
//!
//! ```text
//! # gradopt field dump
//! nodes_x 129
//! nodes_y 65
//! lx_mm 2
//! ly_mm 1
//! field phi
//! iteration 17
//! values
//! <nodes_x values of row j = 0>
//! ...
//! ```
//!
//! Values are written with the shortest representation that parses back to the
//! same `f64`, so a write-read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::mesh::StructuredQuadMesh;

const MAGIC: &str = "# gradopt field dump";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub nodes_x: usize,
    pub nodes_y: usize,
    pub lx: f64,
    pub ly: f64,
    pub field: String,
    pub iteration: usize,
    /// Row-major nodal values, x fastest, row 0 at `y = 0`.
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn new(mesh: &StructuredQuadMesh, field: &str, iteration: usize, values: &[f64]) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                actual: values.len(),
            });
        }
        if field.is_empty() || field.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid field name '{field}'")));
        }
        Ok(Self {
            nodes_x: mesh.nx() + 1,
            nodes_y: mesh.ny() + 1,
            lx: mesh.lx(),
            ly: mesh.ly(),
            field: field.to_string(),
            iteration,
            values: values.to_vec(),
        })
    }

    pub fn mesh(&self) -> Result<StructuredQuadMesh> {
        if self.nodes_x < 2 || self.nodes_y < 2 {
            return Err(Error::invalid("a field dump needs at least 2 x 2 nodes"));
        }
        StructuredQuadMesh::new(self.nodes_x - 1, self.nodes_y - 1, self.lx, self.ly)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nodes_x + i]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20 + 128);
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "nodes_x {}", self.nodes_x);
        let _ = writeln!(out, "nodes_y {}", self.nodes_y);
        let _ = writeln!(out, "lx_mm {}", self.lx);
        let _ = writeln!(out, "ly_mm {}", self.ly);
        let _ = writeln!(out, "field {}", self.field);
        let _ = writeln!(out, "iteration {}", self.iteration);
        out.push_str("values\n");
        for row in self.values.chunks(self.nodes_x.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse a dump; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let fail = |line: usize, msg: String| Error::Format {
            path: origin.to_path_buf(),
            message: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(fail(1, format!("expected '{MAGIC}'"))),
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines.next().ok_or_else(|| fail(0, format!("missing '{key}' line")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(fail(n, format!("expected '{key} <value>'"))),
            }
        };
        let num = |(n, v): (usize, String)| -> Result<usize> {
            v.parse().map_err(|_| fail(n, format!("invalid integer '{v}'")))
        };
        let real = |(n, v): (usize, String)| -> Result<f64> {
            v.parse().map_err(|_| fail(n, format!("invalid number '{v}'")))
        };
        let nodes_x = num(header("nodes_x")?)?;
        let nodes_y = num(header("nodes_y")?)?;
        let lx = real(header("lx_mm")?)?;
        let ly = real(header("ly_mm")?)?;
        let field = header("field")?.1;
        let iteration = num(header("iteration")?)?;
        match lines.next() {
            Some((_, "values")) => {}
            Some((n, _)) => return Err(fail(n, "expected 'values'".into())),
            None => return Err(fail(0, "missing 'values' line".into())),
        }
        let expected = nodes_x * nodes_y;
        let mut values = Vec::with_capacity(expected);
        for (n, line) in lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| fail(n, format!("invalid value '{tok}'")))?);
            }
        }
        if values.len() != expected {
            return Err(fail(
                0,
                format!("expected {expected} values ({nodes_x} x {nodes_y}), found {}", values.len()),
            ));
        }
        Ok(Self {
            nodes_x,
            nodes_y,
            lx,
            ly,
            field,
            iteration,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
