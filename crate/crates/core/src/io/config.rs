//! TOML run configuration.
//!
//! ```toml
//! [mesh]
//! nx = 128
//! ny = 64
//! lx_mm = 2.0
//! ly_mm = 1.0
//!
//! [material]
//! E_MPa = 12500.0
//! nu = 0.25
//! beta = 4.0        # graded mode only
//! p = 3.0
//! gamma_phi = 0.02
//!
//! [optimizer]
//! mode = "graded"   # or "single"
//! m = 0.45
//! kappa_phi = 4.0
//! kappa_chi = 4.0   # graded mode only
//! gamma_chi = 0.02  # graded mode only
//! tau = 1e-6
//! tol = 0.01
//! max_iter = 1000
//! phi0 = 0.5
//! chi0 = 0.5        # optional, graded mode only; defaults to phi0
//!
//! [case]
//! name = "cantilever"   # or "simply_supported" with load_factor
//!
//! [output]
//! directory = "out/cantilever_s2"
//! dump_every = 50       # 0: final fields only
//! ```
//!
//! Instead of `[case]`, boundary conditions can be listed explicitly with
//! `[[bc.dirichlet]]` (`boundary` and/or `nodes = [[i, j], ...]`, `components`,
//! `value`, optional `range_mm`) and `[[bc.neumann]]` (`boundary`, `traction`,
//! optional `range_mm`) tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkCase, CaseKind, DirichletSpec, Mode, NeumannSpec};
use crate::error::{Error, Result};
use crate::material::InterpolationSpec;
use crate::opt::OptConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub directory: PathBuf,
    /// Dump fields every this many iterations; 0 dumps only the final fields.
    pub dump_every: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            dump_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: BenchmarkCase,
    pub output: OutputSettings,
    /// Non-fatal remarks such as keys ignored in single-material mode.
    pub warnings: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    mesh: Option<RawMesh>,
    #[serde(skip_serializing_if = "Option::is_none")]
    material: Option<RawMaterial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<RawOptimizer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    case: Option<RawCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bc: Option<RawBc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    nx: Option<usize>,
    ny: Option<usize>,
    lx_mm: Option<f64>,
    ly_mm: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(rename = "E_MPa")]
    e_mpa: Option<f64>,
    nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    p: Option<f64>,
    gamma_phi: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    mode: Option<Mode>,
    m: Option<f64>,
    kappa_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_chi: Option<f64>,
    tau: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi0: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    load_factor: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    #[serde(default)]
    dirichlet: Vec<DirichletSpec>,
    #[serde(default)]
    neumann: Vec<NeumannSpec>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    dump_every: Option<usize>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of a `[section]` header, if present.
fn section_line(text: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    text.lines()
        .position(|l| l.split('#').next().unwrap_or("").trim() == header)
        .map(|i| i + 1)
}

/// Line defining `key` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let start = section_line(text, section)?;
    text.lines()
        .enumerate()
        .skip(start)
        .take_while(|(_, l)| !l.trim_start().starts_with('['))
        .find(|(_, l)| l.split('=').next().map(str::trim) == Some(key))
        .map(|(i, _)| i + 1)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    /// Line 0 means the problem has no single offending line.
    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        if line == 0 {
            Error::ConfigStructure(message.into())
        } else {
            Error::Config {
                line,
                message: message.into(),
            }
        }
    }

    fn missing_section(&self, section: &str) -> Error {
        self.error(0, format!("missing section [{section}]"))
    }

    fn require<T>(&self, section: &str, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| {
            let line = section_line(self.text, section).unwrap_or(0);
            self.error(line, format!("missing key '{key}' in section [{section}]"))
        })
    }

    fn check(&self, section: &str, key: &str, result: Result<()>) -> Result<()> {
        result.map_err(|e| {
            let line = key_line(self.text, section, key)
                .or_else(|| section_line(self.text, section))
                .unwrap_or(0);
            self.error(line, e.to_string())
        })
    }

    fn ignored(&self, warnings: &mut Vec<String>, section: &str, key: &str, present: bool) {
        if present {
            let line = key_line(self.text, section, key).unwrap_or(0);
            warnings.push(format!(
                "line {line}: key '{key}' in [{section}] is ignored in single-material mode"
            ));
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let ctx = Ctx { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of_offset(text, s.start));
        ctx.error(line, e.message().to_string())
    })?;

    let mesh = raw.mesh.ok_or_else(|| ctx.missing_section("mesh"))?;
    let material = raw.material.ok_or_else(|| ctx.missing_section("material"))?;
    let opt = raw.optimizer.ok_or_else(|| ctx.missing_section("optimizer"))?;
    let mut warnings = Vec::new();

    let nx = ctx.require("mesh", "nx", mesh.nx)?;
    let ny = ctx.require("mesh", "ny", mesh.ny)?;
    let lx = ctx.require("mesh", "lx_mm", mesh.lx_mm)?;
    let ly = ctx.require("mesh", "ly_mm", mesh.ly_mm)?;
    for (key, n) in [("nx", nx), ("ny", ny)] {
        ctx.check("mesh", key, if n == 0 { Err(Error::invalid(format!("{key} must be at least 1"))) } else { Ok(()) })?;
    }
    ctx.check("mesh", "lx_mm", positive("lx_mm", lx))?;
    ctx.check("mesh", "ly_mm", positive("ly_mm", ly))?;

    let mode = ctx.require("optimizer", "mode", opt.mode)?;
    let graded = mode == Mode::Graded;

    let young = ctx.require("material", "E_MPa", material.e_mpa)?;
    let poisson = ctx.require("material", "nu", material.nu)?;
    let penalty = ctx.require("material", "p", material.p)?;
    let gamma_phi = ctx.require("material", "gamma_phi", material.gamma_phi)?;
    let beta = if graded {
        ctx.require("material", "beta", material.beta)?
    } else {
        ctx.ignored(&mut warnings, "material", "beta", material.beta.is_some());
        1.0
    };
    ctx.check("material", "E_MPa", positive("E_MPa", young))?;
    ctx.check(
        "material",
        "nu",
        crate::material::lame_from_e_nu(young, poisson).map(|_| ()),
    )?;
    let interpolation = InterpolationSpec {
        penalty,
        gamma_phi,
        beta,
    };
    for (key, r) in [
        ("p", positive("p", penalty)),
        ("gamma_phi", positive("gamma_phi", gamma_phi)),
        ("beta", positive("beta", beta)),
    ] {
        ctx.check("material", key, r)?;
    }

    let optimizer = OptConfig {
        m: ctx.require("optimizer", "m", opt.m)?,
        kappa_phi: ctx.require("optimizer", "kappa_phi", opt.kappa_phi)?,
        tau: ctx.require("optimizer", "tau", opt.tau)?,
        tol: ctx.require("optimizer", "tol", opt.tol)?,
        max_iter: ctx.require("optimizer", "max_iter", opt.max_iter)?,
        phi0: ctx.require("optimizer", "phi0", opt.phi0)?,
    };
    ctx.check("optimizer", "m", optimizer.validate())?;
    let (kappa_chi, gamma_chi, chi0) = if graded {
        let k = ctx.require("optimizer", "kappa_chi", opt.kappa_chi)?;
        let g = ctx.require("optimizer", "gamma_chi", opt.gamma_chi)?;
        ctx.check("optimizer", "kappa_chi", positive("kappa_chi", k))?;
        ctx.check("optimizer", "gamma_chi", positive("gamma_chi", g))?;
        if let Some(c) = opt.chi0 {
            let ok = if (0.0..=optimizer.phi0).contains(&c) {
                Ok(())
            } else {
                Err(Error::invalid(format!("chi0 must be in [0, phi0], got {c}")))
            };
            ctx.check("optimizer", "chi0", ok)?;
        }
        (k, g, opt.chi0)
    } else {
        for (key, present) in [
            ("kappa_chi", opt.kappa_chi.is_some()),
            ("gamma_chi", opt.gamma_chi.is_some()),
            ("chi0", opt.chi0.is_some()),
        ] {
            ctx.ignored(&mut warnings, "optimizer", key, present);
        }
        (optimizer.kappa_phi, gamma_phi, None)
    };

    let kind = match (raw.case, raw.bc) {
        (Some(_), Some(_)) => {
            let line = section_line(text, "case").unwrap_or(0);
            return Err(ctx.error(line, "give either [case] or [bc], not both"));
        }
        (None, None) => return Err(ctx.error(0, "missing section [case] (or explicit [bc] entries)")),
        (Some(case), None) => {
            let name = ctx.require("case", "name", case.name)?;
            match name.as_str() {
                "cantilever" => {
                    if case.load_factor.is_some() {
                        let line = key_line(text, "case", "load_factor").unwrap_or(0);
                        return Err(ctx.error(line, "load_factor only applies to simply_supported"));
                    }
                    CaseKind::Cantilever
                }
                "simply_supported" => {
                    let load_factor = case.load_factor.unwrap_or(1.0);
                    ctx.check("case", "load_factor", positive("load_factor", load_factor))?;
                    CaseKind::SimplySupported { load_factor }
                }
                other => {
                    let line = key_line(text, "case", "name").unwrap_or(0);
                    return Err(ctx.error(
                        line,
                        format!("unknown case '{other}' (expected cantilever or simply_supported)"),
                    ));
                }
            }
        }
        (None, Some(bc)) => CaseKind::Custom {
            dirichlet: bc.dirichlet,
            neumann: bc.neumann,
        },
    };

    let output = raw.output.map_or_else(OutputSettings::default, |o| {
        let d = OutputSettings::default();
        OutputSettings {
            directory: o.directory.unwrap_or(d.directory),
            dump_every: o.dump_every.unwrap_or(d.dump_every),
        }
    });

    let case = BenchmarkCase {
        name: match &kind {
            CaseKind::Cantilever => "cantilever".to_string(),
            CaseKind::SimplySupported { .. } => "simply_supported".to_string(),
            CaseKind::Custom { .. } => "custom".to_string(),
        },
        kind,
        nx,
        ny,
        lx,
        ly,
        young,
        poisson,
        interpolation,
        mode,
        optimizer,
        kappa_chi,
        gamma_chi,
        chi0,
    };
    // boundary entries are checked against the mesh here so errors surface at load time
    let mesh = case.mesh()?;
    case.boundary_conditions(&mesh)
        .and_then(|bc| bc.validate(&mesh))
        .map_err(|e| ctx.error(section_line(text, "bc").or_else(|| section_line(text, "case")).unwrap_or(0), e.to_string()))?;

    Ok(RunConfig {
        case,
        output,
        warnings,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Render a case as a configuration document that [`parse_config`] reads back.
pub fn config_to_string(case: &BenchmarkCase, output: &OutputSettings) -> Result<String> {
    let graded = case.mode == Mode::Graded;
    let (case_section, bc) = match &case.kind {
        CaseKind::Cantilever => (
            Some(RawCase {
                name: Some("cantilever".into()),
                load_factor: None,
            }),
            None,
        ),
        CaseKind::SimplySupported { load_factor } => (
            Some(RawCase {
                name: Some("simply_supported".into()),
                load_factor: Some(*load_factor),
            }),
            None,
        ),
        CaseKind::Custom { dirichlet, neumann } => (
            None,
            Some(RawBc {
                dirichlet: dirichlet.clone(),
                neumann: neumann.clone(),
            }),
        ),
    };
    let raw = RawConfig {
        mesh: Some(RawMesh {
            nx: Some(case.nx),
            ny: Some(case.ny),
            lx_mm: Some(case.lx),
            ly_mm: Some(case.ly),
        }),
        material: Some(RawMaterial {
            e_mpa: Some(case.young),
            nu: Some(case.poisson),
            beta: graded.then_some(case.interpolation.beta),
            p: Some(case.interpolation.penalty),
            gamma_phi: Some(case.interpolation.gamma_phi),
        }),
        optimizer: Some(RawOptimizer {
            mode: Some(case.mode),
            m: Some(case.optimizer.m),
            kappa_phi: Some(case.optimizer.kappa_phi),
            kappa_chi: graded.then_some(case.kappa_chi),
            gamma_chi: graded.then_some(case.gamma_chi),
            tau: Some(case.optimizer.tau),
            tol: Some(case.optimizer.tol),
            max_iter: Some(case.optimizer.max_iter),
            phi0: Some(case.optimizer.phi0),
            chi0: if graded { case.chi0 } else { None },
        }),
        case: case_section,
        bc,
        output: Some(RawOutput {
            directory: Some(output.directory.clone()),
            dump_every: Some(output.dump_every),
        }),
    };
    toml::to_string_pretty(&raw).map_err(|e| Error::ConfigStructure(e.to_string()))
}
