//! Named benchmark cases (cantilever, simply supported beam) and parameter sweeps.

use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::{BoundaryConditions, Component, DirichletCondition, NeumannLoad};
use crate::error::{Error, Result};
use crate::fem::mesh::{BoundaryTag, StructuredQuadMesh};
use crate::material::{IsotropicElasticity, InterpolationSpec};
use crate::opt::{
    DesignProblem, GradedConfig, GradedOptimizer, Observer, OptConfig, RunRecord, SingleOptimizer,
};

/// Elements per millimetre of the cantilever meshes.
pub const CANTILEVER_ELEMENTS_PER_MM: usize = 64;
/// Traction on the cantilever load patch (N/mm).
pub const CANTILEVER_TRACTION: [f64; 2] = [0.0, -600.0];
/// Number of right-edge element edges, counted from the bottom, carrying the cantilever load.
pub const CANTILEVER_LOAD_EDGES: usize = 2;
/// Top-edge traction of the simply supported beam at load factor 1 (N/mm).
pub const SIMPLY_SUPPORTED_TRACTION: [f64; 2] = [0.0, -50.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Graded,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Graded => "graded",
        }
    }
}

/// Geometry and boundary conditions of a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseKind {
    /// Left edge clamped, downward traction on the lowest right-edge element edges.
    Cantilever,
    /// Half beam: symmetry on the left edge, roller at the bottom-right corner,
    /// distributed load on the top edge scaled by `load_factor`.
    SimplySupported { load_factor: f64 },
    /// Explicit boundary conditions.
    Custom {
        dirichlet: Vec<DirichletSpec>,
        neumann: Vec<NeumannSpec>,
    },
}

/// Dirichlet entry of an explicit boundary-condition list: a boundary (optionally
/// restricted to a coordinate range along it) and/or explicit `[i, j]` grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<[usize; 2]>,
    pub components: Vec<Component>,
    #[serde(default)]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_mm: Option<[f64; 2]>,
}

/// Constant traction on the edges of one boundary, optionally restricted to a
/// coordinate range along it (x for top/bottom, y for left/right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannSpec {
    pub boundary: BoundaryTag,
    pub traction: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_mm: Option<[f64; 2]>,
}

fn along(tag: BoundaryTag, p: [f64; 2]) -> f64 {
    match tag {
        BoundaryTag::Left | BoundaryTag::Right => p[1],
        BoundaryTag::Bottom | BoundaryTag::Top => p[0],
    }
}

fn in_range(range: Option<[f64; 2]>, t: f64) -> bool {
    const SLACK: f64 = 1e-9;
    range.map_or(true, |[a, b]| t >= a.min(b) - SLACK && t <= a.max(b) + SLACK)
}

/// Resolve explicit boundary-condition entries on `mesh`.
pub fn custom_bc(
    mesh: &StructuredQuadMesh,
    dirichlet: &[DirichletSpec],
    neumann: &[NeumannSpec],
) -> Result<BoundaryConditions> {
    let mut out = BoundaryConditions::default();
    for spec in dirichlet {
        if spec.components.is_empty() {
            return Err(Error::invalid("Dirichlet entry without components"));
        }
        if spec.boundary.is_none() && spec.nodes.is_empty() {
            return Err(Error::invalid("Dirichlet entry needs a boundary or nodes"));
        }
        let mut nodes = Vec::new();
        if let Some(tag) = spec.boundary {
            nodes.extend(
                mesh.nodes_on(tag)
                    .into_iter()
                    .filter(|&n| in_range(spec.range_mm, along(tag, mesh.node(n)))),
            );
        }
        for &[i, j] in &spec.nodes {
            if i > mesh.nx() || j > mesh.ny() {
                return Err(Error::invalid(format!("node [{i}, {j}] is outside the mesh")));
            }
            nodes.push(mesh.node_id(i, j));
        }
        if nodes.is_empty() {
            return Err(Error::invalid("Dirichlet entry selects no nodes"));
        }
        for node in nodes {
            for &component in &spec.components {
                out.dirichlet.push(DirichletCondition {
                    node,
                    component,
                    value: spec.value,
                });
            }
        }
    }
    for spec in neumann {
        let before = out.neumann.len();
        for &edge in mesh.edges_with_tag(spec.boundary) {
            let [a, b] = edge.nodes.map(|n| along(spec.boundary, mesh.node(n)));
            if in_range(spec.range_mm, a) && in_range(spec.range_mm, b) {
                out.neumann.push(NeumannLoad {
                    edge,
                    traction: spec.traction,
                });
            }
        }
        if out.neumann.len() == before {
            return Err(Error::invalid(format!(
                "Neumann entry on {} selects no edges",
                spec.boundary.name()
            )));
        }
    }
    Ok(out)
}

/// A fully specified run: mesh, material, boundary conditions and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub name: String,
    pub kind: CaseKind,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub young: f64,
    pub poisson: f64,
    pub interpolation: InterpolationSpec,
    pub mode: Mode,
    pub optimizer: OptConfig,
    pub kappa_chi: f64,
    pub gamma_chi: f64,
    pub chi0: Option<f64>,
}

impl BenchmarkCase {
    pub fn mesh(&self) -> Result<StructuredQuadMesh> {
        StructuredQuadMesh::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn boundary_conditions(&self, mesh: &StructuredQuadMesh) -> Result<BoundaryConditions> {
        Ok(match &self.kind {
            CaseKind::Cantilever => cantilever_bc(mesh),
            CaseKind::SimplySupported { load_factor } => simply_supported_bc(mesh, *load_factor),
            CaseKind::Custom { dirichlet, neumann } => custom_bc(mesh, dirichlet, neumann)?,
        })
    }

    pub fn problem(&self) -> Result<DesignProblem> {
        let mesh = self.mesh()?;
        let bc = self.boundary_conditions(&mesh)?;
        Ok(DesignProblem {
            material: IsotropicElasticity::new(self.young, self.poisson)?,
            interpolation: self.interpolation,
            bc,
            mesh,
        })
    }

    pub fn graded_config(&self) -> GradedConfig {
        GradedConfig {
            base: self.optimizer,
            kappa_chi: self.kappa_chi,
            gamma_chi: self.gamma_chi,
            chi0: self.chi0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.interpolation.validate()?;
        match self.mode {
            Mode::Single => self.optimizer.validate(),
            Mode::Graded => self.graded_config().validate(),
        }
    }

    /// Scale the element counts by `factor` (e.g. 0.5 for a half-resolution run).
    pub fn with_mesh_scale(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid(format!("mesh scale must be positive, got {factor}")));
        }
        self.nx = ((self.nx as f64 * factor).round() as usize).max(1);
        self.ny = ((self.ny as f64 * factor).round() as usize).max(1);
        Ok(self)
    }

    /// Set one named parameter; the names match the sweep axes and config keys.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(format!("{name} must be a positive integer, got {value}")))
            }
        };
        match name {
            "gamma_chi" => self.gamma_chi = value,
            "kappa_chi" => self.kappa_chi = value,
            "chi0" => self.chi0 = Some(value),
            "beta" => self.interpolation.beta = value,
            "p" => self.interpolation.penalty = value,
            "gamma_phi" => self.interpolation.gamma_phi = value,
            "kappa_phi" => self.optimizer.kappa_phi = value,
            "m" => self.optimizer.m = value,
            "tau" => self.optimizer.tau = value,
            "tol" => self.optimizer.tol = value,
            "phi0" => self.optimizer.phi0 = value,
            "max_iter" => self.optimizer.max_iter = count(value)?,
            "E_MPa" => self.young = value,
            "nu" => self.poisson = value,
            "nx" => self.nx = count(value)?,
            "ny" => self.ny = count(value)?,
            "load_factor" => match &mut self.kind {
                CaseKind::SimplySupported { load_factor } => *load_factor = value,
                _ => return Err(Error::invalid("load_factor only applies to simply supported cases")),
            },
            _ => return Err(Error::invalid(format!("unknown parameter '{name}'"))),
        }
        Ok(())
    }

    pub fn run(&self, observer: Option<&mut Observer<'_>>) -> Result<RunRecord> {
        self.validate()?;
        let problem = self.problem()?;
        Ok(match self.mode {
            Mode::Single => SingleOptimizer::new(&problem, &self.optimizer)?.run(observer),
            Mode::Graded => GradedOptimizer::new(&problem, &self.graded_config())?.run(observer),
        })
    }
}

pub fn cantilever_bc(mesh: &StructuredQuadMesh) -> BoundaryConditions {
    let dirichlet = mesh
        .nodes_on(BoundaryTag::Left)
        .into_iter()
        .flat_map(|node| {
            [Component::X, Component::Y].map(|component| DirichletCondition {
                node,
                component,
                value: 0.0,
            })
        })
        .collect();
    let mut right: Vec<_> = mesh.edges_with_tag(BoundaryTag::Right).copied().collect();
    right.sort_by(|a, b| {
        let ya = mesh.node(a.nodes[0])[1].min(mesh.node(a.nodes[1])[1]);
        let yb = mesh.node(b.nodes[0])[1].min(mesh.node(b.nodes[1])[1]);
        ya.total_cmp(&yb)
    });
    let neumann = right
        .into_iter()
        .take(CANTILEVER_LOAD_EDGES)
        .map(|edge| NeumannLoad {
            edge,
            traction: CANTILEVER_TRACTION,
        })
        .collect();
    BoundaryConditions { dirichlet, neumann }
}

pub fn simply_supported_bc(mesh: &StructuredQuadMesh, load_factor: f64) -> BoundaryConditions {
    let mut dirichlet: Vec<DirichletCondition> = mesh
        .nodes_on(BoundaryTag::Left)
        .into_iter()
        .map(|node| DirichletCondition {
            node,
            component: Component::X,
            value: 0.0,
        })
        .collect();
    for i in [mesh.nx() - 1, mesh.nx()] {
        dirichlet.push(DirichletCondition {
            node: mesh.node_id(i, 0),
            component: Component::Y,
            value: 0.0,
        });
    }
    let traction = SIMPLY_SUPPORTED_TRACTION.map(|g| load_factor * g);
    let neumann = mesh
        .edges_with_tag(BoundaryTag::Top)
        .map(|&edge| NeumannLoad { edge, traction })
        .collect();
    BoundaryConditions { dirichlet, neumann }
}

/// Cantilever of height 1 mm and length `slenderness` mm, graded mode with
/// `beta = 4`, `gamma_chi = 0.02`.
pub fn cantilever_case(slenderness: f64) -> Result<BenchmarkCase> {
    if !(slenderness > 0.0) {
        return Err(Error::invalid(format!("slenderness must be positive, got {slenderness}")));
    }
    let ly = 1.0;
    let lx = slenderness * ly;
    let per_mm = CANTILEVER_ELEMENTS_PER_MM as f64;
    Ok(BenchmarkCase {
        name: format!("cantilever_s{slenderness}"),
        kind: CaseKind::Cantilever,
        nx: ((lx * per_mm).round() as usize).max(1),
        ny: CANTILEVER_ELEMENTS_PER_MM,
        lx,
        ly,
        young: 12500.0,
        poisson: 0.25,
        interpolation: InterpolationSpec {
            penalty: 3.0,
            gamma_phi: 0.02,
            beta: 4.0,
        },
        mode: Mode::Graded,
        optimizer: OptConfig {
            m: 0.45,
            kappa_phi: 4.0,
            tau: 1e-6,
            tol: 0.01,
            max_iter: 1000,
            phi0: 0.5,
        },
        kappa_chi: 4.0,
        gamma_chi: 0.02,
        chi0: None,
    })
}

/// Half of a simply supported beam, 100 mm x 50 mm on a 128 x 64 mesh.
pub fn simply_supported_case(load_factor: f64, beta: f64) -> Result<BenchmarkCase> {
    if !(load_factor > 0.0) {
        return Err(Error::invalid(format!("load factor must be positive, got {load_factor}")));
    }
    Ok(BenchmarkCase {
        name: format!("simply_supported_k{load_factor}_b{beta}"),
        kind: CaseKind::SimplySupported { load_factor },
        nx: 128,
        ny: 64,
        lx: 100.0,
        ly: 50.0,
        young: 2300.0,
        poisson: 0.35,
        interpolation: InterpolationSpec {
            penalty: 3.0,
            gamma_phi: 0.01,
            beta,
        },
        mode: Mode::Graded,
        optimizer: OptConfig {
            m: 0.4,
            kappa_phi: 1.0,
            tau: 1e-6,
            tol: 0.01,
            max_iter: 1000,
            phi0: 0.5,
        },
        kappa_chi: 1.0,
        gamma_chi: 0.01,
        chi0: None,
    })
}

/// Names accepted by [`named_case`].
pub const CASE_NAMES: [&str; 9] = [
    "cantilever_s1",
    "cantilever_s2",
    "cantilever_s4",
    "cantilever_s2_dense",
    "simply_supported",
    "simply_supported_b1",
    "simply_supported_b4",
    "simply_supported_k2",
    "simply_supported_k3",
];

pub fn named_case(name: &str) -> Result<BenchmarkCase> {
    let mut case = match name {
        "cantilever_s1" => cantilever_case(1.0)?,
        "cantilever_s2" => cantilever_case(2.0)?,
        "cantilever_s4" => cantilever_case(4.0)?,
        "cantilever_s2_dense" => {
            let mut case = cantilever_case(2.0)?;
            case.mode = Mode::Single;
            // grading parameters are inert in single-material runs
            case.interpolation.beta = 1.0;
            case
        }
        "simply_supported" => simply_supported_case(1.0, 3.0)?,
        "simply_supported_b1" => simply_supported_case(1.0, 1.0)?,
        "simply_supported_b4" => simply_supported_case(1.0, 4.0)?,
        "simply_supported_k2" => simply_supported_case(2.0, 3.0)?,
        "simply_supported_k3" => simply_supported_case(3.0, 3.0)?,
        _ => {
            return Err(Error::invalid(format!(
                "unknown case '{name}'; known cases: {}",
                CASE_NAMES.join(", ")
            )))
        }
    };
    case.name = name.to_string();
    Ok(case)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub compliance: f64,
    pub m_chi: f64,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub case: String,
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

/// One independent run per value of `axis`; failures are recorded per row.
pub fn run_sweep(template: &BenchmarkCase, axis: &str, values: &[f64]) -> Result<SweepResult> {
    run_sweep_with(template, axis, values, |_, _, _| {})
}

/// [`run_sweep`] with a callback receiving each value, its case and its run record.
/// Runs execute in parallel; rows keep the order of `values`.
pub fn run_sweep_with<F>(template: &BenchmarkCase, axis: &str, values: &[f64], on_run: F) -> Result<SweepResult>
where
    F: Fn(f64, &BenchmarkCase, &RunRecord) + Sync,
{
    if values.is_empty() {
        return Err(Error::invalid("a sweep needs at least one value"));
    }
    // reject unknown axes before spending time on runs
    template.clone().set_param(axis, values[0])?;

    let rows = values
        .par_iter()
        .map(|&value| {
            let start = Instant::now();
            let mut case = template.clone();
            let outcome = case.set_param(axis, value).and_then(|_| case.run(None));
            let wall_time_s = start.elapsed().as_secs_f64();
            let row = match outcome {
                Ok(record) => {
                    on_run(value, &case, &record);
                    SweepRow {
                        value,
                        compliance: record.final_compliance,
                        m_chi: record.final_m_chi(),
                        converged: record.converged(),
                        iterations: record.iterations(),
                        wall_time_s,
                        error: record.failure.clone(),
                    }
                }
                Err(e) => SweepRow {
                    value,
                    compliance: f64::NAN,
                    m_chi: f64::NAN,
                    converged: false,
                    iterations: 0,
                    wall_time_s,
                    error: Some(e.to_string()),
                },
            };
            info!(
                "{axis} = {value}: compliance {:.4}, m_chi {:.4}, converged {}",
                row.compliance, row.m_chi, row.converged
            );
            row
        })
        .collect();
    Ok(SweepResult {
        case: template.name.clone(),
        axis: axis.to_string(),
        rows,
    })
}
