use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the rectangular domain a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        BoundaryTag::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// A single element edge on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Regular grid of bilinear quadrilaterals on `[0, lx] x [0, ly]`.
///
/// Nodes are numbered row-major with x running fastest: node `(i, j)` has id
/// `j * (nx + 1) + i`. Element `(i, j)` has id `j * nx + i` and lists its
/// corners counter-clockwise starting at the lower-left one.
#[derive(Debug, Clone)]
pub struct StructuredQuadMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    boundary: Vec<BoundaryEdge>,
}

impl StructuredQuadMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "mesh needs at least one element per axis (got {nx} x {ny})"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::invalid(format!(
                "domain extents must be positive (got {lx} x {ly})"
            )));
        }

        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([i as f64 * hx, j as f64 * hy]);
            }
        }

        let row = nx + 1;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n0 = j * row + i;
                elements.push([n0, n0 + 1, n0 + row + 1, n0 + row]);
            }
        }

        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryEdge {
                nodes: [i, i + 1],
                tag: BoundaryTag::Bottom,
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge {
                nodes: [j * row + nx, (j + 1) * row + nx],
                tag: BoundaryTag::Right,
            });
        }
        for i in (0..nx).rev() {
            boundary.push(BoundaryEdge {
                nodes: [ny * row + i + 1, ny * row + i],
                tag: BoundaryTag::Top,
            });
        }
        for j in (0..ny).rev() {
            boundary.push(BoundaryEdge {
                nodes: [(j + 1) * row, j * row],
                tag: BoundaryTag::Left,
            });
        }

        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            coords,
            elements,
            boundary,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    /// Grid indices `(i, j)` of a node.
    pub fn node_index(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn node(&self, id: usize) -> [f64; 2] {
        self.coords[id]
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary.iter().filter(move |e| e.tag == tag)
    }

    /// Nodes on one side, ordered along the side in the direction of increasing coordinate.
    pub fn nodes_on(&self, tag: BoundaryTag) -> Vec<usize> {
        match tag {
            BoundaryTag::Left => (0..=self.ny).map(|j| self.node_id(0, j)).collect(),
            BoundaryTag::Right => (0..=self.ny).map(|j| self.node_id(self.nx, j)).collect(),
            BoundaryTag::Bottom => (0..=self.nx).map(|i| self.node_id(i, 0)).collect(),
            BoundaryTag::Top => (0..=self.nx).map(|i| self.node_id(i, self.ny)).collect(),
        }
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes;
        let (pa, pb) = (self.coords[a], self.coords[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    pub fn element_nodes(&self, e: usize) -> [[f64; 2]; 4] {
        self.elements[e].map(|n| self.coords[n])
    }
}
