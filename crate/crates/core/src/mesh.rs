//! Structured right-triangle meshes of the unit square.
//!
//! Vertex `(i, j)` sits at `(i/n, j/n)` and has index `i + j (n + 1)`. Every
//! cell is split along its lower-left to upper-right diagonal, so meshes with
//! `n_fine % n_coarse == 0` are nested and their P1 spaces are nested too.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::NodalField;

/// A side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    fn bit(self) -> u8 {
        match self {
            Side::Bottom => 1,
            Side::Right => 2,
            Side::Top => 4,
            Side::Left => 8,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bottom" => Ok(Side::Bottom),
            "right" => Ok(Side::Right),
            "top" => Ok(Side::Top),
            "left" => Ok(Side::Left),
            other => Err(Error::InvalidMesh(format!("unknown side {other:?}"))),
        }
    }
}

/// Boundary portion tag: `Gamma1` carries the Dirichlet/Robin condition,
/// `Gamma2` carries the controlled Neumann flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Gamma1 => "Gamma1",
            BoundaryTag::Gamma2 => "Gamma2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    /// Endpoints, oriented counterclockwise around the square.
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    pub side: Side,
}

/// Index sets splitting the P1 degrees of freedom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofPartition {
    pub num_dofs: usize,
    /// Vertices on Gamma1, sorted. Corner vertices shared with Gamma2 land here.
    pub gamma1_dofs: Vec<usize>,
    /// Complement of `gamma1_dofs`, sorted.
    pub free_dofs: Vec<usize>,
    /// Vertices incident to a Gamma2 edge, sorted. Indexes every `TraceField`.
    pub gamma2_trace_dofs: Vec<usize>,
    free_pos: Vec<Option<usize>>,
    trace_pos: Vec<Option<usize>>,
}

impl DofPartition {
    fn new(num_dofs: usize, edges: &[BoundaryEdge]) -> Self {
        let mut g1 = BTreeSet::new();
        let mut g2 = BTreeSet::new();
        for e in edges {
            let set = match e.tag {
                BoundaryTag::Gamma1 => &mut g1,
                BoundaryTag::Gamma2 => &mut g2,
            };
            set.extend(e.vertices);
        }
        let gamma1_dofs: Vec<usize> = g1.into_iter().collect();
        let gamma2_trace_dofs: Vec<usize> = g2.into_iter().collect();

        let mut is_g1 = vec![false; num_dofs];
        for &v in &gamma1_dofs {
            is_g1[v] = true;
        }
        let free_dofs: Vec<usize> = (0..num_dofs).filter(|&v| !is_g1[v]).collect();

        let mut free_pos = vec![None; num_dofs];
        for (k, &v) in free_dofs.iter().enumerate() {
            free_pos[v] = Some(k);
        }
        let mut trace_pos = vec![None; num_dofs];
        for (k, &v) in gamma2_trace_dofs.iter().enumerate() {
            trace_pos[v] = Some(k);
        }
        Self {
            num_dofs,
            gamma1_dofs,
            free_dofs,
            gamma2_trace_dofs,
            free_pos,
            trace_pos,
        }
    }

    /// Position of a vertex inside `free_dofs`.
    pub fn free_position(&self, vertex: usize) -> Option<usize> {
        self.free_pos[vertex]
    }

    /// Position of a vertex inside `gamma2_trace_dofs`.
    pub fn trace_position(&self, vertex: usize) -> Option<usize> {
        self.trace_pos[vertex]
    }

    pub fn is_gamma1(&self, vertex: usize) -> bool {
        self.free_pos[vertex].is_none()
    }

    pub fn num_trace(&self) -> usize {
        self.gamma2_trace_dofs.len()
    }
}

/// JSON form of a mesh: `{"n": 8, "gamma1_sides": ["bottom"]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub n: usize,
    pub gamma1_sides: Vec<Side>,
}

impl MeshConfig {
    pub fn build(&self) -> Result<Arc<Mesh>> {
        Mesh::structured(self.n, &self.gamma1_sides)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    gamma1_mask: u8,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    h: f64,
    dofs: DofPartition,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.gamma1_mask == other.gamma1_mask
    }
}

impl Mesh {
    /// Right-triangle grid with `n` cells per side; edges on `gamma1_sides` are
    /// tagged Gamma1, the rest Gamma2.
    pub fn structured(n: usize, gamma1_sides: &[Side]) -> Result<Arc<Mesh>> {
        if n == 0 {
            return Err(Error::InvalidMesh("n must be at least 1".into()));
        }
        let mask = gamma1_sides.iter().fold(0u8, |m, s| m | s.bit());
        if mask == 0 {
            return Err(Error::InvalidMesh("Gamma1 must contain at least one side".into()));
        }
        if mask == 0b1111 {
            return Err(Error::InvalidMesh("Gamma2 must contain at least one side".into()));
        }
        Ok(Arc::new(Self::build(n, mask)))
    }

    fn build(n: usize, mask: u8) -> Mesh {
        let np = n + 1;
        let idx = |i: usize, j: usize| i + j * np;
        let inv = 1.0 / n as f64;

        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * inv, j as f64 * inv]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let tag_of = |side: Side| {
            if mask & side.bit() != 0 {
                BoundaryTag::Gamma1
            } else {
                BoundaryTag::Gamma2
            }
        };
        let mut boundary_edges = Vec::with_capacity(4 * n);
        for side in Side::ALL {
            let tag = tag_of(side);
            for k in 0..n {
                let vertices = match side {
                    Side::Bottom => [idx(k, 0), idx(k + 1, 0)],
                    Side::Right => [idx(n, k), idx(n, k + 1)],
                    Side::Top => [idx(n - k, n), idx(n - k - 1, n)],
                    Side::Left => [idx(0, n - k), idx(0, n - k - 1)],
                };
                boundary_edges.push(BoundaryEdge { vertices, tag, side });
            }
        }

        let dofs = DofPartition::new(vertices.len(), &boundary_edges);
        Mesh {
            n,
            gamma1_mask: mask,
            vertices,
            triangles,
            boundary_edges,
            h: std::f64::consts::SQRT_2 / n as f64,
            dofs,
        }
    }

    /// Structured mesh with parameter `2n` and the same tagging.
    pub fn refine(&self) -> Arc<Mesh> {
        Arc::new(Self::build(2 * self.n, self.gamma1_mask))
    }

    /// Structured mesh with parameter `factor * n` and the same tagging.
    pub fn refine_by(&self, factor: usize) -> Result<Arc<Mesh>> {
        if factor == 0 {
            return Err(Error::InvalidMesh("refinement factor must be positive".into()));
        }
        Ok(Arc::new(Self::build(factor * self.n, self.gamma1_mask)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn dofs(&self) -> &DofPartition {
        &self.dofs
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn gamma1_sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|s| self.gamma1_mask & s.bit() != 0)
            .collect()
    }

    pub fn config(&self) -> MeshConfig {
        MeshConfig {
            n: self.n,
            gamma1_sides: self.gamma1_sides(),
        }
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Signed area of triangle `t`.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// True when every vertex of `self` is a vertex of `fine` with the same tagging.
    pub fn is_nested_in(&self, fine: &Mesh) -> bool {
        self.gamma1_mask == fine.gamma1_mask && fine.n % self.n == 0
    }

    pub fn check_nested(&self, fine: &Mesh) -> Result<usize> {
        if self.is_nested_in(fine) {
            Ok(fine.n / self.n)
        } else {
            Err(Error::NotNested {
                coarse: self.n,
                fine: fine.n,
            })
        }
    }

    /// Evaluates the P1 function with nodal values `coeffs` at `(x, y)`.
    /// Points outside the square are clamped onto it.
    pub fn eval_p1(&self, coeffs: &[f64], x: f64, y: f64) -> f64 {
        let (i, s) = self.cell_coord(x);
        let (j, t) = self.cell_coord(y);
        self.eval_in_cell(coeffs, i, j, s, t)
    }

    fn cell_coord(&self, x: f64) -> (usize, f64) {
        let n = self.n as f64;
        let mut fx = x.clamp(0.0, 1.0) * n;
        let r = fx.round();
        if (fx - r).abs() < 1e-10 {
            fx = r;
        }
        let i = (fx.floor() as usize).min(self.n - 1);
        (i, fx - i as f64)
    }

    fn eval_in_cell(&self, c: &[f64], i: usize, j: usize, s: f64, t: f64) -> f64 {
        // weight form: bit-exact at vertices
        self.cell_weights(i, j, s, t).iter().map(|&(v, w)| w * c[v]).sum()
    }

    /// Coarse vertices and weights whose combination gives the P1 value at
    /// local cell coordinates `(s, t)`.
    fn cell_weights(&self, i: usize, j: usize, s: f64, t: f64) -> [(usize, f64); 3] {
        let np = self.n + 1;
        let v00 = i + j * np;
        let v11 = i + 1 + (j + 1) * np;
        if t <= s {
            [(v00, 1.0 - s), (i + 1 + j * np, s - t), (v11, t)]
        } else {
            [(v00, 1.0 - t), (i + (j + 1) * np, t - s), (v11, s)]
        }
    }

    /// Applies the transpose of the prolongation `self -> fine` to a vector of
    /// fine-mesh nodal values.
    pub fn prolongation_transpose(&self, fine: &Mesh, fine_vec: &[f64]) -> Vec<f64> {
        let ratio = fine.n / self.n;
        let mut out = vec![0.0; self.num_vertices()];
        let nf = fine.n;
        for jf in 0..=nf {
            let (j, t) = split_index(jf, ratio, self.n);
            for if_ in 0..=nf {
                let (i, s) = split_index(if_, ratio, self.n);
                let value = fine_vec[if_ + jf * (nf + 1)];
                for (v, w) in self.cell_weights(i, j, s, t) {
                    out[v] += w * value;
                }
            }
        }
        out
    }

    /// Plain-text node/element listing for debugging.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# structured mesh n={} h={:.17e}", self.n, self.h);
        let _ = writeln!(out, "nodes {}", self.vertices.len());
        for (k, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "{k} {:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(out, "elements {}", self.triangles.len());
        for (k, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{k} {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(
                out,
                "{} {} {} {:?}",
                e.vertices[0],
                e.vertices[1],
                e.tag.name(),
                e.side
            );
        }
        out
    }
}

/// Nodal interpolant: coefficient `i` is `f(vertex_i)`.
pub fn interpolate_nodal<F>(f: F, mesh: &Arc<Mesh>) -> Result<NodalField>
where
    F: Fn(f64, f64) -> f64,
{
    let mut coeffs = Vec::with_capacity(mesh.num_vertices());
    for &[x, y] in mesh.vertices() {
        let value = f(x, y);
        if !value.is_finite() {
            return Err(Error::NonFinite { value, x, y });
        }
        coeffs.push(value);
    }
    NodalField::new(mesh.clone(), coeffs)
}

/// Represents the coarse P1 function exactly on a nested finer mesh.
pub fn prolongate(coarse: &NodalField, fine_mesh: &Arc<Mesh>) -> Result<NodalField> {
    let coarse_mesh = coarse.mesh();
    let ratio = coarse_mesh.check_nested(fine_mesh)?;
    if ratio == 1 {
        return Ok(coarse.clone());
    }
    let nf = fine_mesh.n();
    let c = coarse.coeffs();
    let mut out = Vec::with_capacity(fine_mesh.num_vertices());
    for jf in 0..=nf {
        let (j, t) = split_index(jf, ratio, coarse_mesh.n());
        for if_ in 0..=nf {
            let (i, s) = split_index(if_, ratio, coarse_mesh.n());
            out.push(coarse_mesh.eval_in_cell(c, i, j, s, t));
        }
    }
    NodalField::new(fine_mesh.clone(), out)
}

fn split_index(fine: usize, ratio: usize, n_coarse: usize) -> (usize, f64) {
    let cell = (fine / ratio).min(n_coarse - 1);
    let rem = fine - cell * ratio;
    (cell, rem as f64 / ratio as f64)
}
