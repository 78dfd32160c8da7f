//! P1 bilinear forms and load vectors.
//!
//! Every P1xP1 integral is assembled from closed-form local matrices. General
//! callables go through the three-edge-midpoint rule, exact up to degree 2.

use std::fmt::Write as _;

use crate::error::{Error, Result};
pub use crate::field::{NodalField, TraceField};
use crate::mesh::{BoundaryTag, Mesh, Side};

/// Symmetric matrix in compressed-row form; both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricSparseMatrix {
    /// Sums duplicate entries in insertion order, so the result does not depend
    /// on anything but the triplet sequence.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                while let Some(&(k, w)) = iter.peek() {
                    if k != j {
                        break;
                    }
                    v += w;
                    iter.next();
                }
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let triplets: Vec<_> = (0..dim).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(dim, &triplets)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diag.len(), &triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Principal submatrix on `index`, in the order given.
    pub fn restrict(&self, index: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in index.iter().enumerate() {
            pos[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &i) in index.iter().enumerate() {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    triplets.push((k, pos[j], v));
                }
            }
        }
        Self::from_triplets(index.len(), &triplets)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        Self::from_triplets(self.dim, &triplets)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Coordinate-triplet listing (`i j value`, one per line).
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dim={} nnz={}", self.dim, self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let _ = writeln!(out, "{i} {j} {v:.17e}");
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn triangle_geometry(mesh: &Mesh, t: usize) -> Result<([[f64; 2]; 3], f64)> {
    let p = mesh.triangles()[t].map(|v| mesh.vertices()[v]);
    let area = mesh.signed_area(t);
    if area <= 0.0 || !area.is_finite() {
        return Err(Error::DegenerateTriangle(t));
    }
    Ok((p, area))
}

/// Local stiffness matrix of a P1 triangle.
pub fn local_stiffness(p: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

/// Local mass matrix `(area/12) [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Local edge mass matrix `(len/6) [[2,1],[1,2]]`.
pub fn local_edge_mass(len: f64) -> [[f64; 2]; 2] {
    [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]]
}

fn scatter3(triplets: &mut Vec<(usize, usize, f64)>, tri: [usize; 3], local: [[f64; 3]; 3]) {
    for a in 0..3 {
        for b in 0..3 {
            triplets.push((tri[a], tri[b], local[a][b]));
        }
    }
}

pub fn assemble_stiffness(mesh: &Mesh) -> Result<SymmetricSparseMatrix> {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (p, _) = triangle_geometry(mesh, t)?;
        scatter3(&mut triplets, tri, local_stiffness(&p));
    }
    Ok(SymmetricSparseMatrix::from_triplets(mesh.num_vertices(), &triplets))
}

pub fn assemble_mass(mesh: &Mesh) -> Result<SymmetricSparseMatrix> {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (_, area) = triangle_geometry(mesh, t)?;
        scatter3(&mut triplets, tri, local_mass(area));
    }
    Ok(SymmetricSparseMatrix::from_triplets(mesh.num_vertices(), &triplets))
}

fn edge_length(mesh: &Mesh, e: [usize; 2]) -> f64 {
    let [a, b] = e.map(|v| mesh.vertices()[v]);
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Full-dimension boundary mass matrix of the edges carrying `tag`.
pub fn assemble_boundary_mass(mesh: &Mesh, tag: BoundaryTag) -> Result<SymmetricSparseMatrix> {
    let mut triplets = Vec::new();
    for e in mesh.edges_with_tag(tag) {
        let local = local_edge_mass(edge_length(mesh, e.vertices));
        for a in 0..2 {
            for b in 0..2 {
                triplets.push((e.vertices[a], e.vertices[b], local[a][b]));
            }
        }
    }
    if triplets.is_empty() {
        return Err(Error::EmptyTag(tag.name()));
    }
    Ok(SymmetricSparseMatrix::from_triplets(mesh.num_vertices(), &triplets))
}

/// `∫ f φ_i` by the three-edge-midpoint rule.
pub fn assemble_load<F>(mesh: &Mesh, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (p, area) = triangle_geometry(mesh, t)?;
        let w = area / 3.0;
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let (x, y) = (0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1]));
            let value = f(x, y);
            if !value.is_finite() {
                return Err(Error::NonFinite { value, x, y });
            }
            load[tri[a]] += 0.5 * w * value;
            load[tri[b]] += 0.5 * w * value;
        }
    }
    Ok(load)
}

/// `∫_{Γ} f φ_i dγ` over edges carrying `tag`, where `f` may depend on the
/// side (fluxes are discontinuous at corners). Three-point Gauss per edge.
pub fn assemble_boundary_load<F>(mesh: &Mesh, tag: BoundaryTag, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, Side) -> f64,
{
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut load = vec![0.0; mesh.num_vertices()];
    let mut any = false;
    for e in mesh.edges_with_tag(tag) {
        any = true;
        let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
        let len = edge_length(mesh, e.vertices);
        for (xi, w) in NODES.iter().zip(WEIGHTS) {
            let s = 0.5 * (1.0 + xi);
            let (x, y) = (a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]));
            let value = f(x, y, e.side);
            if !value.is_finite() {
                return Err(Error::NonFinite { value, x, y });
            }
            let wl = 0.5 * w * len * value;
            load[e.vertices[0]] += wl * (1.0 - s);
            load[e.vertices[1]] += wl * s;
        }
    }
    if !any {
        return Err(Error::EmptyTag(tag.name()));
    }
    Ok(load)
}

/// Restriction to the Gamma2 trace dofs.
pub fn trace_restrict(v: &NodalField) -> TraceField {
    let mesh = v.mesh();
    let coeffs = mesh
        .dofs()
        .gamma2_trace_dofs
        .iter()
        .map(|&i| v.coeffs()[i])
        .collect();
    TraceField::from_raw(mesh.clone(), coeffs)
}

/// `∫ (u_h - f)²` with the midpoint rule, matching the load quadrature.
pub fn squared_distance_h<F>(u: &NodalField, f: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let mesh = u.mesh();
    let c = u.coeffs();
    let mut total = 0.0;
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (p, area) = triangle_geometry(mesh, t)?;
        let mut s = 0.0;
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let (x, y) = (0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1]));
            let value = f(x, y);
            if !value.is_finite() {
                return Err(Error::NonFinite { value, x, y });
            }
            let d = 0.5 * (c[tri[a]] + c[tri[b]]) - value;
            s += d * d;
        }
        total += area / 3.0 * s;
    }
    Ok(total)
}

/// Degree-5 seven-point rule on the reference triangle: barycentric points and
/// weights normalised to sum to one.
fn seven_point_rule() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a1, a1, 1.0 - 2.0 * a1], w1),
        ([a1, 1.0 - 2.0 * a1, a1], w1),
        ([1.0 - 2.0 * a1, a1, a1], w1),
        ([a2, a2, 1.0 - 2.0 * a2], w2),
        ([a2, 1.0 - 2.0 * a2, a2], w2),
        ([1.0 - 2.0 * a2, a2, a2], w2),
    ]
}

/// Squared L2 and H1-seminorm errors of `u_h` against an exact smooth function.
/// Returns `(‖u - u_h‖²_H, |u - u_h|²_1)`.
pub fn exact_error_sq<F, G>(u: &NodalField, exact: F, grad: G) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> [f64; 2],
{
    let mesh = u.mesh();
    let c = u.coeffs();
    let rule = seven_point_rule();
    let (mut l2, mut h1) = (0.0, 0.0);
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (p, area) = triangle_geometry(mesh, t)?;
        // constant gradient of u_h on the triangle
        let mut gu = [0.0; 2];
        for i in 0..3 {
            let (j, m) = ((i + 1) % 3, (i + 2) % 3);
            let bi = p[j][1] - p[m][1];
            let ci = p[m][0] - p[j][0];
            gu[0] += c[tri[i]] * bi / (2.0 * area);
            gu[1] += c[tri[i]] * ci / (2.0 * area);
        }
        for (bary, w) in rule.iter() {
            let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
            let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
            let uh = bary[0] * c[tri[0]] + bary[1] * c[tri[1]] + bary[2] * c[tri[2]];
            let d = exact(x, y) - uh;
            let g = grad(x, y);
            l2 += w * area * d * d;
            h1 += w * area * ((g[0] - gu[0]).powi(2) + (g[1] - gu[1]).powi(2));
        }
    }
    Ok((l2, h1))
}
