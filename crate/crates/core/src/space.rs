//! Assembled P1 space on one mesh: all Gram matrices plus cached factors.

use std::sync::{Arc, Mutex, OnceLock};

use crate::assembly::{
    assemble_boundary_mass, assemble_mass, assemble_stiffness, trace_restrict, SymmetricSparseMatrix,
};
use crate::error::Result;
use crate::field::{same_mesh, NodalField, TraceField};
use crate::linsolve::BandedCholesky;
use crate::mesh::{BoundaryTag, Mesh};

/// Which Hilbert-space norm: `H = L²(Ω)`, `V = H¹(Ω)`, `Q = L²(Γ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    H,
    V,
    Q,
}

#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    stiffness: SymmetricSparseMatrix,
    mass: SymmetricSparseMatrix,
    energy: SymmetricSparseMatrix,
    gamma1_mass: SymmetricSparseMatrix,
    gamma2_mass: SymmetricSparseMatrix,
    trace_mass: SymmetricSparseMatrix,
    dirichlet: OnceLock<BandedCholesky>,
    robin: Mutex<Vec<(u64, Arc<BandedCholesky>)>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh)?;
        let mass = assemble_mass(&mesh)?;
        let energy = stiffness.add_scaled(1.0, &mass);
        let gamma1_mass = assemble_boundary_mass(&mesh, BoundaryTag::Gamma1)?;
        let gamma2_mass = assemble_boundary_mass(&mesh, BoundaryTag::Gamma2)?;
        let trace_mass = gamma2_mass.restrict(&mesh.dofs().gamma2_trace_dofs);
        Ok(Self {
            mesh,
            stiffness,
            mass,
            energy,
            gamma1_mass,
            gamma2_mass,
            trace_mass,
            dirichlet: OnceLock::new(),
            robin: Mutex::new(Vec::new()),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `a(u, v) = ∫ ∇u·∇v`.
    pub fn stiffness(&self) -> &SymmetricSparseMatrix {
        &self.stiffness
    }

    /// `(u, v)_H`.
    pub fn mass(&self) -> &SymmetricSparseMatrix {
        &self.mass
    }

    /// Gram matrix of the full H¹ inner product, `A + M_H`.
    pub fn energy(&self) -> &SymmetricSparseMatrix {
        &self.energy
    }

    pub fn gamma1_mass(&self) -> &SymmetricSparseMatrix {
        &self.gamma1_mass
    }

    pub fn gamma2_mass(&self) -> &SymmetricSparseMatrix {
        &self.gamma2_mass
    }

    /// Gamma2 boundary mass restricted to the trace dofs: the Q Gram matrix.
    pub fn trace_mass(&self) -> &SymmetricSparseMatrix {
        &self.trace_mass
    }

    /// Factor of the stiffness matrix restricted to the free dofs.
    pub fn dirichlet_factor(&self) -> Result<&BandedCholesky> {
        if let Some(f) = self.dirichlet.get() {
            return Ok(f);
        }
        let a = self.stiffness.restrict(&self.mesh.dofs().free_dofs);
        let f = BandedCholesky::factor(&a)?;
        Ok(self.dirichlet.get_or_init(|| f))
    }

    /// Factor of `A + α B_Γ1` on all dofs.
    pub fn robin_factor(&self, alpha: f64) -> Result<Arc<BandedCholesky>> {
        let key = alpha.to_bits();
        {
            let cache = self.robin.lock().expect("robin cache poisoned");
            if let Some((_, f)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(f.clone());
            }
        }
        let f = Arc::new(BandedCholesky::factor(&self.robin_matrix(alpha))?);
        let mut cache = self.robin.lock().expect("robin cache poisoned");
        if cache.len() >= 16 {
            cache.remove(0);
        }
        cache.push((key, f.clone()));
        Ok(f)
    }

    pub fn robin_matrix(&self, alpha: f64) -> SymmetricSparseMatrix {
        self.stiffness.add_scaled(alpha, &self.gamma1_mass)
    }

    pub fn norm(&self, v: &NodalField, which: NormKind) -> Result<f64> {
        same_mesh(&self.mesh, v.mesh())?;
        let c = v.coeffs();
        let sq = match which {
            NormKind::H => self.mass.quad_form(c),
            NormKind::V => self.energy.quad_form(c),
            NormKind::Q => self.gamma2_mass.quad_form(c),
        };
        Ok(sq.max(0.0).sqrt())
    }

    pub fn norm_h(&self, v: &NodalField) -> Result<f64> {
        self.norm(v, NormKind::H)
    }

    pub fn norm_v(&self, v: &NodalField) -> Result<f64> {
        self.norm(v, NormKind::V)
    }

    pub fn norm_q(&self, q: &TraceField) -> Result<f64> {
        same_mesh(&self.mesh, q.mesh())?;
        Ok(self.trace_mass.quad_form(q.coeffs()).max(0.0).sqrt())
    }

    pub fn inner_h(&self, u: &NodalField, v: &NodalField) -> Result<f64> {
        same_mesh(&self.mesh, u.mesh())?;
        same_mesh(&self.mesh, v.mesh())?;
        Ok(self.mass.bilinear(u.coeffs(), v.coeffs()))
    }

    pub fn inner_q(&self, p: &TraceField, q: &TraceField) -> Result<f64> {
        same_mesh(&self.mesh, p.mesh())?;
        same_mesh(&self.mesh, q.mesh())?;
        Ok(self.trace_mass.bilinear(p.coeffs(), q.coeffs()))
    }

    /// `‖u − v‖` for fields on nested meshes; both are compared on this space,
    /// which must be the finer of the two or a common refinement.
    pub fn distance(&self, u: &NodalField, v: &NodalField, which: NormKind) -> Result<f64> {
        let uf = u.prolongate(&self.mesh)?;
        let vf = v.prolongate(&self.mesh)?;
        self.norm(&(&uf - &vf), which)
    }

    pub fn distance_q(&self, p: &TraceField, q: &TraceField) -> Result<f64> {
        let pf = p.prolongate(&self.mesh)?;
        let qf = q.prolongate(&self.mesh)?;
        self.norm_q(&(&pf - &qf))
    }

    /// `∫_{Γ1} (u − c)²`.
    pub fn gamma1_deviation_sq(&self, u: &NodalField, c: f64) -> Result<f64> {
        same_mesh(&self.mesh, u.mesh())?;
        let d: Vec<f64> = u.coeffs().iter().map(|v| v - c).collect();
        Ok(self.gamma1_mass.quad_form(&d).max(0.0))
    }

    /// Load vector `((q, φ_i)_Q)_i`. `q` may live on this mesh or on a nested
    /// refinement of it; the pairing is exact either way.
    pub fn flux_load(&self, q: &TraceField) -> Result<Vec<f64>> {
        let qm = q.mesh();
        if Arc::ptr_eq(qm, &self.mesh) || **qm == *self.mesh {
            return Ok(self.gamma2_mass.matvec(q.extend_by_zero().coeffs()));
        }
        self.mesh.check_nested(qm)?;
        let fine_b2 = assemble_boundary_mass(qm, BoundaryTag::Gamma2)?;
        let fine_load = fine_b2.matvec(q.extend_by_zero().coeffs());
        Ok(self.mesh.prolongation_transpose(qm, &fine_load))
    }

    pub fn trace(&self, v: &NodalField) -> Result<TraceField> {
        same_mesh(&self.mesh, v.mesh())?;
        Ok(trace_restrict(v))
    }
}

/// `‖q‖²_Q` computed on the mesh the trace lives on.
pub fn trace_norm_sq(q: &TraceField) -> f64 {
    let mesh = q.mesh();
    let dofs = mesh.dofs();
    let c = q.coeffs();
    let mut total = 0.0;
    for e in mesh.edges_with_tag(BoundaryTag::Gamma2) {
        let [a, b] = e.vertices.map(|v| c[dofs.trace_position(v).expect("Gamma2 vertex")]);
        let [pa, pb] = e.vertices.map(|v| mesh.vertices()[v]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        total += len / 3.0 * (a * a + a * b + b * b);
    }
    total
}
