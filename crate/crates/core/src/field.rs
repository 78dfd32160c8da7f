use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{prolongate, Mesh};

/// Nodal coefficients of a P1 function on a mesh.
#[derive(Debug, Clone)]
pub struct NodalField {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        check_coeffs(coeffs.len(), mesh.num_vertices(), &coeffs)?;
        Ok(Self { mesh, coeffs })
    }

    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: mesh.clone(),
            coeffs: vec![0.0; mesh.num_vertices()],
        }
    }

    pub fn constant(mesh: &Arc<Mesh>, value: f64) -> Self {
        Self {
            mesh: mesh.clone(),
            coeffs: vec![value; mesh.num_vertices()],
        }
    }

    pub(crate) fn from_raw(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), mesh.num_vertices());
        Self { mesh, coeffs }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value of the P1 function at an arbitrary point of the square.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.mesh.eval_p1(&self.coeffs, x, y)
    }

    pub fn same_mesh(&self, other: &NodalField) -> Result<()> {
        same_mesh(&self.mesh, &other.mesh)
    }

    pub fn prolongate(&self, fine: &Arc<Mesh>) -> Result<NodalField> {
        prolongate(self, fine)
    }

    pub fn scaled(&self, s: f64) -> NodalField {
        Self::from_raw(self.mesh.clone(), self.coeffs.iter().map(|c| s * c).collect())
    }

    pub fn axpy(&self, a: f64, other: &NodalField) -> Result<NodalField> {
        self.same_mesh(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self::from_raw(self.mesh.clone(), coeffs))
    }
}

/// Nodal coefficients of a P1 function on the Gamma2 edge mesh, indexed by
/// `DofPartition::gamma2_trace_dofs`.
#[derive(Debug, Clone)]
pub struct TraceField {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

impl TraceField {
    pub fn new(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        check_coeffs(coeffs.len(), mesh.dofs().num_trace(), &coeffs)?;
        Ok(Self { mesh, coeffs })
    }

    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: mesh.clone(),
            coeffs: vec![0.0; mesh.dofs().num_trace()],
        }
    }

    pub fn constant(mesh: &Arc<Mesh>, value: f64) -> Self {
        Self {
            mesh: mesh.clone(),
            coeffs: vec![value; mesh.dofs().num_trace()],
        }
    }

    /// Trace values sampled from `f` at the Gamma2 vertices.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(f: F, mesh: &Arc<Mesh>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(mesh.dofs().num_trace());
        for &v in &mesh.dofs().gamma2_trace_dofs {
            let [x, y] = mesh.vertices()[v];
            let value = f(x, y);
            if !value.is_finite() {
                return Err(Error::NonFinite { value, x, y });
            }
            coeffs.push(value);
        }
        Ok(Self {
            mesh: mesh.clone(),
            coeffs,
        })
    }

    pub(crate) fn from_raw(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), mesh.dofs().num_trace());
        Self { mesh, coeffs }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nodal field equal to this trace on Gamma2 vertices and zero elsewhere.
    pub fn extend_by_zero(&self) -> NodalField {
        let mut coeffs = vec![0.0; self.mesh.num_vertices()];
        for (&v, &c) in self.mesh.dofs().gamma2_trace_dofs.iter().zip(&self.coeffs) {
            coeffs[v] = c;
        }
        NodalField::from_raw(self.mesh.clone(), coeffs)
    }

    /// Same P1 trace on a nested finer mesh.
    pub fn prolongate(&self, fine: &Arc<Mesh>) -> Result<TraceField> {
        let ext = prolongate(&self.extend_by_zero(), fine)?;
        Ok(crate::assembly::trace_restrict(&ext))
    }

    pub fn same_mesh(&self, other: &TraceField) -> Result<()> {
        same_mesh(&self.mesh, &other.mesh)
    }

    pub fn scaled(&self, s: f64) -> TraceField {
        Self::from_raw(self.mesh.clone(), self.coeffs.iter().map(|c| s * c).collect())
    }

    pub fn axpy(&self, a: f64, other: &TraceField) -> Result<TraceField> {
        self.same_mesh(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self::from_raw(self.mesh.clone(), coeffs))
    }
}

fn check_coeffs(len: usize, expected: usize, coeffs: &[f64]) -> Result<()> {
    if len != expected {
        return Err(Error::DimensionMismatch { expected, got: len });
    }
    if let Some((k, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFiniteCoefficient { index: k, value });
    }
    Ok(())
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::MeshMismatch {
            expected: a.n(),
            got: b.n(),
        })
    }
}

macro_rules! impl_ops {
    ($t:ty) => {
        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                self.axpy(1.0, rhs).expect("fields on different meshes")
            }
        }
        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                self.axpy(-1.0, rhs).expect("fields on different meshes")
            }
        }
        impl Mul<&$t> for f64 {
            type Output = $t;
            fn mul(self, rhs: &$t) -> $t {
                rhs.scaled(self)
            }
        }
    };
}

impl_ops!(NodalField);
impl_ops!(TraceField);
