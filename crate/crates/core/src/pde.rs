//! State and adjoint solves for the Dirichlet-type family (`u = b` on Γ1)
//! and the Robin-type family (`∂u/∂n = α (b − u)` on Γ1).
//!
//! The control enters as `−(q, v)_Q`, so the physical flux on Γ2 is
//! `∂u/∂n = −q`.

use std::fmt;
use std::sync::Arc;

use crate::assembly::assemble_load;
use crate::error::{Error, Result};
use crate::field::{same_mesh, NodalField, TraceField};
use crate::space::FeSpace;

/// Scalar field on the unit square.
pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Problem data: internal energy `g`, target `z_d`, exterior value `b`,
/// control weight `M`, and the heat transfer coefficient `alpha` for the
/// Robin family (`None` selects the Dirichlet-type family).
#[derive(Clone)]
pub struct ProblemSpec {
    pub g: Field,
    pub z_d: Field,
    pub b: f64,
    pub m: f64,
    pub alpha: Option<f64>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("b", &self.b)
            .field("m", &self.m)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(g: Field, z_d: Field, b: f64, m: f64) -> Result<Self> {
        let spec = Self {
            g,
            z_d,
            b,
            m,
            alpha: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_fns<G, Z>(g: G, z_d: Z, b: f64, m: f64) -> Result<Self>
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Z: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(g), Arc::new(z_d), b, m)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let spec = Self {
            alpha: Some(alpha),
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dirichlet(&self) -> Self {
        Self {
            alpha: None,
            ..self.clone()
        }
    }

    pub fn with_m(&self, m: f64) -> Result<Self> {
        let spec = Self { m, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_target(&self, z_d: Field) -> Self {
        Self { z_d, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidProblem(format!("M must be positive, got {}", self.m)));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidProblem("b must be finite".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidProblem(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }

    fn require_alpha(&self) -> Result<f64> {
        self.alpha.ok_or(Error::MissingAlpha)
    }
}

/// Solves `A_ff w = rhs_f` and returns the full-length vector with zeros on Γ1.
fn solve_free(space: &FeSpace, rhs: &[f64]) -> Result<Vec<f64>> {
    let dofs = space.mesh().dofs();
    let rhs_free: Vec<f64> = dofs.free_dofs.iter().map(|&i| rhs[i]).collect();
    let w = space.dirichlet_factor()?.solve(&rhs_free)?;
    let mut out = vec![0.0; dofs.num_dofs];
    for (&i, v) in dofs.free_dofs.iter().zip(w) {
        out[i] = v;
    }
    Ok(out)
}

fn check_flux(space: &FeSpace, flux: &[f64]) -> Result<()> {
    let n = space.mesh().num_vertices();
    if flux.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: flux.len(),
        });
    }
    Ok(())
}

/// Dirichlet-type state for a precomputed flux load `((q, φ_i)_Q)_i`.
pub fn solve_state_dirichlet_flux(space: &FeSpace, spec: &ProblemSpec, flux: &[f64]) -> Result<NodalField> {
    check_flux(space, flux)?;
    let mesh = space.mesh();
    let mut rhs = assemble_load(mesh, &*spec.g)?;
    for (r, f) in rhs.iter_mut().zip(flux) {
        *r -= f;
    }
    // K_h = b + V_0h and a(b, v) = 0 for the constant lift
    let mut u = solve_free(space, &rhs)?;
    for v in &mut u {
        *v += spec.b;
    }
    NodalField::new(mesh.clone(), u)
}

/// `u_hq ∈ b + V_0h` with `a(u, v) = (g, v)_H − (q, v)_Q` for all `v ∈ V_0h`.
pub fn solve_state_dirichlet(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<NodalField> {
    let flux = space.flux_load(q)?;
    solve_state_dirichlet_flux(space, spec, &flux)
}

/// `p_hq ∈ V_0h` with `a(p, v) = (u − z_d, v)_H` for all `v ∈ V_0h`.
pub fn solve_adjoint_dirichlet(space: &FeSpace, spec: &ProblemSpec, u: &NodalField) -> Result<NodalField> {
    same_mesh(space.mesh(), u.mesh())?;
    let rhs = adjoint_rhs(space, spec, u)?;
    NodalField::new(space.mesh().clone(), solve_free(space, &rhs)?)
}

fn adjoint_rhs(space: &FeSpace, spec: &ProblemSpec, u: &NodalField) -> Result<Vec<f64>> {
    let mut rhs = space.mass().matvec(u.coeffs());
    let zd = assemble_load(space.mesh(), &*spec.z_d)?;
    for (r, z) in rhs.iter_mut().zip(zd) {
        *r -= z;
    }
    Ok(rhs)
}

pub fn solve_state_robin_flux(space: &FeSpace, spec: &ProblemSpec, flux: &[f64]) -> Result<NodalField> {
    check_flux(space, flux)?;
    let alpha = spec.require_alpha()?;
    let mesh = space.mesh();
    let mut rhs = assemble_load(mesh, &*spec.g)?;
    let boundary = space.gamma1_mass().matvec(&vec![spec.b; mesh.num_vertices()]);
    for ((r, f), bb) in rhs.iter_mut().zip(flux).zip(boundary) {
        *r += alpha * bb - f;
    }
    let u = space.robin_factor(alpha)?.solve(&rhs)?;
    NodalField::new(mesh.clone(), u)
}

/// `u_hαq ∈ V_h` with `a(u, v) + α ∫_{Γ1} u v = (g, v)_H − (q, v)_Q + α ∫_{Γ1} b v`.
pub fn solve_state_robin(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<NodalField> {
    let flux = space.flux_load(q)?;
    solve_state_robin_flux(space, spec, &flux)
}

/// `p_hαq ∈ V_h` with `a(p, v) + α ∫_{Γ1} p v = (u − z_d, v)_H`.
pub fn solve_adjoint_robin(space: &FeSpace, spec: &ProblemSpec, u: &NodalField) -> Result<NodalField> {
    same_mesh(space.mesh(), u.mesh())?;
    let alpha = spec.require_alpha()?;
    let rhs = adjoint_rhs(space, spec, u)?;
    let p = space.robin_factor(alpha)?.solve(&rhs)?;
    NodalField::new(space.mesh().clone(), p)
}

/// State of the family selected by `spec.alpha`.
pub fn solve_state(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<NodalField> {
    match spec.alpha {
        None => solve_state_dirichlet(space, spec, q),
        Some(_) => solve_state_robin(space, spec, q),
    }
}

pub fn solve_state_flux(space: &FeSpace, spec: &ProblemSpec, flux: &[f64]) -> Result<NodalField> {
    match spec.alpha {
        None => solve_state_dirichlet_flux(space, spec, flux),
        Some(_) => solve_state_robin_flux(space, spec, flux),
    }
}

pub fn solve_adjoint(space: &FeSpace, spec: &ProblemSpec, u: &NodalField) -> Result<NodalField> {
    match spec.alpha {
        None => solve_adjoint_dirichlet(space, spec, u),
        Some(_) => solve_adjoint_robin(space, spec, u),
    }
}

/// Linear part of the control-to-state map: `C(q) = u_q − u_0`, the state
/// with `g = 0`, `b = 0` and flux load `flux`.
pub fn control_response(space: &FeSpace, alpha: Option<f64>, flux: &[f64]) -> Result<Vec<f64>> {
    check_flux(space, flux)?;
    let rhs: Vec<f64> = flux.iter().map(|f| -f).collect();
    match alpha {
        None => solve_free(space, &rhs),
        Some(a) => space.robin_factor(a)?.solve(&rhs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{interpolate_nodal, Mesh, Side};
    use crate::space::NormKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> FeSpace {
        FeSpace::new(Mesh::structured(n, &[Side::Bottom]).unwrap()).unwrap()
    }

    fn random_trace(space: &FeSpace, rng: &mut ChaCha8Rng) -> TraceField {
        let n = space.mesh().dofs().num_trace();
        TraceField::new(space.mesh().clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constants_solve_both_families() {
        let s = space(4);
        let spec = ProblemSpec::from_fns(|_, _| 0.0, |_, _| 0.0, 1.0, 1.0).unwrap();
        let q = TraceField::zeros(s.mesh());
        let u = solve_state_dirichlet(&s, &spec, &q).unwrap();
        assert!(u.coeffs().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        for alpha in [0.5, 1.0, 1e3] {
            let u = solve_state_robin(&s, &spec.with_alpha(alpha).unwrap(), &q).unwrap();
            assert!(u.coeffs().iter().all(|&v| (v - 1.0).abs() < 1e-10), "alpha={alpha}");
        }
    }

    #[test]
    fn dirichlet_values_are_imposed() {
        let s = space(5);
        let spec = ProblemSpec::from_fns(|x, y| x + y, |_, _| 0.0, 2.5, 1.0).unwrap();
        let u = solve_state_dirichlet(&s, &spec, &TraceField::constant(s.mesh(), 0.3)).unwrap();
        for &v in &s.mesh().dofs().gamma1_dofs {
            assert_eq!(u.coeffs()[v], 2.5);
        }
        let p = solve_adjoint_dirichlet(&s, &spec, &u).unwrap();
        for &v in &s.mesh().dofs().gamma1_dofs {
            assert_eq!(p.coeffs()[v], 0.0);
        }
    }

    #[test]
    fn state_map_is_affine() {
        let s = space(6);
        let spec = ProblemSpec::from_fns(|x, y| (x * y).exp(), |_, _| 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q1 = random_trace(&s, &mut rng);
        let q2 = random_trace(&s, &mut rng);
        for spec in [spec.clone(), spec.with_alpha(7.0).unwrap()] {
            let u12 = solve_state(&s, &spec, &(&q1 + &q2)).unwrap();
            let u1 = solve_state(&s, &spec, &q1).unwrap();
            let u2 = solve_state(&s, &spec, &q2).unwrap();
            let u0 = solve_state(&s, &spec, &TraceField::zeros(s.mesh())).unwrap();
            let combo = &(&(&u12 - &u2) - &u1) + &u0;
            assert!(s.norm(&combo, NormKind::V).unwrap() < 1e-10);
        }
    }

    #[test]
    fn adjoint_vanishes_for_matching_target() {
        let s = space(4);
        let base = ProblemSpec::from_fns(|x, _| x, |_, _| 0.0, 1.0, 1.0).unwrap();
        let u = solve_state_dirichlet(&s, &base, &TraceField::zeros(s.mesh())).unwrap();
        let uu = u.clone();
        let spec = base.with_target(Arc::new(move |x, y| uu.evaluate(x, y)));
        let p = solve_adjoint_dirichlet(&s, &spec, &u).unwrap();
        assert!(s.norm_v(&p).unwrap() < 1e-12);
        let spec_r = spec.with_alpha(3.0).unwrap();
        let p = solve_adjoint_robin(&s, &spec_r, &u).unwrap();
        assert!(s.norm_v(&p).unwrap() < 1e-12);
        // nodal P1 target equal to u
        let z = interpolate_nodal(|x, y| u.evaluate(x, y), s.mesh()).unwrap();
        assert_eq!(z.coeffs(), u.coeffs());
    }

    #[test]
    fn robin_requires_alpha() {
        let s = space(2);
        let spec = ProblemSpec::from_fns(|_, _| 0.0, |_, _| 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            solve_state_robin(&s, &spec, &TraceField::zeros(s.mesh())),
            Err(Error::MissingAlpha)
        ));
    }

    #[test]
    fn invalid_data_is_rejected() {
        assert!(ProblemSpec::from_fns(|_, _| 0.0, |_, _| 0.0, 1.0, 0.0).is_err());
        let ok = ProblemSpec::from_fns(|_, _| 0.0, |_, _| 0.0, 1.0, 1.0).unwrap();
        assert!(ok.with_alpha(-1.0).is_err());
        assert!(ok.with_alpha(0.0).is_err());
    }
}
