//! Discrete cost functionals, gradients, the fixed-point map
//! `W(q) = γ0(p_q) / M`, and the two optimal-control solvers.
//!
//! Mq and γ0(p) live in the same P1 trace space, so the Riesz representative
//! of the gradient in Q has nodal coefficients `M q̂ − p̂|Γ2` exactly.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::assembly::{squared_distance_h, trace_restrict};
use crate::error::{Error, Result};
use crate::field::{same_mesh, NodalField, TraceField};
use crate::linsolve::DiscreteConstants;
use crate::pde::{control_response, solve_adjoint, solve_state, solve_state_flux, ProblemSpec};
use crate::space::{trace_norm_sq, FeSpace};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest trace dimension accepted by the dense reduced solver.
pub const REDUCED_GUARD: usize = 2000;

#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub q_opt: TraceField,
    pub u_opt: NodalField,
    pub p_opt: NodalField,
    pub cost: f64,
    /// `‖J′(q_opt)‖_Q`.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// `‖q^{k+1} − q^k‖_Q / ‖q^k − q^{k−1}‖_Q` for each step after the first.
    pub contraction_ratios: Vec<f64>,
    /// `J(q^k)` along the iteration.
    pub cost_history: Vec<f64>,
}

/// State, adjoint and cost at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub u: NodalField,
    pub p: NodalField,
    pub cost: f64,
}

fn cost_from_state(spec: &ProblemSpec, u: &NodalField, q: &TraceField) -> Result<f64> {
    let misfit = squared_distance_h(u, &*spec.z_d)?;
    Ok(0.5 * misfit + 0.5 * spec.m * trace_norm_sq(q))
}

/// `J(q) = ½‖u_q − z_d‖²_H + (M/2)‖q‖²_Q`. The control may live on this
/// mesh or on a nested refinement of it.
pub fn cost(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<f64> {
    let flux = space.flux_load(q)?;
    let u = solve_state_flux(space, spec, &flux)?;
    cost_from_state(spec, &u, q)
}

pub fn evaluate(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<Evaluation> {
    same_mesh(space.mesh(), q.mesh())?;
    let u = solve_state(space, spec, q)?;
    let p = solve_adjoint(space, spec, &u)?;
    let cost = cost_from_state(spec, &u, q)?;
    Ok(Evaluation { u, p, cost })
}

fn gradient_from_adjoint(spec: &ProblemSpec, q: &TraceField, p: &NodalField) -> TraceField {
    let tp = trace_restrict(p);
    let coeffs = q
        .coeffs()
        .iter()
        .zip(tp.coeffs())
        .map(|(q, p)| spec.m * q - p)
        .collect();
    TraceField::from_raw(q.mesh().clone(), coeffs)
}

/// `J′(q) = M q − γ0(p_q)`.
pub fn gradient(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<TraceField> {
    let e = evaluate(space, spec, q)?;
    Ok(gradient_from_adjoint(spec, q, &e.p))
}

/// `W(q) = (1/M) γ0(p_q)`.
pub fn fixed_point_map(space: &FeSpace, spec: &ProblemSpec, q: &TraceField) -> Result<TraceField> {
    let e = evaluate(space, spec, q)?;
    Ok(trace_restrict(&e.p).scaled(1.0 / spec.m))
}

#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub q0: Option<TraceField>,
    pub tol: f64,
    pub max_iter: usize,
    /// When given, the contraction condition is checked up front and a
    /// warning is logged if it fails.
    pub constants: Option<DiscreteConstants>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            q0: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            constants: None,
        }
    }
}

fn finish(
    space: &FeSpace,
    spec: &ProblemSpec,
    q: TraceField,
    iterations: usize,
    contraction_ratios: Vec<f64>,
    cost_history: Vec<f64>,
) -> Result<OptimalSolution> {
    let e = evaluate(space, spec, &q)?;
    let grad = gradient_from_adjoint(spec, &q, &e.p);
    let gradient_norm = space.norm_q(&grad)?;
    Ok(OptimalSolution {
        q_opt: q,
        u_opt: e.u,
        p_opt: e.p,
        cost: e.cost,
        gradient_norm,
        iterations,
        contraction_ratios,
        cost_history,
    })
}

/// Iterates `q^{k+1} = W(q^k)` until
/// `‖q^{k+1} − q^k‖_Q ≤ tol · max(1, ‖q^{k+1}‖_Q)`.
pub fn solve_optimal_fixed_point(
    space: &FeSpace,
    spec: &ProblemSpec,
    options: &FixedPointOptions,
) -> Result<OptimalSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidProblem(format!("tol must be positive, got {}", options.tol)));
    }
    if let Some(c) = &options.constants {
        let threshold = match spec.alpha {
            None => c.contraction_threshold(),
            Some(a) => c.contraction_threshold_robin(a),
        };
        if spec.m <= threshold {
            warn!(
                "M = {} does not exceed the contraction threshold {:.4}; iterating anyway",
                spec.m, threshold
            );
        }
    }
    let mut q = match &options.q0 {
        Some(q0) => {
            same_mesh(space.mesh(), q0.mesh())?;
            q0.clone()
        }
        None => TraceField::zeros(space.mesh()),
    };
    let mut ratios = Vec::new();
    let mut costs = Vec::new();
    let mut last_step = f64::NAN;
    for k in 1..=options.max_iter {
        let e = evaluate(space, spec, &q)?;
        costs.push(e.cost);
        let next = trace_restrict(&e.p).scaled(1.0 / spec.m);
        let step = space.norm_q(&(&next - &q))?;
        if k > 1 {
            ratios.push(if last_step > 0.0 { step / last_step } else { 0.0 });
        }
        last_step = step;
        let scale = space.norm_q(&next)?.max(1.0);
        q = next;
        if step <= options.tol * scale {
            return finish(space, spec, q, k, ratios, costs);
        }
    }
    Err(Error::FixedPointMaxIter {
        max_iter: options.max_iter,
        last_step,
        last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
    })
}

/// Dense reduced form `J(q) = ½ qᵀ G q − Lᵀ q + ½ ‖u_0 − z_d‖²_H` over the
/// trace coefficients.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub g: DMatrix<f64>,
    pub l: DVector<f64>,
    pub offset: f64,
    /// Columns are `C(e_j) = u_{e_j} − u_0` as full nodal vectors.
    pub responses: DMatrix<f64>,
    pub u0: NodalField,
}

impl ReducedSystem {
    pub fn build(space: &FeSpace, spec: &ProblemSpec) -> Result<Self> {
        let mesh = space.mesh();
        let dofs = mesh.dofs();
        let m = dofs.num_trace();
        if m > REDUCED_GUARD {
            return Err(Error::ReducedTooLarge {
                dofs: m,
                limit: REDUCED_GUARD,
            });
        }
        let nv = mesh.num_vertices();
        let mut responses = DMatrix::zeros(nv, m);
        let mut e = vec![0.0; nv];
        for (j, &v) in dofs.gamma2_trace_dofs.iter().enumerate() {
            e[v] = 1.0;
            let flux = space.gamma2_mass().matvec(&e);
            e[v] = 0.0;
            let c = control_response(space, spec.alpha, &flux)?;
            responses.set_column(j, &DVector::from_vec(c));
        }
        let mut mc = DMatrix::zeros(nv, m);
        for j in 0..m {
            let col: Vec<f64> = responses.column(j).iter().copied().collect();
            mc.set_column(j, &DVector::from_vec(space.mass().matvec(&col)));
        }
        let mut g = responses.transpose() * &mc;
        let b = space.trace_mass().to_dense();
        g += spec.m * b;
        let g = 0.5 * (&g + g.transpose());

        let u0 = solve_state(space, spec, &TraceField::zeros(mesh))?;
        let zd = crate::assembly::assemble_load(mesh, &*spec.z_d)?;
        let mu0 = space.mass().matvec(u0.coeffs());
        let w = DVector::from_iterator(nv, zd.iter().zip(&mu0).map(|(z, mu)| z - mu));
        let l = responses.transpose() * w;
        let offset = 0.5 * squared_distance_h(&u0, &*spec.z_d)?;
        Ok(Self {
            g,
            l,
            offset,
            responses,
            u0,
        })
    }

    pub fn cost(&self, q: &[f64]) -> f64 {
        let q = DVector::from_column_slice(q);
        0.5 * q.dot(&(&self.g * &q)) - self.l.dot(&q) + self.offset
    }

    pub fn solve(&self) -> Result<DVector<f64>> {
        let chol = self
            .g
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
        Ok(chol.solve(&self.l))
    }
}

/// Optimal control from the dense reduced system `G q = L`.
pub fn solve_optimal_reduced(space: &FeSpace, spec: &ProblemSpec) -> Result<OptimalSolution> {
    let sys = ReducedSystem::build(space, spec)?;
    let q = sys.solve()?;
    let q = TraceField::new(space.mesh().clone(), q.iter().copied().collect())?;
    finish(space, spec, q, 0, Vec::new(), Vec::new())
}

/// `‖M q − γ0(p)‖_Q` for a computed solution.
pub fn optimality_residual(space: &FeSpace, spec: &ProblemSpec, sol: &OptimalSolution) -> Result<f64> {
    let g = gradient_from_adjoint(spec, &sol.q_opt, &sol.p_opt);
    space.norm_q(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(n: usize) -> (FeSpace, ProblemSpec) {
        let space = FeSpace::new(Mesh::structured(n, &[Side::Bottom]).unwrap()).unwrap();
        let spec = ProblemSpec::from_fns(
            |x, y| 10.0 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin(),
            |_, _| 0.5,
            1.0,
            2.0,
        )
        .unwrap();
        (space, spec)
    }

    fn random_trace(space: &FeSpace, rng: &mut ChaCha8Rng) -> TraceField {
        let n = space.mesh().dofs().num_trace();
        TraceField::new(space.mesh().clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn matched_target(space: &FeSpace, spec: &ProblemSpec) -> ProblemSpec {
        let u0 = solve_state(space, spec, &TraceField::zeros(space.mesh())).unwrap();
        spec.with_target(Arc::new(move |x, y| u0.evaluate(x, y)))
    }

    #[test]
    fn zero_cost_at_matched_target() {
        let (space, spec) = setup(4);
        let spec = matched_target(&space, &spec);
        let j0 = cost(&space, &spec, &TraceField::zeros(space.mesh())).unwrap();
        assert!(j0 < 1e-24);
        let q = TraceField::constant(space.mesh(), 0.2);
        let jq = cost(&space, &spec, &q).unwrap();
        assert!(jq >= 0.5 * spec.m * space.norm_q(&q).unwrap().powi(2) - 1e-14);
    }

    #[test]
    fn fixed_point_is_trivial_at_matched_target() {
        let (space, spec) = setup(4);
        let spec = matched_target(&space, &spec);
        let sol = solve_optimal_fixed_point(&space, &spec, &FixedPointOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(space.norm_q(&sol.q_opt).unwrap() < 1e-12);
        let red = solve_optimal_reduced(&space, &spec).unwrap();
        assert!(space.norm_q(&red.q_opt).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_and_map_are_related() {
        let (space, spec) = setup(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_trace(&space, &mut rng);
        let g = gradient(&space, &spec, &q).unwrap();
        let w = fixed_point_map(&space, &spec, &q).unwrap();
        for k in 0..q.len() {
            let lhs = w.coeffs()[k] - q.coeffs()[k];
            assert!((lhs + g.coeffs()[k] / spec.m).abs() < 1e-12);
        }
    }

    #[test]
    fn central_differences_match_gradient() {
        let (space, spec) = setup(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [spec.clone(), spec.with_alpha(10.0).unwrap()] {
            let q = random_trace(&space, &mut rng);
            let f = random_trace(&space, &mut rng);
            let g = gradient(&space, &spec, &q).unwrap();
            let exact = space.inner_q(&g, &f).unwrap();
            let fd = |t: f64| {
                (cost(&space, &spec, &q.axpy(t, &f).unwrap()).unwrap()
                    - cost(&space, &spec, &q.axpy(-t, &f).unwrap()).unwrap())
                    / (2.0 * t)
            };
            let e3 = (fd(1e-3) - exact).abs();
            let e4 = (fd(1e-4) - exact).abs();
            // J is quadratic: central differences are exact up to rounding
            assert!(e3 <= 1e-8 * exact.abs().max(1.0), "e3={e3}");
            assert!(e4 <= 1e-7 * exact.abs().max(1.0), "e4={e4}");
        }
    }

    #[test]
    fn fixed_point_and_reduced_agree() {
        let (space, spec) = setup(4);
        let spec = spec.with_m(40.0).unwrap();
        let fp = solve_optimal_fixed_point(&space, &spec, &FixedPointOptions::default()).unwrap();
        let red = solve_optimal_reduced(&space, &spec).unwrap();
        assert!(space.distance_q(&fp.q_opt, &red.q_opt).unwrap() < 1e-8);
        assert!(fp.gradient_norm < 1e-8 && red.gradient_norm < 1e-8);
        assert!(fixed_point_map(&space, &spec, &fp.q_opt)
            .unwrap()
            .axpy(-1.0, &fp.q_opt)
            .map(|d| space.norm_q(&d).unwrap())
            .unwrap()
            < 1e-8);
    }

    #[test]
    fn non_contractive_iteration_reports_max_iter() {
        let (space, spec) = setup(4);
        let spec = spec.with_m(1e-3).unwrap();
        let opts = FixedPointOptions {
            max_iter: 20,
            ..Default::default()
        };
        assert!(matches!(
            solve_optimal_fixed_point(&space, &spec, &opts),
            Err(Error::FixedPointMaxIter { .. })
        ));
    }

    #[test]
    fn reduced_guard() {
        let space = FeSpace::new(Mesh::structured(700, &[Side::Bottom]).unwrap()).unwrap();
        let (_, spec) = setup(1);
        assert!(matches!(
            ReducedSystem::build(&space, &spec),
            Err(Error::ReducedTooLarge { .. })
        ));
    }
}
