use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixedctl::assembly::{assemble_mass, assemble_stiffness, trace_restrict};
use mixedctl::linsolve::solve_spd;
use mixedctl::mesh::{interpolate_nodal, prolongate};
use mixedctl::optctl::ReducedSystem;
use mixedctl::{
    cost, estimate_constants, fixed_point_map, solve_adjoint, solve_optimal_fixed_point, solve_state, FeSpace,
    FixedPointOptions, Mesh, NodalField, NormKind, ProblemSpec, Side, TraceField,
};

const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

fn sides(mask: u8) -> Vec<Side> {
    ALL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| *s).collect()
}

fn mesh_strategy(max_n: usize) -> impl Strategy<Value = Arc<Mesh>> {
    (1..=max_n, 1u8..15).prop_map(|(n, mask)| Mesh::structured(n, &sides(mask)).unwrap())
}

fn random_nodal(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> NodalField {
    NodalField::new(mesh.clone(), (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_trace(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> TraceField {
    let n = mesh.dofs().num_trace();
    TraceField::new(mesh.clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn spec(m: f64, alpha: Option<f64>) -> ProblemSpec {
    let s = ProblemSpec::from_fns(|x, y| 1.0 + x * y, |x, _| x, 0.5, m).unwrap();
    match alpha {
        Some(a) => s.with_alpha(a).unwrap(),
        None => s,
    }
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prolongation_preserves_norms(mesh in mesh_strategy(5), factor in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fine = mesh.refine_by(factor).unwrap();
        let coarse_space = FeSpace::new(mesh.clone()).unwrap();
        let fine_space = FeSpace::new(fine.clone()).unwrap();
        let u = random_nodal(&mesh, &mut rng);
        let uf = prolongate(&u, &fine).unwrap();
        for kind in [NormKind::H, NormKind::V, NormKind::Q] {
            let a = coarse_space.norm(&u, kind).unwrap();
            let b = fine_space.norm(&uf, kind).unwrap();
            prop_assert!(close(a, b, 1e-12), "{:?}: {} vs {}", kind, a, b);
        }
        let q = random_trace(&mesh, &mut rng);
        let qf = q.prolongate(&fine).unwrap();
        prop_assert!(close(coarse_space.norm_q(&q).unwrap(), fine_space.norm_q(&qf).unwrap(), 1e-12));
    }

    #[test]
    fn prolongation_transpose_is_adjoint(mesh in mesh_strategy(4), factor in 2usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fine = mesh.refine_by(factor).unwrap();
        let c = random_nodal(&mesh, &mut rng);
        let f: Vec<f64> = (0..fine.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pc = prolongate(&c, &fine).unwrap();
        let lhs: f64 = pc.coeffs().iter().zip(&f).map(|(a, b)| a * b).sum();
        let ptf = mesh.prolongation_transpose(&fine, &f);
        let rhs: f64 = c.coeffs().iter().zip(&ptf).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn interpolation_is_idempotent(mesh in mesh_strategy(8), k in 0.5f64..4.0) {
        let u = interpolate_nodal(|x, y| (k * x).sin() * (y + 0.3).ln(), &mesh).unwrap();
        let v = interpolate_nodal(|x, y| u.evaluate(x, y), &mesh).unwrap();
        prop_assert_eq!(u.coeffs(), v.coeffs());
    }

    #[test]
    fn assembled_matrices_are_symmetric(mesh in mesh_strategy(8)) {
        let a = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        prop_assert!(a.max_asymmetry() <= 1e-14 && m.max_asymmetry() <= 1e-14);
        let ones = vec![1.0; mesh.num_vertices()];
        prop_assert!(a.matvec(&ones).iter().all(|v| v.abs() <= 1e-14));
        prop_assert!((m.quad_form(&ones) - 1.0).abs() <= 1e-12);
        let area: f64 = (0..mesh.triangles().len()).map(|t| mesh.signed_area(t)).sum();
        prop_assert!((area - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn trace_extension_roundtrip(mesh in mesh_strategy(8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_trace(&mesh, &mut rng);
        let back = trace_restrict(&q.extend_by_zero());
        prop_assert_eq!(back.coeffs(), q.coeffs());
    }

    #[test]
    fn spd_solve_is_linear(mesh in mesh_strategy(6), seed in any::<u64>(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FeSpace::new(mesh.clone()).unwrap();
        let a = space.stiffness().restrict(&mesh.dofs().free_dofs);
        let n = a.dim();
        let b1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = solve_spd(&a, &b1, 1e-13).unwrap();
        let x2 = solve_spd(&a, &b2, 1e-13).unwrap();
        let b: Vec<f64> = b1.iter().zip(&b2).map(|(p, q)| s * p + t * q).collect();
        let x = solve_spd(&a, &b, 1e-13).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            prop_assert!((x[i] - s * x1[i] - t * x2[i]).abs() <= 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lipschitz_estimates(
        n in 2usize..9,
        mask in 1u8..15,
        alpha in prop::option::of(1.0f64..1e3),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = Mesh::structured(n, &sides(mask)).unwrap();
        let space = FeSpace::new(mesh.clone()).unwrap();
        let c = estimate_constants(&space).unwrap();
        let m = 2.0 * c.contraction_threshold_robin(1.0);
        let spec = spec(m, alpha);
        let lambda = match alpha {
            None => c.lambda_h,
            Some(a) => c.lambda_alpha(a),
        };
        let q1 = random_trace(&mesh, &mut rng);
        let q2 = random_trace(&mesh, &mut rng);
        let u1 = solve_state(&space, &spec, &q1).unwrap();
        let u2 = solve_state(&space, &spec, &q2).unwrap();
        let p1 = solve_adjoint(&space, &spec, &u1).unwrap();
        let p2 = solve_adjoint(&space, &spec, &u2).unwrap();
        let dq = space.norm_q(&(&q2 - &q1)).unwrap();
        let du = space.norm_v(&(&u2 - &u1)).unwrap();
        let dp = space.norm_v(&(&p2 - &p1)).unwrap();
        let slack = 1.0 + 1e-8;
        prop_assert!(du <= c.state_lipschitz(alpha) * dq * slack, "state: {} vs {}", du, c.state_lipschitz(alpha) * dq);
        prop_assert!(dp <= du / lambda * slack, "adjoint: {} vs {}", dp, du / lambda);
        let w1 = fixed_point_map(&space, &spec, &q1).unwrap();
        let w2 = fixed_point_map(&space, &spec, &q2).unwrap();
        let dw = space.norm_q(&(&w2 - &w1)).unwrap();
        prop_assert!(dw <= c.fixed_point_lipschitz(m, alpha) * dq * slack);
    }

    #[test]
    fn reduced_matrix_is_spd_with_mass_bound(n in 1usize..9, mask in 1u8..15, m in 0.1f64..100.0, alpha in prop::option::of(0.5f64..1e3)) {
        let mesh = Mesh::structured(n, &sides(mask)).unwrap();
        let space = FeSpace::new(mesh).unwrap();
        let spec = spec(m, alpha);
        let sys = ReducedSystem::build(&space, &spec).unwrap();
        let asym = (&sys.g - sys.g.transpose()).abs().max();
        prop_assert!(asym <= 1e-14 * sys.g.abs().max());
        let g_min = sys.g.clone().symmetric_eigen().eigenvalues.min();
        let b_min = space.trace_mass().to_dense().symmetric_eigen().eigenvalues.min();
        prop_assert!(g_min >= m * b_min - 1e-10, "{} < {}", g_min, m * b_min);
    }

    #[test]
    fn fixed_point_costs_decrease(n in 2usize..9, seed in any::<u64>(), alpha in prop::option::of(1.0f64..100.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = Mesh::structured(n, &[Side::Left]).unwrap();
        let space = FeSpace::new(mesh.clone()).unwrap();
        let c = estimate_constants(&space).unwrap();
        let spec = spec(4.0 * c.contraction_threshold_robin(1.0), alpha);
        let tol = 1e-10;
        let opts = FixedPointOptions { q0: Some(random_trace(&mesh, &mut rng).scaled(5.0)), tol, ..Default::default() };
        let sol = solve_optimal_fixed_point(&space, &spec, &opts).unwrap();
        for w in sol.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 10.0 * tol);
        }
        prop_assert!(sol.contraction_ratios.iter().all(|&r| r < 1.0));
        prop_assert!(sol.cost >= 0.0);
        prop_assert!((cost(&space, &spec, &sol.q_opt).unwrap() - sol.cost).abs() <= 1e-12 * sol.cost.max(1.0));
    }
}
