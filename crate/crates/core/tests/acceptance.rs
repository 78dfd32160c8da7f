//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixedctl::assembly::trace_restrict;
use mixedctl::harness::{
    run_alpha_sweep, run_control_convergence, run_diagram, run_state_convergence, ConvergenceReport, Experiment,
    ExperimentConfig, Verdict,
};
use mixedctl::optctl::{optimality_residual, ReducedSystem};
use mixedctl::pde::control_response;
use mixedctl::{
    cost, estimate_constants, gradient, solve_adjoint, solve_optimal_fixed_point, solve_optimal_reduced, solve_state,
    FeSpace, FixedPointOptions, Mesh, ProblemSpec, Result, Side, TraceField,
};

const IDENTITY_RTOL: f64 = 1e-9;
const PAIRS: usize = 20;
const ORACLE_TOL: f64 = 1e-7;
const RESIDUAL_TOL: f64 = 1e-8;
const RATIO_SLACK: f64 = 0.05;
const UNIQUENESS_TOL: f64 = 1e-8;
const SMALL_LEVELS: [usize; 3] = [4, 8, 16];

struct Outcome {
    ok: bool,
    detail: String,
}

fn family_label(alpha: Option<f64>) -> String {
    match alpha {
        None => "dirichlet".into(),
        Some(a) => format!("robin(alpha={a})"),
    }
}

fn base_spec(m: f64) -> ProblemSpec {
    let pi = std::f64::consts::PI;
    ProblemSpec::from_fns(move |x, y| 10.0 * (pi * x).sin() * (pi * y).sin(), |_, _| 0.5, 1.0, m).unwrap()
}

fn families(spec: &ProblemSpec) -> Vec<ProblemSpec> {
    vec![spec.clone(), spec.with_alpha(1.0).unwrap(), spec.with_alpha(100.0).unwrap()]
}

fn random_trace(space: &FeSpace, rng: &mut ChaCha8Rng) -> TraceField {
    let n = space.mesh().dofs().num_trace();
    TraceField::new(space.mesh().clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Worst relative violation over all pairs of the five exact identities.
fn identities(space: &FeSpace, spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Result<[f64; 5]> {
    let m = spec.m;
    let sys = ReducedSystem::build(space, spec)?;
    let mut worst = [0.0f64; 5];
    let stiff = match spec.alpha {
        None => space.stiffness().clone(),
        Some(a) => space.robin_matrix(a),
    };
    for _ in 0..PAIRS {
        let q1 = random_trace(space, rng);
        let q2 = random_trace(space, rng);
        let u1 = solve_state(space, spec, &q1)?;
        let u2 = solve_state(space, spec, &q2)?;
        let p1 = solve_adjoint(space, spec, &u1)?;
        let p2 = solve_adjoint(space, spec, &u2)?;
        let dq = &q2 - &q1;
        let du = &u2 - &u1;
        let du_h2 = space.norm_h(&du)?.powi(2);
        let dq_q2 = space.norm_q(&dq)?.powi(2);

        // convexity at t = 1/2
        let mid = q1.axpy(1.0, &q2)?.scaled(0.5);
        let lhs = 0.5 * cost(space, spec, &q2)? + 0.5 * cost(space, spec, &q1)? - cost(space, spec, &mid)?;
        worst[0] = worst[0].max(rel_err(lhs, du_h2 / 8.0 + m * dq_q2 / 8.0));

        // monotonicity of the adjoint trace
        let dp = &trace_restrict(&p2) - &trace_restrict(&p1);
        worst[1] = worst[1].max(rel_err(-space.inner_q(&dp, &dq)?, du_h2));

        // monotonicity of the gradient
        let dg = &gradient(space, spec, &q2)? - &gradient(space, spec, &q1)?;
        worst[2] = worst[2].max(rel_err(space.inner_q(&dg, &dq)?, du_h2 + m * dq_q2));

        // gradient-adjoint pairing: a(p_q, C(f)) = -(f, p_q)_Q
        let c = control_response(space, spec.alpha, &space.flux_load(&dq)?)?;
        let lhs = stiff.bilinear(p1.coeffs(), &c);
        worst[3] = worst[3].max(rel_err(lhs, -space.inner_q(&dq, &trace_restrict(&p1))?));

        // reduced quadratic form
        worst[4] = worst[4].max(rel_err(cost(space, spec, &q1)?, sys.cost(q1.coeffs())));
    }
    Ok(worst)
}

fn criterion_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for &n in &SMALL_LEVELS {
        let space = FeSpace::new(Mesh::structured(n, &[Side::Bottom])?)?;
        for spec in families(&base_spec(25.0)) {
            let w = identities(&space, &spec, &mut rng)?;
            let max = w.iter().copied().fold(0.0, f64::max);
            worst = worst.max(max);
            parts.push(format!("n={n} {}: {max:.1e}", family_label(spec.alpha)));
        }
    }
    Ok(Outcome {
        ok: worst <= IDENTITY_RTOL,
        detail: format!(
            "worst relative violation {worst:.2e} (tol {IDENTITY_RTOL:e}) over {PAIRS} pairs per mesh and family; {}",
            parts.join(", ")
        ),
    })
}

fn criterion_oracle() -> Result<Outcome> {
    let mut worst_dq = 0.0f64;
    let mut worst_res = 0.0f64;
    for &n in &SMALL_LEVELS {
        let space = FeSpace::new(Mesh::structured(n, &[Side::Bottom])?)?;
        let c = estimate_constants(&space)?;
        for spec in families(&base_spec(4.0 * c.contraction_threshold())) {
            let opts = FixedPointOptions {
                constants: Some(c),
                ..Default::default()
            };
            let fp = solve_optimal_fixed_point(&space, &spec, &opts)?;
            let red = solve_optimal_reduced(&space, &spec)?;
            worst_dq = worst_dq.max(space.distance_q(&fp.q_opt, &red.q_opt)?);
            worst_res = worst_res
                .max(optimality_residual(&space, &spec, &fp)?)
                .max(optimality_residual(&space, &spec, &red)?);
        }
    }
    Ok(Outcome {
        ok: worst_dq <= ORACLE_TOL && worst_res <= RESIDUAL_TOL,
        detail: format!(
            "max |q_fp - q_red|_Q = {worst_dq:.2e} (tol {ORACLE_TOL:e}), max |Mq - trace(p)|_Q = {worst_res:.2e} (tol {RESIDUAL_TOL:e}); n in {SMALL_LEVELS:?}, alpha in {{none, 1, 100}}"
        ),
    })
}

fn criterion_contraction() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut worst_unique = 0.0f64;
    for &n in &SMALL_LEVELS {
        let space = FeSpace::new(Mesh::structured(n, &[Side::Bottom])?)?;
        let c = estimate_constants(&space)?;
        for alpha in [None, Some(1.0), Some(100.0)] {
            let threshold = match alpha {
                None => c.contraction_threshold(),
                Some(a) => c.contraction_threshold_robin(a),
            };
            let m = 4.0 * threshold;
            let spec = match alpha {
                None => base_spec(m),
                Some(a) => base_spec(m).with_alpha(a)?,
            };
            let bound = c.fixed_point_lipschitz(m, alpha);
            let a = solve_optimal_fixed_point(&space, &spec, &FixedPointOptions::default())?;
            let b = solve_optimal_fixed_point(
                &space,
                &spec,
                &FixedPointOptions {
                    q0: Some(random_trace(&space, &mut rng).scaled(10.0)),
                    ..Default::default()
                },
            )?;
            let observed = a.contraction_ratios.iter().chain(&b.contraction_ratios).copied().fold(0.0, f64::max);
            let unique = space.distance_q(&a.q_opt, &b.q_opt)?;
            worst_unique = worst_unique.max(unique);
            ok &= observed <= bound + RATIO_SLACK && unique <= UNIQUENESS_TOL;
            parts.push(format!("n={n} {}: ratio {observed:.3} <= {bound:.3}+{RATIO_SLACK}", family_label(alpha)));
        }
    }
    Ok(Outcome {
        ok,
        detail: format!(
            "two starts agree to {worst_unique:.1e} (tol {UNIQUENESS_TOL:e}); {}",
            parts.join(", ")
        ),
    })
}

fn fit_detail(r: &ConvergenceReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        let c = r.find_check(n).unwrap_or_else(|| panic!("missing check {n}"));
        ok &= c.verdict == Verdict::Pass;
        parts.push(format!("{n} [{}] {}", c.verdict, c.detail));
    }
    (ok, parts.join("; "))
}

fn criterion_state_rates() -> Result<Outcome> {
    let cfg = ExperimentConfig::default_for(Experiment::StateConv);
    let r = run_state_convergence(&cfg)?;
    let (ok, detail) = fit_detail(&r, &["rate_e_u_V", "rate_e_p_V"]);
    Ok(Outcome {
        ok,
        detail: format!("levels {:?}, n_ref {}: {detail}", cfg.levels, cfg.n_ref),
    })
}

fn criterion_control_rates() -> Result<Outcome> {
    let cfg = ExperimentConfig::default_for(Experiment::ControlConv);
    let r = run_control_convergence(&cfg, 0)?;
    let (ok, detail) = fit_detail(
        &r,
        &["rate_e_q_Q", "rate_e_u_V", "rate_e_p_V", "rate_gap_ref", "rate_gap_h", "rate_gap_data"],
    );
    Ok(Outcome {
        ok,
        detail: format!("levels {:?}, n_ref {}: {detail}", cfg.levels, cfg.n_ref),
    })
}

fn criterion_alpha_limit() -> Result<Outcome> {
    let cfg = ExperimentConfig::default_for(Experiment::AlphaSweep);
    let r = run_alpha_sweep(&cfg, 0)?;
    let (ok, detail) = fit_detail(
        &r,
        &["decay_d_q", "decay_d_u", "decay_d_p", "bounded_pen_u_fixed", "bounded_pen_u", "bounded_pen_p"],
    );
    Ok(Outcome {
        ok,
        detail: format!("n = {}, alphas {:?}: {detail}", cfg.alpha_level, cfg.alphas),
    })
}

fn criterion_diagram() -> Result<Outcome> {
    let cfg = ExperimentConfig::default_for(Experiment::Diagram);
    let r = run_diagram(&cfg)?;
    let (ok, detail) = fit_detail(
        &r,
        &["rows_decrease_in_alpha", "columns_decrease_in_level", "corner_within_tails", "iterated_limits_agree"],
    );
    Ok(Outcome {
        ok,
        detail: format!("levels {:?}, n_ref {}: {detail}", cfg.levels, cfg.n_ref),
    })
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 7] = [
        ("1 exact identities", criterion_identities),
        ("2 fixed point vs reduced oracle", criterion_oracle),
        ("3 contraction and uniqueness", criterion_contraction),
        ("4 state/adjoint h-rates", criterion_state_rates),
        ("5 optimal-control h-rates", criterion_control_rates),
        ("6 alpha limit", criterion_alpha_limit),
        ("7 commutative diagram", criterion_diagram),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(o) => (o.ok, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {name} ({:.1}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
