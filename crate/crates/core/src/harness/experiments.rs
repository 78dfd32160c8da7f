//! The five experiments behind the CLI subcommands.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::expr::Axis;
use super::report::{ConvergenceReport, RateRule, Verdict};
use crate::assembly::{assemble_boundary_load, exact_error_sq, NodalField, TraceField};
use crate::error::Result;
use crate::linsolve::{estimate_constants, DiscreteConstants};
use crate::mesh::BoundaryTag;
use crate::optctl::{cost, solve_optimal_fixed_point, solve_optimal_reduced, FixedPointOptions, OptimalSolution};
use crate::pde::{solve_adjoint, solve_state, solve_state_flux, ProblemSpec};
use crate::space::{FeSpace, NormKind};

fn rule(cfg: &ExperimentConfig, expected: f64, slack: f64, two_sided: bool) -> RateRule {
    RateRule {
        min: expected - slack,
        max: two_sided.then_some(expected + slack),
        max_residual: cfg.tol.fit_residual,
        exact_zero: cfg.tol.exact_zero,
    }
}

fn random_trace(space: &FeSpace, rng: &mut ChaCha8Rng) -> Result<TraceField> {
    let n = space.mesh().dofs().num_trace();
    TraceField::new(space.mesh().clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Strictly decreasing with final/initial at most `ratio`, or identically
/// zero up to `zero`.
fn decay_check(report: &mut ConvergenceReport, column: &str, ratio: f64, zero: f64) {
    let v = report.values(column);
    if v.iter().all(|d| d.abs() <= zero) {
        report.check(&format!("decay_{column}"), Verdict::Pass, format!("all values at or below {zero:e}"));
        return;
    }
    let first = v[0];
    let last = *v.last().unwrap();
    let ok = strictly_decreasing(&v) && last <= ratio * first;
    report.check_bool(
        &format!("decay_{column}"),
        ok,
        format!(
            "strictly decreasing: {}, final/initial = {:.3e} (want <= {ratio:e})",
            strictly_decreasing(&v),
            last / first
        ),
    );
}

/// Fixed-point solve from a seeded random start, checked against `oracle`.
fn fixed_point_crosscheck(
    space: &FeSpace,
    spec: &ProblemSpec,
    cfg: &ExperimentConfig,
    constants: DiscreteConstants,
    rng: &mut ChaCha8Rng,
    oracle: &OptimalSolution,
) -> Result<(f64, OptimalSolution)> {
    let opts = FixedPointOptions {
        q0: Some(random_trace(space, rng)?),
        tol: cfg.tol.solver,
        max_iter: cfg.tol.max_iter,
        constants: Some(constants),
    };
    let fp = solve_optimal_fixed_point(space, spec, &opts)?;
    Ok((space.distance_q(&fp.q_opt, &oracle.q_opt)?, fp))
}

fn max_ratio(sol: &OptimalSolution) -> f64 {
    sol.contraction_ratios.iter().copied().fold(0.0, f64::max)
}

/// State error against the manufactured solution and adjoint error against
/// the `n_ref` solution, at the fixed control given by the manufactured flux
/// (zero control when no exact solution is configured).
pub fn run_state_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let m = cfg.resolve_m(cfg.levels[0])?;
    let spec = cfg.spec(m)?;
    let exact = cfg.problem.exact.clone();
    let grad = exact.as_ref().map(|e| (e.derivative(Axis::X), e.derivative(Axis::Y)));
    let flux = |space: &FeSpace| -> Result<Vec<f64>> {
        match &grad {
            Some((dx, dy)) => assemble_boundary_load(space.mesh(), BoundaryTag::Gamma2, |x, y, side| {
                let n = side.normal();
                -(dx.eval(x, y) * n[0] + dy.eval(x, y) * n[1])
            }),
            None => Ok(vec![0.0; space.mesh().num_vertices()]),
        }
    };

    let ref_space = FeSpace::new(cfg.mesh(cfg.n_ref)?)?;
    let u_ref = solve_state_flux(&ref_space, &spec, &flux(&ref_space)?)?;
    let p_ref = solve_adjoint(&ref_space, &spec, &u_ref)?;

    let mut report = ConvergenceReport::new(
        "state_conv",
        &format!(
            "State and adjoint h-convergence at a fixed control; {} family, M = {m}, n_ref = {}",
            if spec.alpha.is_some() { "Robin" } else { "Dirichlet" },
            cfg.n_ref
        ),
    );
    let u_ref_doc = if exact.is_some() { "exact solution" } else { "n_ref solution" };
    report
        .int_column("n", "cells per side")
        .column("h", "longest triangle side")
        .column("e_u_V", &format!("H1 error of the state against the {u_ref_doc}"))
        .column("e_u_H", &format!("L2 error of the state against the {u_ref_doc}"))
        .column("e_p_V", "H1 distance of the adjoint to the n_ref adjoint")
        .column("e_p_H", "L2 distance of the adjoint to the n_ref adjoint");

    for &n in &cfg.levels {
        let space = FeSpace::new(cfg.mesh(n)?)?;
        let u = solve_state_flux(&space, &spec, &flux(&space)?)?;
        let p = solve_adjoint(&space, &spec, &u)?;
        let (eu_h2, eu_v2) = match &exact {
            Some(e) => {
                let (dx, dy) = grad.as_ref().unwrap();
                let (l2, h1) = exact_error_sq(&u, |x, y| e.eval(x, y), |x, y| [dx.eval(x, y), dy.eval(x, y)])?;
                (l2, l2 + h1)
            }
            None => (
                ref_space.distance(&u, &u_ref, NormKind::H)?.powi(2),
                ref_space.distance(&u, &u_ref, NormKind::V)?.powi(2),
            ),
        };
        let ep_v = ref_space.distance(&p, &p_ref, NormKind::V)?;
        let ep_h = ref_space.distance(&p, &p_ref, NormKind::H)?;
        info!("state-conv n={n}: e_u_V={:.3e} e_p_V={ep_v:.3e}", eu_v2.sqrt());
        report.push_row(vec![n as f64, space.mesh().h(), eu_v2.sqrt(), eu_h2.sqrt(), ep_v, ep_h]);
    }
    let r1 = cfg.problem.r - 1.0;
    let slack = cfg.tol.rate_slack;
    report.fit_rate("h", "e_u_V", rule(cfg, r1, slack, true));
    report.fit_rate("h", "e_p_V", rule(cfg, r1, slack, true));
    Ok(report)
}

/// Optimal control, state and adjoint errors against the `n_ref` reduced
/// solution, plus cost gaps and a fixed-point cross-check per level.
pub fn run_control_convergence(cfg: &ExperimentConfig, seed: u64) -> Result<ConvergenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.resolve_m(cfg.levels[0])?;
    let spec = cfg.spec(m)?;
    let ref_space = FeSpace::new(cfg.mesh(cfg.n_ref)?)?;
    let reference = solve_optimal_reduced(&ref_space, &spec)?;
    let j_ref = reference.cost;

    let mut report = ConvergenceReport::new(
        "control_conv",
        &format!(
            "Optimal-control h-convergence against the n_ref = {} reduced solution; {} family, M = {m}, seed = {seed}",
            cfg.n_ref,
            if spec.alpha.is_some() { "Robin" } else { "Dirichlet" }
        ),
    );
    report
        .int_column("n", "cells per side")
        .column("h", "longest triangle side")
        .column("e_q_Q", "Q distance of the optimal control to the reference control")
        .column("e_u_V", "H1 distance of the optimal state to the reference state")
        .column("e_p_V", "H1 distance of the optimal adjoint to the reference adjoint")
        .column("gap_ref", "J_ref(q_h) - J_ref(q_ref)")
        .column("gap_h", "J_h(q_ref) - J_h(q_h)")
        .column("gap_data", "|J_h(q_ref) - J_ref(q_ref)|")
        .column("gap_opt", "|J_h(q_h) - J_ref(q_ref)|")
        .column("cost", "J_h(q_h)")
        .column("fp_vs_reduced_Q", "Q distance between fixed-point and reduced controls")
        .int_column("fp_iterations", "fixed-point iterations from a random start")
        .column("fp_max_ratio", "largest observed fixed-point contraction ratio")
        .column("fp_ratio_bound", "surrogate Lipschitz bound of the fixed-point map");

    let mut gaps_nonneg = true;
    let mut oracle_worst: f64 = 0.0;
    let mut ratio_ok = true;
    for &n in &cfg.levels {
        let space = FeSpace::new(cfg.mesh(n)?)?;
        let constants = estimate_constants(&space)?;
        let sol = solve_optimal_reduced(&space, &spec)?;
        let (oracle, fp) = fixed_point_crosscheck(&space, &spec, cfg, constants, &mut rng, &sol)?;
        let bound = constants.fixed_point_lipschitz(m, spec.alpha);
        let e_q = ref_space.distance_q(&sol.q_opt, &reference.q_opt)?;
        let e_u = ref_space.distance(&sol.u_opt, &reference.u_opt, NormKind::V)?;
        let e_p = ref_space.distance(&sol.p_opt, &reference.p_opt, NormKind::V)?;
        let j_ref_qh = cost(&ref_space, &spec, &sol.q_opt.prolongate(ref_space.mesh())?)?;
        let j_h_qref = cost(&space, &spec, &reference.q_opt)?;
        let gap_ref = j_ref_qh - j_ref;
        let gap_h = j_h_qref - sol.cost;
        let slop = 1e-12 * j_ref.abs().max(1.0);
        gaps_nonneg &= gap_ref >= -slop && gap_h >= -slop;
        oracle_worst = oracle_worst.max(oracle);
        ratio_ok &= max_ratio(&fp) <= bound + 0.05;
        info!("control-conv n={n}: e_q={e_q:.3e} gap_ref={gap_ref:.3e} fp_iter={}", fp.iterations);
        report.push_row(vec![
            n as f64,
            space.mesh().h(),
            e_q,
            e_u,
            e_p,
            gap_ref.abs(),
            gap_h.abs(),
            (j_h_qref - j_ref).abs(),
            (sol.cost - j_ref).abs(),
            sol.cost,
            oracle,
            fp.iterations as f64,
            max_ratio(&fp),
            bound,
        ]);
    }
    let r1 = cfg.problem.r - 1.0;
    let t = cfg.tol.clone();
    for c in ["e_q_Q", "e_u_V", "e_p_V"] {
        report.fit_rate("h", c, rule(cfg, r1, t.rate_slack, false));
    }
    for c in ["gap_ref", "gap_h"] {
        report.fit_rate("h", c, rule(cfg, 2.0 * r1, t.cost_rate_slack, false));
    }
    report.fit_rate("h", "gap_data", rule(cfg, r1, t.rate_slack, false));
    report.check_bool(
        "cost_gaps_nonnegative",
        gaps_nonneg,
        "J_ref(q_h) >= J_ref(q_ref) and J_h(q_ref) >= J_h(q_h)".into(),
    );
    report.check_bool(
        "fixed_point_matches_reduced",
        oracle_worst <= t.oracle,
        format!("worst Q distance {oracle_worst:.3e} (want <= {:e})", t.oracle),
    );
    report.check_bool(
        "contraction_ratio_bound",
        ratio_ok,
        "observed ratios <= surrogate bound + 0.05 on every level".into(),
    );
    Ok(report)
}

/// Robin-family solutions along the alpha ladder on one mesh, compared with
/// the Dirichlet family at a fixed control and at the optimum.
pub fn run_alpha_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<ConvergenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.resolve_m(cfg.levels[0])?;
    let spec = cfg.spec(m)?.dirichlet();
    let n = cfg.alpha_level;
    let space = FeSpace::new(cfg.mesh(n)?)?;
    let constants = estimate_constants(&space)?;
    let dir = solve_optimal_reduced(&space, &spec)?;
    let q_star = dir.q_opt.clone();
    let u_star = solve_state(&space, &spec, &q_star)?;
    let p_star = solve_adjoint(&space, &spec, &u_star)?;
    let b = spec.b;

    let mut report = ConvergenceReport::new(
        "alpha_sweep",
        &format!("Robin-to-Dirichlet limit on n = {n}; M = {m}, seed = {seed}; fixed control is the Dirichlet optimum"),
    );
    report
        .column("alpha", "Robin coefficient")
        .column("d_u_fixed", "H1 distance of Robin and Dirichlet states at the fixed control")
        .column("d_p_fixed", "H1 distance of Robin and Dirichlet adjoints at the fixed control")
        .column("d_q", "Q distance of Robin and Dirichlet optimal controls")
        .column("d_u", "H1 distance of Robin and Dirichlet optimal states")
        .column("d_p", "H1 distance of Robin and Dirichlet optimal adjoints")
        .column("pen_u_fixed", "(alpha - 1) int_G1 (u - b)^2 at the fixed control")
        .column("pen_u", "(alpha - 1) int_G1 (u - b)^2 at the Robin optimum")
        .column("pen_p", "(alpha - 1) int_G1 p^2 at the Robin optimum")
        .column("pen_p_fixed", "(alpha - 1) int_G1 p^2 at the fixed control")
        .column("cost", "Robin optimal cost")
        .column("fp_vs_reduced_Q", "Q distance between fixed-point and reduced Robin controls");

    let mut oracle_worst: f64 = 0.0;
    for &alpha in &cfg.alphas {
        let sa = spec.with_alpha(alpha)?;
        let rob = solve_optimal_reduced(&space, &sa)?;
        let (oracle, _) = fixed_point_crosscheck(&space, &sa, cfg, constants, &mut rng, &rob)?;
        oracle_worst = oracle_worst.max(oracle);
        let u_a = solve_state(&space, &sa, &q_star)?;
        let p_a = solve_adjoint(&space, &sa, &u_a)?;
        let w = alpha - 1.0;
        report.push_row(vec![
            alpha,
            space.distance(&u_a, &u_star, NormKind::V)?,
            space.distance(&p_a, &p_star, NormKind::V)?,
            space.distance_q(&rob.q_opt, &dir.q_opt)?,
            space.distance(&rob.u_opt, &dir.u_opt, NormKind::V)?,
            space.distance(&rob.p_opt, &dir.p_opt, NormKind::V)?,
            w * space.gamma1_deviation_sq(&u_a, b)?,
            w * space.gamma1_deviation_sq(&rob.u_opt, b)?,
            w * space.gamma1_deviation_sq(&rob.p_opt, 0.0)?,
            w * space.gamma1_deviation_sq(&p_a, 0.0)?,
            rob.cost,
            oracle,
        ]);
        info!("alpha-sweep alpha={alpha}: d_q={:.3e}", report.rows.last().unwrap()[3]);
    }
    let t = cfg.tol.clone();
    for c in ["d_u_fixed", "d_p_fixed", "d_q", "d_u", "d_p"] {
        decay_check(&mut report, c, t.alpha_ratio, t.exact_zero);
    }
    let alphas = report.values("alpha");
    let anchor = alphas.iter().position(|&a| a > 1.0);
    for c in ["pen_u_fixed", "pen_u", "pen_p"] {
        let v = report.values(c);
        let name = format!("bounded_{c}");
        match anchor {
            Some(k) if v.iter().any(|x| *x > t.exact_zero) => {
                let max = v.iter().copied().fold(0.0, f64::max);
                let ok = max <= t.penalty_factor * v[k];
                report.check_bool(
                    &name,
                    ok,
                    format!("max {max:.3e} vs {}x value {:.3e} at alpha = {}", t.penalty_factor, v[k], alphas[k]),
                );
            }
            Some(_) => report.check(&name, Verdict::Pass, "identically zero".into()),
            None => report.check(&name, Verdict::Unreliable, "no alpha above 1 in the ladder".into()),
        }
    }
    report.check_bool(
        "fixed_point_matches_reduced",
        oracle_worst <= t.oracle,
        format!("worst Q distance {oracle_worst:.3e} (want <= {:e})", t.oracle),
    );
    Ok(report)
}

fn alpha_label(a: f64) -> String {
    format!("D_alpha_{a}")
}

/// Table `D[level][alpha] = ‖q_{h,alpha} − q_ref‖_Q` with a Dirichlet column
/// (alpha → ∞) and a final `n_ref` row (h → 0).
pub fn run_diagram(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let m = cfg.resolve_m(cfg.levels[0])?;
    let spec = cfg.spec(m)?.dirichlet();
    let ref_space = FeSpace::new(cfg.mesh(cfg.n_ref)?)?;
    let q_ref = solve_optimal_reduced(&ref_space, &spec)?.q_opt;
    let d = |q: &TraceField| ref_space.distance_q(q, &q_ref);

    let mut report = ConvergenceReport::new(
        "diagram",
        &format!(
            "Control distances to the n_ref = {} Dirichlet-family optimum; last row is the n_ref Robin family; M = {m}",
            cfg.n_ref
        ),
    );
    report.int_column("n", "cells per side").column("h", "longest triangle side");
    for &a in &cfg.alphas {
        report.column(&alpha_label(a), &format!("Q distance of the alpha = {a} optimal control"));
    }
    report.column("D_dirichlet", "Q distance of the Dirichlet-family optimal control");

    // controls[level][alpha] with the Dirichlet control last; the final
    // entry is the n_ref row
    let mut controls: Vec<Vec<TraceField>> = Vec::new();
    for &n in cfg.levels.iter().chain(std::iter::once(&cfg.n_ref)) {
        let space = if n == cfg.n_ref { None } else { Some(FeSpace::new(cfg.mesh(n)?)?) };
        let space = space.as_ref().unwrap_or(&ref_space);
        let mut qs = Vec::new();
        for &a in &cfg.alphas {
            qs.push(solve_optimal_reduced(space, &spec.with_alpha(a)?)?.q_opt);
        }
        qs.push(if n == cfg.n_ref {
            q_ref.clone()
        } else {
            solve_optimal_reduced(space, &spec)?.q_opt
        });
        let mut row = vec![n as f64, space.mesh().h()];
        for q in &qs {
            row.push(d(q)?);
        }
        info!("diagram n={n}: D_dirichlet={:.3e}", row.last().unwrap());
        report.push_row(row);
        controls.push(qs);
    }

    let zero = cfg.tol.exact_zero;
    let k = cfg.alphas.len();
    let rows = report.rows.clone();
    let first_alpha = cfg.alphas.iter().position(|&a| a >= 1.0).unwrap_or(0);
    let mut bad_rows = Vec::new();
    for r in &rows {
        let v = &r[2 + first_alpha..2 + k];
        if !(strictly_decreasing(v) || v.iter().all(|x| x.abs() <= zero)) {
            bad_rows.push(r[0] as usize);
        }
    }
    report.check_bool(
        "rows_decrease_in_alpha",
        bad_rows.is_empty(),
        format!("rows not strictly decreasing for alpha >= 1: {bad_rows:?}"),
    );
    let mut bad_cols = Vec::new();
    for j in 2..2 + k + 1 {
        let v: Vec<f64> = rows[..cfg.levels.len()].iter().map(|r| r[j]).collect();
        if !(strictly_decreasing(&v) || v.iter().all(|x| x.abs() <= zero)) {
            bad_cols.push(report.columns[j].name.clone());
        }
    }
    report.check_bool(
        "columns_decrease_in_level",
        bad_cols.is_empty(),
        format!("columns not strictly decreasing over the levels: {bad_cols:?}"),
    );

    let nl = cfg.levels.len();
    let q_hmax = &controls[nl - 1][k];
    let q_hmax_amax = &controls[nl - 1][k - 1];
    let corner = d(q_hmax_amax)?;
    let h_tail = d(q_hmax)?;
    let a_tail = ref_space.distance_q(q_hmax_amax, q_hmax)?;
    let f = cfg.tol.diagram_factor;
    report.check_bool(
        "corner_within_tails",
        corner <= f * (h_tail + a_tail) || corner <= zero,
        format!("corner {corner:.3e} vs {f} x (h tail {h_tail:.3e} + alpha tail {a_tail:.3e})"),
    );
    let q_ref_amax = &controls[nl][k - 1];
    let paths = ref_space.distance_q(q_hmax, q_ref_amax)?;
    let a_tail_ref = d(q_ref_amax)?;
    report.check_bool(
        "iterated_limits_agree",
        paths <= f * (h_tail + a_tail_ref) || paths <= zero,
        format!(
            "alpha-first limit vs h-first limit differ by {paths:.3e}; {f} x (h tail {h_tail:.3e} + alpha tail {a_tail_ref:.3e})"
        ),
    );

    // each column tends to its own h-limit, each row to its own alpha-limit
    let mut bad_cols = Vec::new();
    for j in 0..k {
        let v: Vec<f64> = (0..nl)
            .map(|l| ref_space.distance_q(&controls[l][j], &controls[nl][j]))
            .collect::<Result<_>>()?;
        if !(strictly_decreasing(&v) || v.iter().all(|x| x.abs() <= zero)) {
            bad_cols.push(report.columns[2 + j].name.clone());
        }
    }
    report.check_bool(
        "columns_converge_to_reference",
        bad_cols.is_empty(),
        format!("distance to the n_ref control of the same family not strictly decreasing in: {bad_cols:?}"),
    );
    let mut bad_rows = Vec::new();
    for (l, qs) in controls.iter().enumerate() {
        let v: Vec<f64> = qs[first_alpha..k]
            .iter()
            .map(|q| ref_space.distance_q(q, &qs[k]))
            .collect::<Result<_>>()?;
        if !(strictly_decreasing(&v) || v.iter().all(|x| x.abs() <= zero)) {
            bad_rows.push(report.rows[l][0] as usize);
        }
    }
    report.check_bool(
        "rows_converge_to_dirichlet",
        bad_rows.is_empty(),
        format!("distance to the same-level Dirichlet control not strictly decreasing for rows: {bad_rows:?}"),
    );
    Ok(report)
}

/// Discrete constants per level, with seeded random checks of their
/// extremal inequalities.
pub fn run_constants(cfg: &ExperimentConfig, seed: u64) -> Result<ConvergenceReport> {
    const SAMPLES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ConvergenceReport::new(
        "constants",
        &format!("Discrete coercivity and trace constants; {SAMPLES} random samples per level, seed = {seed}"),
    );
    report
        .int_column("n", "cells per side")
        .column("h", "longest triangle side")
        .column("lambda_h", "min a(v,v)/|v|_V^2 over V_0h")
        .column("lambda1_h", "min (a(v,v) + int_G1 v^2)/|v|_V^2 over V_h")
        .column("gamma0_norm_h", "max |v|_Q/|v|_V over V_h")
        .column("threshold", "gamma0^2/lambda_h^2")
        .column("threshold_robin", "gamma0^2/lambda1_h^2")
        .column("sample_lambda", "smallest sampled a(v,v)/|v|_V^2 over V_0h")
        .column("sample_lambda1", "smallest sampled a_1(v,v)/|v|_V^2")
        .column("sample_gamma0", "largest sampled |v|_Q/|v|_V");

    let mut sample_ok = true;
    for &n in &cfg.levels {
        let space = FeSpace::new(cfg.mesh(n)?)?;
        let c = estimate_constants(&space)?;
        let dofs = space.mesh().dofs();
        let a1 = space.stiffness().add_scaled(1.0, space.gamma1_mass());
        let (mut s_l, mut s_l1, mut s_g) = (f64::INFINITY, f64::INFINITY, 0.0f64);
        for _ in 0..SAMPLES {
            let mut v: Vec<f64> = (0..space.mesh().num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vv = space.energy().quad_form(&v);
            s_l1 = s_l1.min(a1.quad_form(&v) / vv);
            let field = NodalField::new(space.mesh().clone(), v.clone())?;
            s_g = s_g.max(space.norm(&field, NormKind::Q)? / vv.sqrt());
            for &i in &dofs.gamma1_dofs {
                v[i] = 0.0;
            }
            s_l = s_l.min(space.stiffness().quad_form(&v) / space.energy().quad_form(&v));
        }
        let slack = 1e-10;
        sample_ok &= s_l >= c.lambda_h * (1.0 - slack) && s_l1 >= c.lambda1_h * (1.0 - slack);
        sample_ok &= s_g <= c.gamma0_norm_h * (1.0 + slack);
        report.push_row(vec![
            n as f64,
            space.mesh().h(),
            c.lambda_h,
            c.lambda1_h,
            c.gamma0_norm_h,
            c.contraction_threshold(),
            c.contraction_threshold_robin(1.0),
            s_l,
            s_l1,
            s_g,
        ]);
    }
    report.check_bool(
        "extremal_inequalities",
        sample_ok,
        "sampled ratios respect lambda_h, lambda1_h and gamma0_norm_h".into(),
    );
    let lam = report.values("lambda_h");
    let lam1 = report.values("lambda1_h");
    let g0 = report.values("gamma0_norm_h");
    let rel = 1e-8;
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel));
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] * (1.0 - rel));
    report.check_bool(
        "nested_monotonicity",
        nonincreasing(&lam) && nonincreasing(&lam1) && nondecreasing(&g0),
        "lambda_h and lambda1_h non-increasing, gamma0_norm_h non-decreasing under refinement".into(),
    );
    let bounds = lam.iter().chain(&lam1).all(|&l| l > 0.0 && l <= 1.0) && g0.iter().all(|&g| g > 0.0);
    report.check_bool("ranges", bounds, "0 < lambda <= 1 and gamma0_norm_h > 0".into());
    Ok(report)
}
