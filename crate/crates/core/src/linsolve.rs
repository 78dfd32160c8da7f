//! SPD solvers and discrete coercivity/trace constants.

use nalgebra::DMatrix;

use crate::assembly::{dot, SymmetricSparseMatrix};
use crate::error::{Error, Result};
use crate::space::FeSpace;

pub const DEFAULT_TOL: f64 = 1e-12;
/// Pivots below this fraction of the original diagonal count as singular.
const PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual `‖Ax − b‖ / ‖b‖`.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients with relative residual `tol`.
pub fn solve_spd(matrix: &SymmetricSparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    conjugate_gradient(matrix, rhs, None, tol, None).map(|o| o.x)
}

pub fn conjugate_gradient(
    matrix: &SymmetricSparseMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<CgOutcome> {
    let n = matrix.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            });
        }
    }
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let max_iter = max_iter.unwrap_or(20 * n + 1000);
    let inv_diag: Vec<f64> = matrix
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut ax = vec![0.0; n];
    let mut iterations = 0;
    // restart from the true residual whenever the recursive one has drifted
    loop {
        matrix.matvec_into(&x, &mut ax);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let true_res = dot(&r, &r).sqrt() / bnorm;
        if true_res <= tol {
            return Ok(CgOutcome {
                x,
                iterations,
                residual: true_res,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: true_res,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while iterations < max_iter {
            iterations += 1;
            matrix.matvec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::NotConverged {
                    iterations,
                    residual: dot(&r, &r).sqrt() / bnorm,
                });
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            if dot(&r, &r).sqrt() / bnorm <= 0.5 * tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Banded Cholesky factor `A = L Lᵀ`. On the structured grids the natural
/// vertex numbering gives bandwidth `n + 2`, so factoring once and solving
/// many right-hand sides is cheap.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
    matrix: SymmetricSparseMatrix,
}

impl BandedCholesky {
    pub fn factor(matrix: &SymmetricSparseMatrix) -> Result<Self> {
        let n = matrix.dim();
        let bw = matrix.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                if j <= i {
                    band[i * w + (j + bw - i)] = v;
                }
            }
        }
        let diag = matrix.diagonal();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = band[i * w + (j + bw - i)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > PIVOT_RTOL * diag[i].abs()) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self {
            n,
            bw,
            band,
            matrix: matrix.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SymmetricSparseMatrix {
        &self.matrix
    }

    fn substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let l = |i: usize, j: usize| self.band[i * w + (j + bw - i)];
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l(i, k) * y[k];
            }
            y[i] = s / l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= l(k, i) * y[k];
            }
            y[i] = s / l(i, i);
        }
        y
    }

    /// Direct solve followed by up to three steps of iterative refinement
    /// until the relative residual is at most `tol`.
    pub fn solve_tol(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let bnorm = dot(rhs, rhs).sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let mut x = self.substitute(rhs);
        let mut residual = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            residual = dot(&r, &r).sqrt() / bnorm;
            if residual <= tol {
                return Ok(x);
            }
            let dx = self.substitute(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        if residual <= 10.0 * tol {
            return Ok(x);
        }
        Err(Error::NotConverged {
            iterations: 4,
            residual,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_tol(rhs, DEFAULT_TOL)
    }
}

/// Discrete surrogates of the coercivity constants and the trace norm.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscreteConstants {
    /// `min_{v ∈ V_0h} a(v,v) / ‖v‖²_V`.
    pub lambda_h: f64,
    /// `min_{v ∈ V_h} (a(v,v) + ∫_{Γ1} v²) / ‖v‖²_V`.
    pub lambda1_h: f64,
    /// `max_{v ∈ V_h} ‖γ0 v‖_Q / ‖v‖_V`.
    pub gamma0_norm_h: f64,
    pub mesh_n: usize,
}

impl DiscreteConstants {
    pub fn lambda_alpha(&self, alpha: f64) -> f64 {
        self.lambda1_h * alpha.min(1.0)
    }

    /// Threshold the control weight must exceed for the Dirichlet-type
    /// fixed-point map to contract.
    pub fn contraction_threshold(&self) -> f64 {
        self.gamma0_norm_h.powi(2) / self.lambda_h.powi(2)
    }

    pub fn contraction_threshold_robin(&self, alpha: f64) -> f64 {
        self.gamma0_norm_h.powi(2) / self.lambda_alpha(alpha).powi(2)
    }

    /// Lipschitz bound `‖γ0‖² / (M λ²)` of the fixed-point map; `alpha`
    /// selects the Robin family.
    pub fn fixed_point_lipschitz(&self, m: f64, alpha: Option<f64>) -> f64 {
        match alpha {
            None => self.contraction_threshold() / m,
            Some(a) => self.contraction_threshold_robin(a) / m,
        }
    }

    /// Lipschitz bound `‖γ0‖ / λ` of the control-to-state map.
    pub fn state_lipschitz(&self, alpha: Option<f64>) -> f64 {
        match alpha {
            None => self.gamma0_norm_h / self.lambda_h,
            Some(a) => self.gamma0_norm_h / self.lambda_alpha(a),
        }
    }
}

const EIG_TOL: f64 = 1e-8;

/// Estimates `lambda_h`, `lambda1_h` by inverse iteration and the trace norm
/// by an exact reduction onto the Gamma2 dofs.
pub fn estimate_constants(space: &FeSpace) -> Result<DiscreteConstants> {
    let dofs = space.mesh().dofs();
    let energy = space.energy();

    let a_free = space.dirichlet_factor()?;
    let k_free = energy.restrict(&dofs.free_dofs);
    let lambda_h = smallest_generalized_eigenvalue(a_free, &k_free)?;

    let a1 = space.stiffness().add_scaled(1.0, space.gamma1_mass());
    let a1_factor = BandedCholesky::factor(&a1)?;
    let lambda1_h = smallest_generalized_eigenvalue(&a1_factor, energy)?;

    let gamma0_norm_h = trace_norm(space)?;
    Ok(DiscreteConstants {
        lambda_h,
        lambda1_h,
        gamma0_norm_h,
        mesh_n: space.mesh().n(),
    })
}

/// Smallest `μ` with `A x = μ K x`, by inverse iteration on `A⁻¹ K`.
fn smallest_generalized_eigenvalue(a: &BandedCholesky, k: &SymmetricSparseMatrix) -> Result<f64> {
    let n = a.dim();
    let mut x = vec![1.0; n];
    let mut rho = f64::INFINITY;
    for it in 0..5000 {
        let kx = k.matvec(&x);
        let mut y = a.solve(&kx)?;
        let ky = k.quad_form(&y);
        let scale = 1.0 / ky.sqrt();
        for v in &mut y {
            *v *= scale;
        }
        let new_rho = a.matrix().quad_form(&y);
        x = y;
        if (new_rho - rho).abs() <= 0.01 * EIG_TOL * new_rho && it > 2 {
            return Ok(new_rho);
        }
        rho = new_rho;
    }
    Err(Error::NotConverged {
        iterations: 5000,
        residual: rho,
    })
}

/// `max ‖γ0 v‖²_Q / ‖v‖²_V` equals the largest eigenvalue of `B̂` against the
/// Schur complement of `A + M_H` on the trace dofs, whose inverse is the
/// trace block of `(A + M_H)⁻¹`.
fn trace_norm(space: &FeSpace) -> Result<f64> {
    let dofs = space.mesh().dofs();
    let trace = &dofs.gamma2_trace_dofs;
    let m = trace.len();
    let factor = BandedCholesky::factor(space.energy())?;
    let mut t = DMatrix::zeros(m, m);
    let mut e = vec![0.0; dofs.num_dofs];
    for (col, &v) in trace.iter().enumerate() {
        e[v] = 1.0;
        let x = factor.solve(&e)?;
        e[v] = 0.0;
        for (row, &w) in trace.iter().enumerate() {
            t[(row, col)] = x[w];
        }
    }
    let t = 0.5 * (&t + t.transpose());
    let b = space.trace_mass().to_dense();
    let l = b
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?
        .l();
    let s = l.transpose() * t * &l;
    let s = 0.5 * (&s + s.transpose());
    let top = s.symmetric_eigen().eigenvalues.max();
    Ok(top.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplace_1d(n: usize) -> SymmetricSparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SymmetricSparseMatrix::from_triplets(n, &t)
    }

    #[test]
    fn diagonal_system() {
        let d = SymmetricSparseMatrix::from_diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(solve_spd(&d, &[1.0, -2.0, 3.0], 1e-12).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(10);
        assert!(solve_spd(&a, &[0.0; 10], 1e-12).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = laplace_1d(4);
        assert!(matches!(solve_spd(&a, &[1.0; 3], 1e-12), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn singular_system_fails() {
        // pure Neumann stiffness: the constant mode is in the kernel
        let mesh = Mesh::structured(3, &[Side::Bottom]).unwrap();
        let a = crate::assembly::assemble_stiffness(&mesh).unwrap();
        assert!(BandedCholesky::factor(&a).is_err());
        let rhs: Vec<f64> = (0..a.dim()).map(|i| 1.0 + i as f64).collect();
        assert!(conjugate_gradient(&a, &rhs, None, 1e-12, Some(200)).is_err());
    }

    #[test]
    fn recovers_known_solution_on_free_dofs() {
        let mesh = Mesh::structured(8, &[Side::Bottom]).unwrap();
        let space = FeSpace::new(mesh.clone()).unwrap();
        let a = space.stiffness().restrict(&mesh.dofs().free_dofs);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&xs);
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        let chol = space.dirichlet_factor().unwrap().solve(&b).unwrap();
        for i in 0..xs.len() {
            assert!((x[i] - xs[i]).abs() < 1e-10);
            assert!((chol[i] - xs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_matches_dense() {
        let a = laplace_1d(6).add_scaled(0.5, &SymmetricSparseMatrix::identity(6));
        let f = BandedCholesky::factor(&a).unwrap();
        let b = [1.0, 0.0, -1.0, 2.0, 0.5, 3.0];
        let x = f.solve(&b).unwrap();
        let dense = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_row_slice(&b));
        for i in 0..6 {
            assert!((x[i] - dense[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn constants_are_in_range() {
        let space = FeSpace::new(Mesh::structured(4, &[Side::Bottom]).unwrap()).unwrap();
        let c = estimate_constants(&space).unwrap();
        assert!(c.lambda_h > 0.0 && c.lambda_h < 1.0);
        assert!(c.lambda1_h > 0.0 && c.lambda1_h <= 1.0);
        // v = 1 gives ‖γ0 v‖²_Q / ‖v‖²_V = |Γ2| = 3
        assert!(c.gamma0_norm_h >= 3f64.sqrt() - 1e-12);
    }

    #[test]
    fn constants_match_dense_generalized_eigenproblem() {
        let space = FeSpace::new(Mesh::structured(3, &[Side::Bottom, Side::Right]).unwrap()).unwrap();
        let c = estimate_constants(&space).unwrap();
        let dofs = space.mesh().dofs();
        let dense_gen = |a: DMatrix<f64>, k: DMatrix<f64>| {
            let l = k.cholesky().unwrap();
            let linv = l.l().try_inverse().unwrap();
            let s = &linv * a * linv.transpose();
            let s = 0.5 * (&s + s.transpose());
            s.symmetric_eigen().eigenvalues
        };
        let k = space.energy().to_dense();
        let af = space.stiffness().restrict(&dofs.free_dofs).to_dense();
        let kf = space.energy().restrict(&dofs.free_dofs).to_dense();
        let lam = dense_gen(af, kf).min();
        let a1 = space.stiffness().add_scaled(1.0, space.gamma1_mass()).to_dense();
        let lam1 = dense_gen(a1, k.clone()).min();
        let g = dense_gen(space.gamma2_mass().to_dense(), k).max().sqrt();
        assert!((c.lambda_h - lam).abs() <= 1e-8 * lam);
        assert!((c.lambda1_h - lam1).abs() <= 1e-8 * lam1);
        assert!((c.gamma0_norm_h - g).abs() <= 1e-8 * g);
    }
}
