use super::sparse::{dot, norm2, SparseSymmetricSystem};
use crate::error::{Error, Result};

/// Relative residual target of [`solve_spd`].
pub const SPD_RELATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub relative_tolerance: f64,
    /// Iteration cap as a multiple of the system dimension.
    pub max_iter_factor: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            relative_tolerance: SPD_RELATIVE_TOLERANCE,
            max_iter_factor: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` for symmetric positive definite `A` by Jacobi-preconditioned CG.
pub fn solve_spd(system: &SparseSymmetricSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    pcg(system, rhs, None, &CgOptions::default()).map(|r| r.solution)
}

pub fn pcg(
    a: &SparseSymmetricSystem,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<CgReport> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgReport {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { pivot: i, value: d })
            }
        })
        .collect::<Result<_>>()?;

    let mut x = match guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let target = opts.relative_tolerance * bnorm;
    let cap = opts.max_iter_factor.max(1) * n.max(1);

    let mut r = residual(a, &x, b);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    loop {
        if norm2(&r) <= target {
            // the recurrence residual can drift from the true one; confirm before returning
            let true_r = residual(a, &x, b);
            let rel = norm2(&true_r) / bnorm;
            if rel <= opts.relative_tolerance {
                return Ok(CgReport {
                    solution: x,
                    iterations,
                    relative_residual: rel,
                });
            }
            r = true_r;
            z = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
            p.clone_from(&z);
            rz = dot(&r, &z);
        }
        if iterations >= cap {
            return Err(Error::SolverFailure {
                iterations,
                residual: norm2(&residual(a, &x, b)) / bnorm,
            });
        }

        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: iterations,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

fn residual(a: &SparseSymmetricSystem, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
}

/// Solver for `[A c; c^T 0] [x; lambda] = [rhs; r]` with one scalar multiplier.
///
/// `A^{-1} c` only depends on the matrix and the coupling column, so it is
/// computed once and reused across right-hand sides.
#[derive(Debug, Clone)]
pub struct ScalarSaddleSolver {
    matrix: SparseSymmetricSystem,
    coupling: Vec<f64>,
    a_inv_c: Vec<f64>,
    schur: f64,
    opts: CgOptions,
}

impl ScalarSaddleSolver {
    pub fn new(matrix: SparseSymmetricSystem, coupling: Vec<f64>, opts: CgOptions) -> Result<Self> {
        if coupling.len() != matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: matrix.dim(),
                actual: coupling.len(),
            });
        }
        let a_inv_c = pcg(&matrix, &coupling, None, &opts)?.solution;
        let schur = dot(&coupling, &a_inv_c);
        if schur == 0.0 || !schur.is_finite() {
            return Err(Error::SingularConstraint(schur));
        }
        Ok(Self {
            matrix,
            coupling,
            a_inv_c,
            schur,
            opts,
        })
    }

    pub fn matrix(&self) -> &SparseSymmetricSystem {
        &self.matrix
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn solve(&self, rhs: &[f64], constraint_value: f64) -> Result<(Vec<f64>, f64)> {
        let y = pcg(&self.matrix, rhs, None, &self.opts)?.solution;
        let lambda = (dot(&self.coupling, &y) - constraint_value) / self.schur;
        let x = y
            .iter()
            .zip(&self.a_inv_c)
            .map(|(y, w)| y - lambda * w)
            .collect();
        Ok((x, lambda))
    }
}

/// One-shot Schur-complement solve of the scalar saddle-point system.
pub fn solve_saddle_scalar(
    a: &SparseSymmetricSystem,
    c: &[f64],
    rhs: &[f64],
    r: f64,
) -> Result<(Vec<f64>, f64)> {
    ScalarSaddleSolver::new(a.clone(), c.to_vec(), CgOptions::default())?.solve(rhs, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_returns_rhs() {
        let a = SparseSymmetricSystem::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(solve_spd(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn two_by_two_hand_case() {
        let a = SparseSymmetricSystem::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve_spd(&a, &[1.0, 2.0]).unwrap();
        assert!(close(&x, &[1.0 / 11.0, 7.0 / 11.0], 1e-12), "{x:?}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = SparseSymmetricSystem::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(solve_spd(&a, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn non_convergence_reports_residual() {
        // indefinite but with a positive diagonal: CG cannot succeed
        let a = SparseSymmetricSystem::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let err = pcg(
            &a,
            &[1.0, 0.0],
            None,
            &CgOptions {
                relative_tolerance: 1e-12,
                max_iter_factor: 1,
            },
        )
        .unwrap_err();
        assert!(err.is_solver_failure(), "{err}");
    }

    #[test]
    fn saddle_identity_case() {
        let a = SparseSymmetricSystem::identity(2);
        let (x, lambda) = solve_saddle_scalar(&a, &[1.0, 1.0], &[0.0, 0.0], 2.0).unwrap();
        assert!(close(&x, &[1.0, 1.0], 1e-14));
        assert!((lambda + 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_scaled_identity_case() {
        let a = SparseSymmetricSystem::from_dense(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let (x, lambda) = solve_saddle_scalar(&a, &[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(close(&x, &[1.0, 0.0], 1e-14));
        assert!((lambda + 2.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_inactive_constraint() {
        let a = SparseSymmetricSystem::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let rhs = [1.0, 2.0];
        let free = solve_spd(&a, &rhs).unwrap();
        let c = [0.3, 0.9];
        let r = dot(&c, &free);
        let (x, lambda) = solve_saddle_scalar(&a, &c, &rhs, r).unwrap();
        assert!(lambda.abs() < 1e-12);
        assert!(close(&x, &free, 1e-12));
    }

    #[test]
    fn saddle_zero_coupling_is_singular() {
        let a = SparseSymmetricSystem::identity(2);
        let err = solve_saddle_scalar(&a, &[0.0, 0.0], &[1.0, 1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::SingularConstraint(_)));
    }
}
