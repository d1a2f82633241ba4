//! Tridiagonal (Thomas) factorization shared by the streamfunction solve and
//! the implicit diffusion step. Factor once per (matrix, wavenumber), apply to
//! many right-hand sides.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TridiagError {
    #[error("matrix dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("band lengths inconsistent with dimension {n}: sub {sub}, diag {diag}, sup {sup}")]
    BandLengths {
        n: usize,
        sub: usize,
        diag: usize,
        sup: usize,
    },
    #[error("near-singular pivot {pivot:.3e} at row {row}")]
    SingularPivot { row: usize, pivot: f64 },
    #[error("right-hand side length {got}, expected {expected}")]
    RhsLength { got: usize, expected: usize },
}

/// LU factorization of a tridiagonal matrix, without pivoting (our matrices
/// are diagonally dominant or mildly perturbed from it).
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    /// Multipliers l_i = a_i / d_{i-1}, length n-1.
    lower: Vec<f64>,
    /// Pivots after elimination, length n.
    diag: Vec<f64>,
    /// Original superdiagonal, length n-1.
    upper: Vec<f64>,
}

const PIVOT_FLOOR: f64 = 1e-14;

impl TridiagFactor {
    /// Factor the matrix with subdiagonal `sub` (length n-1), diagonal `diag`
    /// (length n), superdiagonal `sup` (length n-1).
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<TridiagFactor, TridiagError> {
        let n = diag.len();
        if n < 2 {
            return Err(TridiagError::TooSmall(n));
        }
        if sub.len() != n - 1 || sup.len() != n - 1 {
            return Err(TridiagError::BandLengths {
                n,
                sub: sub.len(),
                diag: n,
                sup: sup.len(),
            });
        }
        let scale = diag
            .iter()
            .chain(sub)
            .chain(sup)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let mut lower = vec![0.0; n - 1];
        let mut piv = diag.to_vec();
        for i in 1..n {
            let prev = piv[i - 1];
            if prev.abs() < PIVOT_FLOOR * scale {
                return Err(TridiagError::SingularPivot {
                    row: i - 1,
                    pivot: prev,
                });
            }
            let l = sub[i - 1] / prev;
            lower[i - 1] = l;
            piv[i] -= l * sup[i - 1];
        }
        if piv[n - 1].abs() < PIVOT_FLOOR * scale {
            return Err(TridiagError::SingularPivot {
                row: n - 1,
                pivot: piv[n - 1],
            });
        }
        Ok(TridiagFactor {
            lower,
            diag: piv,
            upper: sup.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), TridiagError> {
        let n = self.dim();
        if b.len() != n {
            return Err(TridiagError::RhsLength {
                got: b.len(),
                expected: n,
            });
        }
        for i in 1..n {
            b[i] -= self.lower[i - 1] * b[i - 1];
        }
        b[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1]) / self.diag[i];
        }
        Ok(())
    }

}

/// y = A x for raw tridiagonal bands (no factorization required).
pub(crate) fn banded_apply(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64], y: &mut [f64]) {
    let n = diag.len();
    debug_assert_eq!(sub.len(), n - 1);
    debug_assert_eq!(sup.len(), n - 1);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(y.len(), n);
    for i in 0..n {
        let mut acc = diag[i] * x[i];
        if i > 0 {
            acc += sub[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            acc += sup[i] * x[i + 1];
        }
        y[i] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3; 6; 5] has x = [1; 1; 2].
        let f = TridiagFactor::new(&[1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0]).unwrap();
        let mut b = vec![3.0, 6.0, 5.0];
        f.solve_in_place(&mut b).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
        assert!((b[1] - 1.0).abs() < 1e-14);
        assert!((b[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn apply_inverts_solve() {
        let n = 40;
        let sub: Vec<f64> = (0..n - 1).map(|i| 1.0 + 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|i| 1.0 - 0.005 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| -4.0 - 0.1 * i as f64).collect();
        let f = TridiagFactor::new(&sub, &diag, &sup).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut y = vec![0.0; n];
        banded_apply(&sub, &diag, &sup, &x, &mut y);
        f.solve_in_place(&mut y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_singular_matrix() {
        // Row-sum-zero matrix with a zero eigenvalue reachable by elimination.
        let err = TridiagFactor::new(&[1.0], &[1.0, 1.0], &[1.0]);
        assert!(matches!(err, Err(TridiagError::SingularPivot { .. })));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(TridiagFactor::new(&[], &[1.0], &[]).is_err());
        assert!(TridiagFactor::new(&[1.0], &[1.0, 1.0, 1.0], &[1.0]).is_err());
        let f = TridiagFactor::new(&[1.0], &[2.0, 2.0], &[1.0]).unwrap();
        assert!(f.solve_in_place(&mut [1.0, 2.0, 3.0]).is_err());
    }
}
