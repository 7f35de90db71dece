//! Small dense linear-algebra helpers: regularized inversion of the moment
//! covariance and least-squares solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Relative eigenvalue floor, scaled by `trace(S)/q`.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Ridge added when too many eigenvalues fall below the floor.
pub const RIDGE: f64 = 1e-8;

/// Inverse of the long-run covariance used as the second-step weighting matrix.
#[derive(Debug, Clone)]
pub struct Weighting {
    pub matrix: DMatrix<f64>,
    pub diagnostics: WeightingDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingDiagnostics {
    /// Largest over smallest retained eigenvalue.
    pub condition_number: f64,
    pub dropped_eigenvalues: usize,
    /// Ridge added to the diagonal, if any.
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightingError {
    /// `S` is zero, non-finite, or not square.
    Degenerate(String),
}

/// Pseudo-inverse of a symmetric PSD matrix through its eigendecomposition.
/// Eigenvalues below `1e-10 · trace(S)/q` are dropped; if more than `q − p`
/// would be dropped, a ridge of `1e-8 · trace(S)/q` is added and the result
/// inverted instead.
pub fn regularized_inverse(s: &DMatrix<f64>, p: usize) -> Result<Weighting, WeightingError> {
    let q = s.nrows();
    if q == 0 || s.ncols() != q {
        return Err(WeightingError::Degenerate(format!(
            "S is {}×{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(WeightingError::Degenerate(
            "S has non-finite entries".into(),
        ));
    }
    let scale = s.trace() / q as f64;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(WeightingError::Degenerate(format!("trace(S)/q = {scale}")));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let floor = EIGEN_FLOOR * scale;
    let dropped = eig.eigenvalues.iter().filter(|&&l| l < floor).count();
    if dropped <= q.saturating_sub(p) {
        let kept: Vec<f64> = eig
            .eigenvalues
            .iter()
            .copied()
            .filter(|&l| l >= floor)
            .collect();
        let (lo, hi) = kept.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
        let inv = eig
            .eigenvalues
            .map(|l| if l >= floor { 1.0 / l } else { 0.0 });
        let matrix =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        return Ok(Weighting {
            matrix: (&matrix + matrix.transpose()) * 0.5,
            diagnostics: WeightingDiagnostics {
                condition_number: hi / lo,
                dropped_eigenvalues: dropped,
                ridge: None,
            },
        });
    }
    let ridge = RIDGE * scale;
    let shifted = eig.eigenvalues.map(|l| l.max(0.0) + ridge);
    let (lo, hi) = shifted
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    let inv = shifted.map(|l| 1.0 / l);
    let matrix = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    Ok(Weighting {
        matrix: (&matrix + matrix.transpose()) * 0.5,
        diagnostics: WeightingDiagnostics {
            condition_number: hi / lo,
            dropped_eigenvalues: dropped,
            ridge: Some(ridge),
        },
    })
}

/// Inverse of a symmetric positive (semi-)definite matrix: Cholesky when it
/// succeeds, otherwise an SVD pseudo-inverse.
pub fn symmetric_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let inv = match sym.clone().cholesky() {
        Some(c) => c.inverse(),
        None => sym
            .svd(true, true)
            .pseudo_inverse(1e-12 * a.amax().max(f64::MIN_POSITIVE))
            .expect("both singular factors were requested"),
    };
    (&inv + inv.transpose()) * 0.5
}

/// Minimum-norm least-squares solution of `x β = y`.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max() * x.nrows().max(x.ncols()) as f64;
    svd.solve(y, tol)
        .ok()
        .filter(|b| b.iter().all(|v| v.is_finite()))
}
