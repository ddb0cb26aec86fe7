//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const PSD_TOL: f64 = 1e-10;

/// Checks symmetry and positive semi-definiteness within [`PSD_TOL`].
pub fn check_symmetric_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Domain(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    if asym > PSD_TOL {
        return Err(Error::Domain(format!("{what} is not symmetric (max |M - M^T| = {asym:e})")));
    }
    let min_eig = symmetrize(m).symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL {
        return Err(Error::Domain(format!("{what} is not positive semi-definite (min eigenvalue {min_eig:e})")));
    }
    Ok(())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `√(xᵀ M x)` for symmetric PSD `M`.
pub fn m_norm(x: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    check_symmetric_psd(m, "M")?;
    if m.nrows() != x.len() {
        return Err(Error::Domain(format!("M is {}x{} but x has length {}", m.nrows(), m.ncols(), x.len())));
    }
    Ok(x.dot(&(m * x)).max(0.0).sqrt())
}

/// Principal square root of a symmetric PSD matrix (negative eigenvalues clamped to 0).
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Largest eigenvalue of a symmetric PSD matrix, i.e. its operator norm.
pub fn psd_op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().max().max(0.0)
}

/// Spectral norm (largest singular value) of an arbitrary matrix.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Effective dimension `Tr(A) / ‖A‖` of a PSD matrix.
pub fn effective_dimension(m: &DMatrix<f64>) -> f64 {
    m.trace() / psd_op_norm(m)
}
