//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type State = DVector<f64>;

/// Tolerance used when validating positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

pub fn state(coords: &[f64]) -> State {
    DVector::from_column_slice(coords)
}

pub fn check_finite(x: &State) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidState("zero-dimensional state".into()));
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidState(format!("coordinate {i} is {}", x[i]))),
        None => Ok(()),
    }
}

pub fn check_dim(x: &State, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Dimension { expected: n, got: x.len() });
    }
    Ok(())
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Construction("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Construction("ragged or empty matrix rows".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Construction("non-finite matrix entry".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn require_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Construction(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of the symmetric part, or an error when it is below `-PSD_TOL`.
pub fn require_monotone(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    require_square(m, what)?;
    let (lo, _) = symmetric_eigen_range(&symmetric_part(m));
    if lo < -PSD_TOL {
        return Err(Error::Construction(format!(
            "{what} is not positive semidefinite (smallest symmetric eigenvalue {lo:e})"
        )));
    }
    Ok(lo.max(0.0))
}

pub fn require_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    require_square(m, what)?;
    let asym = (m - m.transpose()).amax();
    if asym > PSD_TOL * (1.0 + m.amax()) {
        return Err(Error::Construction(format!("{what} is not symmetric")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((spectral_norm(&r) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_check_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(require_monotone(&m, "M").is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        assert_eq!(require_monotone(&skew, "M").unwrap(), 0.0);
    }

    #[test]
    fn non_finite_state_rejected() {
        assert!(check_finite(&state(&[1.0, f64::NAN])).is_err());
        assert!(check_finite(&state(&[])).is_err());
        assert!(check_finite(&state(&[1.0, -2.0])).is_ok());
    }
}
