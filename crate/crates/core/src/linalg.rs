//! Least-squares solves shared by the regression stages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge penalty relative to the largest squared column norm.
pub const RIDGE_FACTOR: f64 = 1e-10;

/// A least-squares solution and whether the ridge fallback was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub x: DVector<f64>,
    pub rank_deficient: bool,
}

/// Minimum-norm least squares via SVD; falls back to a tiny ridge when rank deficient.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LsSolution> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument("row count mismatch in least squares".into()));
    }
    if a.ncols() == 0 {
        return Ok(LsSolution {
            x: DVector::zeros(0),
            rank_deficient: false,
        });
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::Singular("non-finite entries in least-squares system".into()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank == a.ncols() && smax > 0.0 {
        let x = svd.solve(b, tol).map_err(|e| Error::Singular(e.to_string()))?;
        return Ok(LsSolution {
            x,
            rank_deficient: false,
        });
    }
    let max_sq = a.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    if max_sq == 0.0 {
        return Err(Error::Singular("all columns vanish".into()));
    }
    let mut normal = a.transpose() * a;
    for i in 0..normal.nrows() {
        normal[(i, i)] += RIDGE_FACTOR * max_sq;
    }
    let rhs = a.transpose() * b;
    let x = normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular("ridge system is not positive definite".into()))?;
    Ok(LsSolution {
        x,
        rank_deficient: true,
    })
}

/// Columns `cols` of `a` restricted to `rows` (all rows when `None`).
pub fn submatrix(a: &DMatrix<f64>, rows: Option<&[usize]>, cols: &[usize]) -> DMatrix<f64> {
    match rows {
        Some(rows) => DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]),
        None => a.select_columns(cols),
    }
}

pub fn subvector(b: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&r| b[r]))
}
