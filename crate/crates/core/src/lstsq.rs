//! Householder-QR least squares shared by the per-firm and pooled fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal condition estimate below which a design is rejected.
pub const RCOND_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl LeastSquares {
    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

/// Solve `min ‖y - Z b‖²` for a row-major `rows × cols` design.
pub(crate) fn solve(rows: usize, cols: usize, design: &[f64], y: &[f64], context: impl FnOnce() -> String) -> Result<LeastSquares> {
    debug_assert_eq!(design.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    if rows < cols {
        return Err(Error::RankDeficient {
            context: context(),
            rcond: 0.0,
        });
    }
    let z = DMatrix::from_row_slice(rows, cols, design);
    let qr = z.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..cols).map(|j| r[(j, j)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond >= RCOND_TOLERANCE) {
        return Err(Error::RankDeficient {
            context: context(),
            rcond,
        });
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, cols).into_owned();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::RankDeficient {
            context: context(),
            rcond,
        })?;
    let fitted = &z * &coef;
    let residuals = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok(LeastSquares {
        coef: coef.as_slice().to_vec(),
        residuals,
    })
}
