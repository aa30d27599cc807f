//! Cosine sieve basis on `[0, 1]` and the design vectors built from it.
//!
//! `B_0(s) = 1` and `B_j(s) = √2 cos(jπs)` for `j ≥ 1`; the family is
//! orthonormal in `L²[0,1]` and every non-constant member integrates to
//! zero, so a time-varying intercept normalized to mean zero is expanded
//! in `B_1..B_{m-1}` only.
//!
//! A design row for period `t` of a panel with `p` regressors is laid out as
//!
//! ```text
//! [1?] [B_1(τ)..B_{m-1}(τ)] [x_1·B_0(τ)..x_1·B_{m-1}(τ)] .. [x_p·B_0(τ)..x_p·B_{m-1}(τ)]
//! ```
//!
//! with `τ = t/T` and the leading `1` present only when an intercept is
//! requested.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// A truncated cosine basis of `m` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    m: usize,
    include_leading: bool,
}

impl BasisSpec {
    /// Full basis `B_0..B_{m-1}`.
    pub fn full(m: usize) -> Result<Self> {
        Self::new(m, true)
    }

    /// Mean-zero basis `B_1..B_{m-1}`.
    pub fn without_leading(m: usize) -> Result<Self> {
        Self::new(m, false)
    }

    fn new(m: usize, include_leading: bool) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("basis size m must be at least 1".into()));
        }
        Ok(Self { m, include_leading })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        if self.include_leading {
            self.m
        } else {
            self.m - 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evaluate every basis term at `s`.
    pub fn eval(&self, s: f64) -> Result<Vec<f64>> {
        check_unit(s)?;
        let first = usize::from(!self.include_leading);
        Ok((first..self.m).map(|j| cosine(j, s)).collect())
    }
}

#[inline]
pub(crate) fn cosine(j: usize, s: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT_2 * (j as f64 * PI * s).cos()
    }
}

fn check_unit(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("basis argument {s} outside [0, 1]")))
    }
}

/// `B_j(s)`.
pub fn basis_value(j: usize, s: f64) -> Result<f64> {
    check_unit(s)?;
    Ok(cosine(j, s))
}

/// Number of regressor coefficients `m-1 + m·p` (no intercept).
pub fn coefficient_count(m: usize, p: usize) -> usize {
    m - 1 + m * p
}

/// A sieve design row, see the module docs for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub values: Vec<f64>,
}

/// Build the design row for regressors `x` at period `t` of `T` (1-based).
pub fn design_row(x: &[f64], t: usize, periods: usize, m: usize, with_intercept: bool) -> Result<DesignRow> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("sieve size m = {m} must be at least 2")));
    }
    if t == 0 || t > periods {
        return Err(Error::InvalidInput(format!("period {t} outside 1..={periods}")));
    }
    let mut values = Vec::with_capacity(usize::from(with_intercept) + coefficient_count(m, x.len()));
    fill_row(&mut values, x, t as f64 / periods as f64, m, with_intercept);
    Ok(DesignRow { values })
}

/// Append a design row at `τ = tau` to `out` without validation.
pub(crate) fn fill_row(out: &mut Vec<f64>, x: &[f64], tau: f64, m: usize, with_intercept: bool) {
    let b: Vec<f64> = (0..m).map(|j| cosine(j, tau)).collect();
    if with_intercept {
        out.push(1.0);
    }
    out.extend_from_slice(&b[1..]);
    for &xl in x {
        out.extend(b.iter().map(|bj| xl * bj));
    }
}

/// Subtract the arithmetic mean from a series.
pub fn within_demean(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("cannot demean an empty series".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(series.iter().map(|v| v - mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn basis_values() {
        assert_eq!(basis_value(0, 0.37).unwrap(), 1.0);
        assert_abs_diff_eq!(basis_value(1, 0.0).unwrap(), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(basis_value(2, 0.5).unwrap(), -SQRT_2, epsilon = 1e-14);
        assert!(basis_value(1, 1.2).is_err());
        assert!(basis_value(1, -0.01).is_err());
    }

    #[test]
    fn spec_lengths() {
        assert_eq!(BasisSpec::full(4).unwrap().eval(0.3).unwrap().len(), 4);
        assert_eq!(BasisSpec::without_leading(4).unwrap().eval(0.3).unwrap().len(), 3);
        assert!(BasisSpec::without_leading(1).unwrap().is_empty());
        assert!(BasisSpec::full(0).is_err());
    }

    #[test]
    fn design_row_no_regressors() {
        let row = design_row(&[], 7, 7, 2, true).unwrap();
        assert_eq!(row.values.len(), 2);
        assert_eq!(row.values[0], 1.0);
        assert_abs_diff_eq!(row.values[1], -SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn design_row_single_regressor() {
        let row = design_row(&[2.0], 1, 2, 2, false).unwrap();
        let expected = [0.0, 2.0, 0.0];
        assert_eq!(row.values.len(), 3);
        for (a, b) in row.values.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn design_row_matches_scalar_evaluation() {
        let x = [1.5, -0.5];
        let row = design_row(&x, 3, 4, 3, true).unwrap();
        assert_eq!(row.values.len(), 9);
        let s = 0.75_f64;
        let b = |j: usize| if j == 0 { 1.0 } else { 2f64.sqrt() * (j as f64 * std::f64::consts::PI * s).cos() };
        let expected = [1.0, b(1), b(2), 1.5 * b(0), 1.5 * b(1), 1.5 * b(2), -0.5 * b(0), -0.5 * b(1), -0.5 * b(2)];
        for (a, e) in row.values.iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn design_row_rejects_bad_arguments() {
        assert!(design_row(&[1.0], 0, 4, 3, true).is_err());
        assert!(design_row(&[1.0], 5, 4, 3, true).is_err());
        assert!(design_row(&[1.0], 1, 4, 1, true).is_err());
    }

    #[test]
    fn demean_examples() {
        assert_eq!(within_demean(&[3.0, 3.0, 3.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(within_demean(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(within_demean(&[]).is_err());
    }

    #[test]
    fn demean_random_has_zero_mean() {
        let v = [0.31, -4.2, 7.7, 1e-3, 2.5, -0.9, 3.3];
        let d = within_demean(&v).unwrap();
        let mean: f64 = d.iter().sum::<f64>() / 7.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn orthonormal_on_unit_interval() {
        for j in 0..=12 {
            for k in 0..=12 {
                let ip = integrate(|s| cosine(j, s) * cosine(k, s), 0.0, 1.0, 1e-13).unwrap();
                let delta = if j == k { 1.0 } else { 0.0 };
                assert!((ip - delta).abs() < 1e-10, "<B{j},B{k}> = {ip}");
            }
        }
    }

    #[test]
    fn nonconstant_terms_integrate_to_zero() {
        for j in 1..=12 {
            let v = integrate(|s| cosine(j, s), 0.0, 1.0, 1e-13).unwrap();
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn grid_near_orthonormality() {
        let (periods, m) = (500, 8);
        let mut worst = 0.0_f64;
        for j in 0..m {
            for k in 0..m {
                let g: f64 = (1..=periods)
                    .map(|t| {
                        let s = t as f64 / periods as f64;
                        cosine(j, s) * cosine(k, s)
                    })
                    .sum::<f64>()
                    / periods as f64;
                let delta = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - delta).abs());
            }
        }
        assert!(worst < 0.05, "max deviation {worst}");
    }

    proptest! {
        #[test]
        fn demean_idempotent_and_linear(
            a in prop::collection::vec(-1e3f64..1e3, 1..40),
            c in -10f64..10.0,
        ) {
            let once = within_demean(&a).unwrap();
            let twice = within_demean(&once).unwrap();
            for (x, y) in once.iter().zip(&twice) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let b: Vec<f64> = a.iter().rev().cloned().collect();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + c * y).collect();
            let lhs = within_demean(&combo).unwrap();
            let db = within_demean(&b).unwrap();
            for i in 0..a.len() {
                prop_assert!((lhs[i] - (once[i] + c * db[i])).abs() < 1e-7);
            }
        }
    }
}
