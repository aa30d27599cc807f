//! Unconstrained minimization and numerical-Hessian standard errors.
//!
//! A Nelder–Mead simplex locates the basin, then BFGS with central-difference
//! gradients polishes the optimum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub simplex_iterations: usize,
    pub newton_iterations: usize,
    /// Relative objective tolerance, scaled by `1 + |f|`.
    pub objective_tol: f64,
    pub parameter_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            simplex_iterations: 2000,
            newton_iterations: 200,
            objective_tol: 1e-10,
            parameter_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead with standard coefficients and an initial simplex of
/// per-coordinate steps `step[j]`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], step: &[f64], settings: &OptimizerSettings) -> Minimum {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for j in 0..n {
        let mut p = start.to_vec();
        p[j] += if step[j] != 0.0 { step[j] } else { 0.05 };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(f, p)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.simplex_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= settings.objective_tol * (1.0 + vals[0].abs()) && size <= settings.parameter_tol.sqrt() {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + coef * (pts[n][j] - centroid[j])).collect() };

        let reflected = along(-1.0);
        let fr = eval(f, &reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = eval(f, &expanded);
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[n] {
            let c = along(-0.5);
            let v = eval(f, &c);
            (c, v)
        } else {
            let c = along(0.5);
            let v = eval(f, &c);
            (c, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = contracted;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = eval(f, &shrunk);
            pts[i] = shrunk;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Minimum {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// Central-difference gradient with step `max(1e-6, 1e-6·|x_j|)`.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1.0);
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// BFGS with backtracking line search on numerical gradients.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], settings: &OptimizerSettings) -> Minimum {
    let n = start.len();
    let mut x = DVector::from_column_slice(start);
    let mut fx = eval(f, x.as_slice());
    let mut g = DVector::from_vec(gradient(f, x.as_slice()));
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.newton_iterations {
        iterations += 1;
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &x + step * &dir;
            let ft = eval(f, trial.as_slice());
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            // no descent along a numerical gradient: treat as stationary
            converged = g.amax() < 1e-4 * (1.0 + fx.abs());
            break;
        };
        let s = &next - &x;
        let drop = fx - fnext;
        let g_next = DVector::from_vec(gradient(f, next.as_slice()));
        let yv = &g_next - &g;
        x = next;
        fx = fnext;
        g = g_next;
        let small_step = s.iter().zip(x.iter()).all(|(d, v)| d.abs() <= settings.parameter_tol * (1.0 + v.abs()));
        if drop <= settings.objective_tol * (1.0 + fx.abs()) && small_step {
            converged = true;
            break;
        }
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * yv.transpose();
            let right = &eye - rho * &yv * s.transpose();
            h = &left * &h * &right + rho * &s * s.transpose();
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        converged,
    }
}

/// Simplex search followed by BFGS refinement from the simplex optimum.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], step: &[f64], settings: &OptimizerSettings) -> Result<Minimum> {
    let coarse = nelder_mead(f, start, step, settings);
    if !coarse.value.is_finite() {
        return Err(Error::NonConvergence {
            iterations: coarse.iterations,
            objective: coarse.value,
            best: coarse.x,
        });
    }
    let fine = bfgs(f, &coarse.x, settings);
    let best = if fine.value <= coarse.value { fine.clone() } else { coarse.clone() };
    let converged = fine.converged || coarse.converged;
    if !converged {
        return Err(Error::NonConvergence {
            iterations: coarse.iterations + fine.iterations,
            objective: best.value,
            best: best.x,
        });
    }
    Ok(Minimum {
        iterations: coarse.iterations + fine.iterations,
        converged,
        ..best
    })
}

/// Central-difference Hessian with step `h_j = max(1e-5, 1e-4·|θ_j|)`.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: &F, at: &[f64]) -> DMatrix<f64> {
    let n = at.len();
    let h: Vec<f64> = at.iter().map(|v| (1e-4 * v.abs()).max(1e-5)).collect();
    let mut x = at.to_vec();
    let f0 = f(at);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        x[i] = at[i] + h[i];
        let up = f(&x);
        x[i] = at[i] - h[i];
        let down = f(&x);
        x[i] = at[i];
        out[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                x[i] = at[i] + si * h[i];
                x[j] = at[j] + sj * h[j];
                let v = f(&x);
                x[i] = at[i];
                x[j] = at[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Standard errors from the inverse of the negative Hessian of a
/// log-likelihood at its maximum.
pub fn mle_standard_errors<F: Fn(&[f64]) -> f64>(loglik: &F, at: &[f64]) -> Result<Vec<f64>> {
    let info = -numerical_hessian(loglik, at);
    covariance_from_information(info).map(|cov| (0..at.len()).map(|j| cov[(j, j)].sqrt()).collect())
}

/// Inverse of a symmetric positive-definite information matrix.
pub fn covariance_from_information(info: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-12 * max.max(f64::MIN_POSITIVE))) {
        return Err(Error::NotPositiveDefinite {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
        });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let m = minimize(&rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &OptimizerSettings::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn bfgs_on_quadratic() {
        let f = |x: &[f64]| 3.0 * (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + x[0] * x[1];
        let m = bfgs(&f, &[0.0, 0.0], &OptimizerSettings::default());
        // stationary point of the quadratic
        let (a, b) = (26.0 / 11.0, -24.0 / 11.0);
        assert!((m.x[0] - a).abs() < 1e-6 && (m.x[1] - b).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn quadratic_standard_errors() {
        let s = [0.5, 2.0, 7.0];
        let ll = |t: &[f64]| -0.5 * t.iter().zip(s).map(|(v, sj)| (v / sj).powi(2)).sum::<f64>();
        let se = mle_standard_errors(&ll, &[0.1, -0.3, 2.0]).unwrap();
        for (a, b) in se.iter().zip(s) {
            assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
        }
        let one = mle_standard_errors(&|t: &[f64]| -(t[0] - 3.0).powi(2) / 2.0, &[3.0]).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn indefinite_hessian_reported() {
        let ll = |t: &[f64]| t[0] * t[0] - t[1] * t[1];
        match mle_standard_errors(&ll, &[0.0, 0.0]) {
            Err(Error::NotPositiveDefinite { eigenvalues }) => assert_eq!(eigenvalues.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_regions_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.3).powi(2) };
        let m = minimize(&f, &[1.0], &[0.5], &OptimizerSettings::default()).unwrap();
        assert!((m.x[0] - 0.3).abs() < 1e-6);
    }
}
