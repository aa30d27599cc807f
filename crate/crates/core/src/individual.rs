//! Firm-by-firm sieve regressions.

use serde::{Deserialize, Serialize};

use crate::basis::{coefficient_count, fill_row};
use crate::error::{Error, Result};
use crate::lstsq;
use crate::panel::PanelData;

/// How the noise level enters the clustering feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFeature {
    /// `σ̂ᵥᵢ²`.
    #[default]
    Variance,
    /// `σ̂ᵥᵢ`.
    StdDev,
}

/// OLS output for one firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmEstimate {
    /// Estimate of `α⁰ - u_i`.
    pub intercept_hat: f64,
    /// Sieve coefficients excluding the intercept, length `m-1 + m·p`.
    pub pi_hat: Vec<f64>,
    pub sigma_v_hat: f64,
}

impl FirmEstimate {
    /// `(π̂ᵢ', σ̂ᵥᵢ)'`.
    pub fn theta(&self) -> Vec<f64> {
        let mut v = self.pi_hat.clone();
        v.push(self.sigma_v_hat);
        v
    }

    /// `(π̂ᵢ', σ̂ᵥᵢ²)'` or `(π̂ᵢ', σ̂ᵥᵢ)'`.
    pub fn features(&self, noise: NoiseFeature) -> Vec<f64> {
        let mut v = self.pi_hat.clone();
        v.push(match noise {
            NoiseFeature::Variance => self.sigma_v_hat * self.sigma_v_hat,
            NoiseFeature::StdDev => self.sigma_v_hat,
        });
        v
    }
}

/// Largest integer `k ≥ 0` with `k^exponent ≤ value`.
pub(crate) fn floor_root(value: f64, exponent: f64) -> usize {
    let mut k = value.powf(exponent.recip()).floor().max(0.0) as usize;
    let pow = |k: usize| {
        if exponent.fract() == 0.0 {
            (k as f64).powi(exponent as i32)
        } else {
            (k as f64).powf(exponent)
        }
    };
    while pow(k + 1) <= value {
        k += 1;
    }
    while k > 0 && pow(k) > value {
        k -= 1;
    }
    k
}

/// `⌊T^{1/5}⌋`, never below 2.
pub fn default_m(periods: usize) -> usize {
    floor_root(periods as f64, 5.0).max(2)
}

/// Fewest periods a firm regression with `m` terms and `p` regressors accepts.
pub fn min_periods(m: usize, regressors: usize) -> usize {
    m * (regressors + 1) + 2
}

/// Regress firm `firm`'s outcomes on the intercept-augmented sieve design.
pub fn fit_firm(panel: &PanelData, firm: usize, m: usize) -> Result<FirmEstimate> {
    if firm >= panel.firms() {
        return Err(Error::InvalidInput(format!("firm index {firm} out of range")));
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!("sieve size m = {m} must be at least 2")));
    }
    let periods = panel.periods();
    let p = panel.regressors();
    let cols = 1 + coefficient_count(m, p);
    if periods < min_periods(m, p) {
        return Err(Error::InsufficientPeriods {
            periods,
            needed: min_periods(m, p),
        });
    }
    let mut design = Vec::with_capacity(periods * cols);
    for t in 0..periods {
        let tau = (t + 1) as f64 / periods as f64;
        fill_row(&mut design, panel.x(firm, t), tau, m, true);
    }
    let y = panel.y(firm);
    let fit = lstsq::solve(periods, cols, &design, y, || format!("firm {}", panel.firm_ids()[firm]))?;
    let sigma_v_hat = (fit.ssr() / (periods as f64 - 1.0)).sqrt();
    Ok(FirmEstimate {
        intercept_hat: fit.coef[0],
        pi_hat: fit.coef[1..].to_vec(),
        sigma_v_hat,
    })
}

/// [`fit_firm`] for every firm, in firm order.
pub fn fit_all(panel: &PanelData, m: usize) -> Result<Vec<FirmEstimate>> {
    let fit = |i: usize| fit_firm(panel, i, m).map_err(|e| e.for_firm(panel.firm_ids()[i].clone()));

    #[cfg(feature = "parallel")]
    let results: Vec<Result<FirmEstimate>> = {
        use rayon::prelude::*;
        (0..panel.firms()).into_par_iter().map(fit).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<FirmEstimate>> = (0..panel.firms()).map(fit).collect();

    let mut estimates = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        Ok(estimates)
    } else {
        Err(Error::FirmFailures(failures))
    }
}
