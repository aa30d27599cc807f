//! Normal–half-normal panel likelihood of composite residuals and its
//! two-component mixture.
//!
//! For a firm with residuals `ε̃_t = y_t - α⁰ - z̲_t'π̂` (t = 1..T), noise
//! variance `σᵥ²` and inefficiency variance `σᵤ²`,
//!
//! ```text
//! log f = log 2 - (T/2) log 2π - ((T-1)/2) log σᵥ² - ½ log(σᵥ² + Tσᵤ²)
//!         + log Φ(r) + r²/2 - Σε̃²/(2σᵥ²),      r = -σᵤ Σε̃ / (σᵥ √(σᵥ² + Tσᵤ²))
//! ```
//!
//! which is the exact marginal density of `ε̃ = v - u` with `u` integrated
//! out. The constant is kept in full so unique and mixture fits are
//! comparable.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;
use crate::normal::{ln_cdf_plus_half_square, HALF_LN_2PI};
use crate::panel::PanelData;
use crate::post::GroupFit;

/// Log-likelihood of one firm given `Σε̃` and `Σε̃²`.
pub fn loglik_unique_firm(resid_sum: f64, resid_sumsq: f64, periods: usize, sigma_v2: f64, sigma_u2: f64) -> Result<f64> {
    if !(sigma_v2 > 0.0) || !(sigma_u2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variances must be positive (σᵥ² = {sigma_v2}, σᵤ² = {sigma_u2})"
        )));
    }
    if periods == 0 {
        return Err(Error::InvalidInput("firm has no periods".into()));
    }
    Ok(unique_unchecked(resid_sum, resid_sumsq, periods as f64, sigma_v2, sigma_u2))
}

#[inline]
fn unique_unchecked(resid_sum: f64, resid_sumsq: f64, t: f64, sigma_v2: f64, sigma_u2: f64) -> f64 {
    let total = sigma_v2 + t * sigma_u2;
    let r = -(sigma_u2 / (sigma_v2 * total)).sqrt() * resid_sum;
    LN_2 - t * HALF_LN_2PI - 0.5 * (t - 1.0) * sigma_v2.ln() - 0.5 * total.ln() + ln_cdf_plus_half_square(r)
        - resid_sumsq / (2.0 * sigma_v2)
}

/// Sufficient statistics of one firm's frontier-removed outcomes
/// `r_t = y_t - z̲_t'π̂`; composite residuals follow as `ε̃_t = r_t - α⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmResidual {
    pub periods: usize,
    pub mean: f64,
    /// `Σ (r_t - r̄)²`.
    pub centered_ss: f64,
    pub sigma_v2: f64,
}

impl FirmResidual {
    pub fn from_series(series: &[f64], sigma_v2: f64) -> Self {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let centered_ss = series.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            periods: series.len(),
            mean,
            centered_ss,
            sigma_v2,
        }
    }

    /// `(Σε̃, Σε̃²)` at intercept `alpha0`.
    pub fn sums(&self, alpha0: f64) -> (f64, f64) {
        let t = self.periods as f64;
        let d = self.mean - alpha0;
        (t * d, self.centered_ss + t * d * d)
    }

    pub fn loglik(&self, alpha0: f64, sigma_u2: f64) -> Result<f64> {
        let (s, ss) = self.sums(alpha0);
        loglik_unique_firm(s, ss, self.periods, self.sigma_v2, sigma_u2)
    }

    #[inline]
    pub(crate) fn loglik_fast(&self, alpha0: f64, sigma_u2: f64) -> f64 {
        let (s, ss) = self.sums(alpha0);
        unique_unchecked(s, ss, self.periods as f64, self.sigma_v2, sigma_u2)
    }
}

/// Parameters of the two-component intercept law: with probability `tau`
/// the intercept is `alpha0_1 - |N(0, sigma_u2_1)|`, otherwise
/// `alpha0_2 - |N(0, sigma_u2_2)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub tau: f64,
    pub alpha0_1: f64,
    pub sigma_u2_1: f64,
    pub alpha0_2: f64,
    pub sigma_u2_2: f64,
}

fn log_mix(tau: f64, l1: f64, l2: f64) -> f64 {
    let a = tau.ln() + l1;
    let b = (1.0 - tau).ln() + l2;
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Mixture log-likelihood of one firm, combined in log space.
pub fn loglik_mixture_firm(firm: &FirmResidual, params: &MixtureParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&params.tau) {
        return Err(Error::InvalidInput(format!("mixing weight {} outside [0, 1]", params.tau)));
    }
    let l1 = firm.loglik(params.alpha0_1, params.sigma_u2_1)?;
    let l2 = firm.loglik(params.alpha0_2, params.sigma_u2_2)?;
    Ok(log_mix(params.tau, l1, l2))
}

/// Frontier-removed statistics for every firm, using its group's pooled fit
/// and that group's `σ̂ᵥ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeResiduals {
    pub firms: Vec<FirmResidual>,
}

impl CompositeResiduals {
    pub fn new(panel: &PanelData, assignment: &GroupAssignment, fits: &[GroupFit]) -> Result<Self> {
        if assignment.firms() != panel.firms() {
            return Err(Error::DimensionMismatch {
                context: "group assignment",
                expected: panel.firms(),
                found: assignment.firms(),
            });
        }
        if fits.len() != assignment.k() {
            return Err(Error::DimensionMismatch {
                context: "group fits",
                expected: assignment.k(),
                found: fits.len(),
            });
        }
        let periods = panel.periods();
        let firms = (0..panel.firms())
            .map(|i| {
                let fit = &fits[assignment.labels()[i]];
                let series: Vec<f64> = (0..periods)
                    .map(|t| panel.y(i)[t] - fit.fitted(panel.x(i, t), (t + 1) as f64 / periods as f64))
                    .collect();
                FirmResidual::from_series(&series, fit.sigma_v * fit.sigma_v)
            })
            .collect();
        Ok(Self { firms })
    }

    /// Per-firm time-mean of `y - z̲'π̂`, an estimate of `α⁰ - uᵢ`.
    pub fn intercepts(&self) -> Vec<f64> {
        self.firms.iter().map(|f| f.mean).collect()
    }

    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    /// Total unique-model log-likelihood, summed in firm order.
    pub fn loglik_unique(&self, alpha0: f64, sigma_u2: f64) -> f64 {
        self.firms.iter().map(|f| f.loglik_fast(alpha0, sigma_u2)).sum()
    }

    /// Total mixture log-likelihood, summed in firm order.
    pub fn loglik_mixture(&self, p: &MixtureParams) -> f64 {
        self.firms
            .iter()
            .map(|f| log_mix(p.tau, f.loglik_fast(p.alpha0_1, p.sigma_u2_1), f.loglik_fast(p.alpha0_2, p.sigma_u2_2)))
            .sum()
    }
}

/// Per-firm time-mean of `y - z̲'π̂` under the firm's group fit.
pub fn firm_intercepts(panel: &PanelData, assignment: &GroupAssignment, fits: &[GroupFit]) -> Result<Vec<f64>> {
    Ok(CompositeResiduals::new(panel, assignment, fits)?.intercepts())
}
