//! Maximum likelihood for the inefficiency law and the unique-vs-mixture
//! choice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;
use crate::likelihood::{CompositeResiduals, MixtureParams};
use crate::optimize::{minimize, mle_standard_errors, Minimum, OptimizerSettings};
use crate::panel::PanelData;
use crate::post::GroupFit;

/// `σᵤ²` below this is reported as a collapsed inefficiency component.
const ZERO_SIGMA_U2: f64 = 1e-8;
/// Mixing weights outside `[DEGENERATE_TAU, 1 - DEGENERATE_TAU]` are flagged.
const DEGENERATE_TAU: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitWarning {
    ZeroInefficiency { component: usize },
    DegenerateMixture { tau: f64 },
    SingularHessian { eigenvalues: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub optimizer: OptimizerSettings,
    pub starts: usize,
    /// Seed of the random mixture start.
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueFit {
    pub alpha0: f64,
    pub sigma_u2: f64,
    pub loglik: f64,
    /// Standard errors of `(α⁰, σᵤ²)`; `None` when the Hessian is not
    /// negative definite.
    pub se: Option<[f64; 2]>,
    pub warnings: Vec<FitWarning>,
}

impl UniqueFit {
    pub fn sigma_u(&self) -> f64 {
        self.sigma_u2.sqrt()
    }

    /// Delta-method standard error of `σᵤ`.
    pub fn sigma_u_se(&self) -> Option<f64> {
        self.se.map(|se| se[1] / (2.0 * self.sigma_u()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub tau: f64,
    pub alpha0_1: f64,
    pub sigma_u2_1: f64,
    pub alpha0_2: f64,
    pub sigma_u2_2: f64,
    pub loglik: f64,
    /// Standard errors in the order `(τ, α⁰₁, σᵤ₁², α⁰₂, σᵤ₂²)`.
    pub se: Option<[f64; 5]>,
    pub warnings: Vec<FitWarning>,
    pub starts_converged: usize,
}

impl MixtureFit {
    pub fn params(&self) -> MixtureParams {
        MixtureParams {
            tau: self.tau,
            alpha0_1: self.alpha0_1,
            sigma_u2_1: self.sigma_u2_1,
            alpha0_2: self.alpha0_2,
            sigma_u2_2: self.sigma_u2_2,
        }
    }

    /// `(σᵤ₁, σᵤ₂)`.
    pub fn sigma_u(&self) -> (f64, f64) {
        (self.sigma_u2_1.sqrt(), self.sigma_u2_2.sqrt())
    }

    /// Delta-method standard errors of `(σᵤ₁, σᵤ₂)`.
    pub fn sigma_u_se(&self) -> Option<(f64, f64)> {
        let (a, b) = self.sigma_u();
        self.se.map(|se| (se[2] / (2.0 * a), se[4] / (2.0 * b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelChoice {
    Unique,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step5Decision {
    pub ic_unique: f64,
    pub ic_mixture: f64,
    pub lambda_tilde: f64,
    pub choice: ModelChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InefficiencyFit {
    Unique(UniqueFit),
    Mixture(MixtureFit),
}

impl InefficiencyFit {
    pub fn loglik(&self) -> f64 {
        match self {
            Self::Unique(f) => f.loglik,
            Self::Mixture(f) => f.loglik,
        }
    }
}

/// `c̃·√N·log N / 8`.
pub fn default_lambda_tilde(firms: usize, c_tilde: f64) -> f64 {
    let n = firms as f64;
    c_tilde * n.sqrt() * n.ln() / 8.0
}

/// Mixture wins only when its penalized criterion is strictly smaller.
pub fn step5_select(unique: &UniqueFit, mixture: &MixtureFit, lambda_tilde: f64) -> Step5Decision {
    let ic_unique = -unique.loglik;
    let ic_mixture = -mixture.loglik + lambda_tilde;
    Step5Decision {
        ic_unique,
        ic_mixture,
        lambda_tilde,
        choice: if ic_mixture < ic_unique {
            ModelChoice::Mixture
        } else {
            ModelChoice::Unique
        },
    }
}

/// Method-of-moments start `(α⁰, σᵤ)` from per-firm intercepts.
pub fn moment_start(intercepts: &[f64]) -> (f64, f64) {
    let n = intercepts.len() as f64;
    let mean = intercepts.iter().sum::<f64>() / n;
    let var = intercepts.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sigma = (var / (1.0 - 2.0 / PI)).sqrt().max(1e-3);
    (mean + sigma * (2.0 / PI).sqrt(), sigma)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn fit_unique(panel: &PanelData, assignment: &GroupAssignment, fits: &[GroupFit], options: &MleOptions) -> Result<UniqueFit> {
    fit_unique_residuals(&CompositeResiduals::new(panel, assignment, fits)?, options)
}

/// Maximize the unique-model likelihood over `(α⁰, log σᵤ²)`.
pub fn fit_unique_residuals(resid: &CompositeResiduals, options: &MleOptions) -> Result<UniqueFit> {
    if resid.is_empty() {
        return Err(Error::InvalidInput("no firms to fit".into()));
    }
    let intercepts = resid.intercepts();
    let (alpha_init, sigma_init) = moment_start(&intercepts);
    let objective = |p: &[f64]| -resid.loglik_unique(p[0], p[1].exp());
    let step = [0.5 * sigma_init, 0.5];
    let best = minimize(&objective, &[alpha_init, (sigma_init * sigma_init).ln()], &step, &options.optimizer)?;

    let (alpha0, sigma_u2) = (best.x[0], best.x[1].exp());
    let mut warnings = Vec::new();
    if sigma_u2 < ZERO_SIGMA_U2 {
        warnings.push(FitWarning::ZeroInefficiency { component: 1 });
    }
    let natural = |p: &[f64]| {
        if p[1] > 0.0 {
            resid.loglik_unique(p[0], p[1])
        } else {
            f64::NAN
        }
    };
    let se = match mle_standard_errors(&natural, &[alpha0, sigma_u2]) {
        Ok(se) => Some([se[0], se[1]]),
        Err(Error::NotPositiveDefinite { eigenvalues }) => {
            warnings.push(FitWarning::SingularHessian { eigenvalues });
            None
        }
        Err(e) => return Err(e),
    };
    Ok(UniqueFit {
        alpha0,
        sigma_u2,
        loglik: -best.value,
        se,
        warnings,
    })
}

pub fn fit_mixture(
    panel: &PanelData,
    assignment: &GroupAssignment,
    fits: &[GroupFit],
    unique: &UniqueFit,
    options: &MleOptions,
) -> Result<MixtureFit> {
    fit_mixture_residuals(&CompositeResiduals::new(panel, assignment, fits)?, unique, options)
}

/// Starting points on the `(logit τ, α⁰₁, log σᵤ₁², α⁰₂, log σᵤ₂²)` scale.
fn mixture_starts(unique: &UniqueFit, spread: f64, count: usize, seed: u64) -> Vec<[f64; 5]> {
    let a = unique.alpha0;
    let eta = unique.sigma_u2.max(1e-6).ln();
    let mut starts = Vec::new();
    for tau in [0.3, 0.5, 0.7] {
        starts.push([logit(tau), a + spread, eta, a - spread, eta]);
    }
    for tau in [0.3, 0.5, 0.7] {
        starts.push([logit(tau), a + 0.5 * spread, eta - 4f64.ln(), a - 0.5 * spread, eta + 2f64.ln()]);
    }
    starts.push([logit(0.95), a, eta, a - 2.0 * spread, eta]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < count {
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        starts.push([z(), a + spread * z(), eta + 0.5 * z(), a + spread * z(), eta + 0.5 * z()]);
    }
    starts.truncate(count.max(1));
    starts
}

/// Multi-start maximization of the two-component likelihood.
pub fn fit_mixture_residuals(resid: &CompositeResiduals, unique: &UniqueFit, options: &MleOptions) -> Result<MixtureFit> {
    if resid.is_empty() {
        return Err(Error::InvalidInput("no firms to fit".into()));
    }
    let spread = sample_sd(&resid.intercepts()).max(1e-3);
    let unpack = |p: &[f64]| MixtureParams {
        tau: logistic(p[0]),
        alpha0_1: p[1],
        sigma_u2_1: p[2].exp(),
        alpha0_2: p[3],
        sigma_u2_2: p[4].exp(),
    };
    let objective = |p: &[f64]| -resid.loglik_mixture(&unpack(p));
    let step = [0.5, 0.5 * spread, 0.5, 0.5 * spread, 0.5];

    let starts = mixture_starts(unique, spread, options.starts, options.seed);
    let run = |s: &[f64; 5]| minimize(&objective, s, &step, &options.optimizer);
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<Minimum>> = {
        use rayon::prelude::*;
        starts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<Minimum>> = starts.iter().map(run).collect();

    let mut best: Option<Minimum> = None;
    let mut converged = 0;
    let mut fallback: Option<Error> = None;
    for outcome in outcomes {
        match outcome {
            Ok(m) => {
                converged += 1;
                if best.as_ref().is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
            Err(e @ Error::NonConvergence { .. }) => {
                let better = match (&fallback, &e) {
                    (Some(Error::NonConvergence { objective: old, .. }), Error::NonConvergence { objective, .. }) => objective < old,
                    _ => true,
                };
                if better {
                    fallback = Some(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    let Some(best) = best else {
        return Err(fallback.unwrap_or(Error::InvalidInput("no mixture starts".into())));
    };

    let mut p = unpack(&best.x);
    if p.tau < 0.5 || (p.tau == 0.5 && p.alpha0_2 < p.alpha0_1) {
        p = MixtureParams {
            tau: 1.0 - p.tau,
            alpha0_1: p.alpha0_2,
            sigma_u2_1: p.sigma_u2_2,
            alpha0_2: p.alpha0_1,
            sigma_u2_2: p.sigma_u2_1,
        };
    }
    let mut warnings = Vec::new();
    if !(DEGENERATE_TAU..=1.0 - DEGENERATE_TAU).contains(&p.tau) {
        warnings.push(FitWarning::DegenerateMixture { tau: p.tau });
    }
    for (component, s2) in [(1, p.sigma_u2_1), (2, p.sigma_u2_2)] {
        if s2 < ZERO_SIGMA_U2 {
            warnings.push(FitWarning::ZeroInefficiency { component });
        }
    }
    let natural = |q: &[f64]| {
        if q[0] > 0.0 && q[0] < 1.0 && q[2] > 0.0 && q[4] > 0.0 {
            resid.loglik_mixture(&MixtureParams {
                tau: q[0],
                alpha0_1: q[1],
                sigma_u2_1: q[2],
                alpha0_2: q[3],
                sigma_u2_2: q[4],
            })
        } else {
            f64::NAN
        }
    };
    let at = [p.tau, p.alpha0_1, p.sigma_u2_1, p.alpha0_2, p.sigma_u2_2];
    let se = match mle_standard_errors(&natural, &at) {
        Ok(se) => Some([se[0], se[1], se[2], se[3], se[4]]),
        Err(Error::NotPositiveDefinite { eigenvalues }) => {
            warnings.push(FitWarning::SingularHessian { eigenvalues });
            None
        }
        Err(e) => return Err(e),
    };
    Ok(MixtureFit {
        tau: p.tau,
        alpha0_1: p.alpha0_1,
        sigma_u2_1: p.sigma_u2_1,
        alpha0_2: p.alpha0_2,
        sigma_u2_2: p.sigma_u2_2,
        loglik: -best.value,
        se,
        warnings,
        starts_converged: converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::FirmResidual;
    use rand_distr::Distribution;

    fn synthetic(firms: usize, periods: usize, seed: u64, draw_intercept: impl Fn(&mut ChaCha8Rng) -> f64) -> CompositeResiduals {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma_v = 0.5;
        let normal = rand_distr::Normal::new(0.0, sigma_v).unwrap();
        let firms = (0..firms)
            .map(|_| {
                let level = draw_intercept(&mut rng);
                let series: Vec<f64> = (0..periods).map(|_| level + normal.sample(&mut rng)).collect();
                FirmResidual::from_series(&series, sigma_v * sigma_v)
            })
            .collect();
        CompositeResiduals { firms }
    }

    fn half_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z.abs()
    }

    #[test]
    fn lambda_tilde_values() {
        assert!((default_lambda_tilde(100, 1.0) - 5.756_462_732_485_114).abs() < 1e-12);
        assert_eq!(default_lambda_tilde(100, 0.0), 0.0);
        assert!((default_lambda_tilde(466, 1.0) - 16.58).abs() < 0.01);
    }

    fn unique_at(loglik: f64) -> UniqueFit {
        UniqueFit {
            alpha0: 0.0,
            sigma_u2: 1.0,
            loglik,
            se: None,
            warnings: vec![],
        }
    }

    fn mixture_at(loglik: f64) -> MixtureFit {
        MixtureFit {
            tau: 0.6,
            alpha0_1: 0.0,
            sigma_u2_1: 1.0,
            alpha0_2: 0.0,
            sigma_u2_2: 1.0,
            loglik,
            se: None,
            warnings: vec![],
            starts_converged: 8,
        }
    }

    #[test]
    fn step5_boundaries() {
        assert_eq!(step5_select(&unique_at(-100.0), &mixture_at(-100.0), 3.0).choice, ModelChoice::Unique);
        assert_eq!(step5_select(&unique_at(-100.0), &mixture_at(-97.0), 3.0).choice, ModelChoice::Unique);
        assert_eq!(step5_select(&unique_at(-100.0), &mixture_at(-96.0), 3.0).choice, ModelChoice::Mixture);
        let d = step5_select(&unique_at(-100.0), &mixture_at(-96.0), 3.0);
        assert_eq!((d.ic_unique, d.ic_mixture), (100.0, 99.0));
    }

    #[test]
    fn unique_recovers_generating_values() {
        let resid = synthetic(400, 50, 11, |rng| 0.5 - half_normal(rng, 1.0));
        let fit = fit_unique_residuals(&resid, &MleOptions::default()).unwrap();
        let se = fit.se.unwrap();
        assert!((fit.alpha0 - 0.5).abs() < 4.0 * se[0], "{fit:?}");
        assert!((fit.sigma_u2 - 1.0).abs() < 4.0 * se[1], "{fit:?}");
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn envelope_direction() {
        let resid = synthetic(300, 200, 5, |rng| 2.0 - half_normal(rng, 3.0));
        let fit = fit_unique_residuals(&resid, &MleOptions::default()).unwrap();
        let top = resid.intercepts().into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert!((fit.alpha0 - top).abs() < 0.3, "{} vs {top}", fit.alpha0);
    }

    #[test]
    fn mixture_recovers_components() {
        let resid = synthetic(600, 80, 3, |rng| {
            if rng.random::<f64>() < 0.7 {
                1.0 - half_normal(rng, 0.5)
            } else {
                -2.0 - half_normal(rng, 1.0)
            }
        });
        let options = MleOptions::default();
        let unique = fit_unique_residuals(&resid, &options).unwrap();
        let mix = fit_mixture_residuals(&resid, &unique, &options).unwrap();
        assert!(mix.tau >= 0.5);
        assert!((mix.tau - 0.7).abs() < 0.06, "{mix:?}");
        assert!((mix.alpha0_1 - 1.0).abs() < 0.15, "{mix:?}");
        assert!((mix.alpha0_2 + 2.0).abs() < 0.3, "{mix:?}");
        assert!(mix.loglik >= unique.loglik);
        let lt = default_lambda_tilde(600, 1.0);
        assert_eq!(step5_select(&unique, &mix, lt).choice, ModelChoice::Mixture);
    }

    #[test]
    fn single_component_gives_small_mixture_gain() {
        let resid = synthetic(300, 50, 21, |rng| 0.5 - half_normal(rng, 1.0));
        let options = MleOptions::default();
        let unique = fit_unique_residuals(&resid, &options).unwrap();
        let mix = fit_mixture_residuals(&resid, &unique, &options).unwrap();
        let gain = mix.loglik - unique.loglik;
        assert!(gain > -1e-6 && gain < default_lambda_tilde(300, 1.0), "gain {gain}");
    }

    #[test]
    fn moment_start_matches_half_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<f64> = (0..200_000).map(|_| 1.5 - half_normal(&mut rng, 2.0)).collect();
        let (a, s) = moment_start(&draws);
        assert!((a - 1.5).abs() < 0.03 && (s - 2.0).abs() < 0.03, "{a} {s}");
    }
}
