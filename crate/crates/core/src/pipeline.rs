//! The full estimation sequence on one panel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;
use crate::individual::{default_m, fit_all, NoiseFeature};
use crate::inefficiency::{
    default_lambda_tilde, fit_mixture_residuals, fit_unique_residuals, step5_select, InefficiencyFit, MixtureFit, MleOptions,
    ModelChoice, Step5Decision, UniqueFit,
};
use crate::likelihood::CompositeResiduals;
use crate::panel::PanelData;
use crate::post::{default_lambda, select_k, GroupFit, IcReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Individual-stage sieve size; `⌊T^{1/5}⌋` (at least 2) when `None`.
    pub m: Option<usize>,
    pub k_max: usize,
    #[serde(default)]
    pub noise_feature: NoiseFeature,
    pub c_lambda: f64,
    pub c_tilde: f64,
    pub mle: MleOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            m: None,
            k_max: 4,
            noise_feature: NoiseFeature::default(),
            c_lambda: 1.0,
            c_tilde: 1.0,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub m: usize,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub firms: Vec<crate::individual::FirmEstimate>,
    pub ic: IcReport,
    /// Per-firm mean of `y - z̲'π̂` under the selected grouping.
    pub intercepts: Vec<f64>,
    pub unique: UniqueFit,
    pub mixture: MixtureFit,
    pub decision: Step5Decision,
}

impl Estimate {
    pub fn selected_k(&self) -> usize {
        self.ic.selected_k
    }

    pub fn assignment(&self) -> &GroupAssignment {
        &self.ic.selected().assignment
    }

    pub fn group_fits(&self) -> &[GroupFit] {
        &self.ic.selected().fits
    }

    pub fn choice(&self) -> ModelChoice {
        self.decision.choice
    }

    pub fn chosen(&self) -> InefficiencyFit {
        match self.decision.choice {
            ModelChoice::Unique => InefficiencyFit::Unique(self.unique.clone()),
            ModelChoice::Mixture => InefficiencyFit::Mixture(self.mixture.clone()),
        }
    }
}

/// Run firm regressions, clustering, IC selection, both inefficiency fits
/// and the final model choice.
pub fn estimate(panel: &PanelData, config: &PipelineConfig) -> Result<Estimate> {
    let (firms, periods) = (panel.firms(), panel.periods());
    if firms < 2 {
        return Err(Error::InvalidInput("clustering requires at least two firms".into()));
    }
    if !(config.c_lambda >= 0.0) || !(config.c_tilde >= 0.0) {
        return Err(Error::InvalidInput("penalty constants must be nonnegative".into()));
    }
    let m = config.m.unwrap_or_else(|| default_m(periods));
    let estimates = fit_all(panel, m).map_err(|e| e.at_stage("individual regressions"))?;
    let thetas: Vec<Vec<f64>> = estimates.iter().map(|e| e.features(config.noise_feature)).collect();
    let lambda = default_lambda(firms, periods, config.c_lambda);
    let ic = select_k(panel, &thetas, config.k_max.min(firms), lambda).map_err(|e| e.at_stage("group selection"))?;

    let selected = ic.selected();
    let resid = CompositeResiduals::new(panel, &selected.assignment, &selected.fits)?;
    let unique = fit_unique_residuals(&resid, &config.mle).map_err(|e| e.at_stage("unique inefficiency fit"))?;
    let mixture = fit_mixture_residuals(&resid, &unique, &config.mle).map_err(|e| e.at_stage("mixture inefficiency fit"))?;
    let lambda_tilde = default_lambda_tilde(firms, config.c_tilde);
    let decision = step5_select(&unique, &mixture, lambda_tilde);
    Ok(Estimate {
        m,
        lambda,
        lambda_tilde,
        firms: estimates,
        intercepts: resid.intercepts(),
        ic,
        unique,
        mixture,
        decision,
    })
}
