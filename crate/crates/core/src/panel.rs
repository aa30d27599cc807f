use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A balanced panel: `N` firms observed over `T` periods with `p` regressors.
///
/// Outcomes are stored firm-major (`y[i * T + t]`) and regressors
/// firm-period-major (`x[(i * T + t) * p + l]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    firms: usize,
    periods: usize,
    regressors: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    firm_ids: Vec<String>,
}

impl PanelData {
    pub fn new(
        firms: usize,
        periods: usize,
        regressors: usize,
        y: Vec<f64>,
        x: Vec<f64>,
        firm_ids: Vec<String>,
    ) -> Result<Self> {
        if firms == 0 || periods == 0 {
            return Err(Error::InvalidInput("panel must have at least one firm and one period".into()));
        }
        if y.len() != firms * periods {
            return Err(Error::DimensionMismatch {
                context: "outcome matrix",
                expected: firms * periods,
                found: y.len(),
            });
        }
        if x.len() != firms * periods * regressors {
            return Err(Error::DimensionMismatch {
                context: "regressor tensor",
                expected: firms * periods * regressors,
                found: x.len(),
            });
        }
        if firm_ids.len() != firms {
            return Err(Error::DimensionMismatch {
                context: "firm labels",
                expected: firms,
                found: firm_ids.len(),
            });
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite outcome for firm {} at t = {}",
                firm_ids[pos / periods],
                pos % periods + 1
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let cell = pos / regressors;
            return Err(Error::InvalidInput(format!(
                "non-finite regressor {} for firm {} at t = {}",
                pos % regressors + 1,
                firm_ids[cell / periods],
                cell % periods + 1
            )));
        }
        Ok(Self {
            firms,
            periods,
            regressors,
            y,
            x,
            firm_ids,
        })
    }

    /// Panel with firm labels `"1".."N"`.
    pub fn unlabeled(firms: usize, periods: usize, regressors: usize, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let ids = (1..=firms).map(|i| i.to_string()).collect();
        Self::new(firms, periods, regressors, y, x, ids)
    }

    pub fn firms(&self) -> usize {
        self.firms
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn regressors(&self) -> usize {
        self.regressors
    }

    pub fn firm_ids(&self) -> &[String] {
        &self.firm_ids
    }

    pub fn y(&self, firm: usize) -> &[f64] {
        &self.y[firm * self.periods..(firm + 1) * self.periods]
    }

    /// Regressor vector of firm `firm` at zero-based period `t`.
    pub fn x(&self, firm: usize, t: usize) -> &[f64] {
        let start = (firm * self.periods + t) * self.regressors;
        &self.x[start..start + self.regressors]
    }

    /// A new panel holding the listed firms in the given order.
    pub fn select(&self, firms: &[usize]) -> Result<Self> {
        let mut y = Vec::with_capacity(firms.len() * self.periods);
        let mut x = Vec::with_capacity(firms.len() * self.periods * self.regressors);
        let mut ids = Vec::with_capacity(firms.len());
        for &i in firms {
            if i >= self.firms {
                return Err(Error::InvalidInput(format!("firm index {i} out of range")));
            }
            y.extend_from_slice(self.y(i));
            let start = i * self.periods * self.regressors;
            x.extend_from_slice(&self.x[start..start + self.periods * self.regressors]);
            ids.push(self.firm_ids[i].clone());
        }
        Self::new(firms.len(), self.periods, self.regressors, y, x, ids)
    }

    /// Copy of the panel with a constant added to one firm's outcomes.
    pub fn with_shifted_firm(&self, firm: usize, shift: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.y[firm * self.periods..(firm + 1) * self.periods] {
            *v += shift;
        }
        out
    }

    /// Copy of the panel with every outcome negated. A cost frontier
    /// (`ε = v + u`) becomes a production frontier under this map.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v = -*v);
        out
    }
}
