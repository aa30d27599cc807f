//! Pooled within-group sieve estimation and the group-count criterion.

use serde::{Deserialize, Serialize};

use crate::basis::{coefficient_count, cosine, fill_row};
use crate::error::{Error, Result};
use crate::grouping::{ward_linkage, GroupAssignment, MergeHistory};
use crate::individual::floor_root;
use crate::lstsq;
use crate::panel::PanelData;

/// Pooled fit of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub members: Vec<usize>,
    /// Coefficients in design-row order (no intercept), length `m̲-1 + m̲·p`.
    pub pi: Vec<f64>,
    pub sigma_v: f64,
    pub m_under: usize,
    pub regressors: usize,
    /// Sum of squared within residuals.
    pub ssr: f64,
}

impl GroupFit {
    /// `(α̂(s), β̂₁(s), …, β̂_p(s))`.
    pub fn frontier_eval(&self, s: f64) -> Result<Vec<f64>> {
        frontier_eval(self, s)
    }

    /// Fitted `z̲_it'π̂` for one observation.
    pub fn fitted(&self, x: &[f64], tau: f64) -> f64 {
        let m = self.m_under;
        let b: Vec<f64> = (0..m).map(|j| cosine(j, tau)).collect();
        let mut v: f64 = b[1..].iter().zip(&self.pi).map(|(a, c)| a * c).sum();
        for (l, &xl) in x.iter().enumerate() {
            let block = &self.pi[m - 1 + l * m..m - 1 + (l + 1) * m];
            v += xl * block.iter().zip(&b).map(|(c, bj)| c * bj).sum::<f64>();
        }
        v
    }

    /// Asymptotic standard error of `σ̂ᵥ`, `σ̂ᵥ / √(2 N_k (T-1))`.
    pub fn sigma_v_se(&self, periods: usize) -> f64 {
        self.sigma_v / (2.0 * self.members.len() as f64 * (periods as f64 - 1.0)).sqrt()
    }
}

/// `⌊(N_k T)^{1/4.8}⌋`, never below 2.
pub fn default_m_under(group_size: usize, periods: usize) -> usize {
    floor_root((group_size * periods) as f64, 4.8).max(2)
}

/// `c·√(NT)·log(NT)/2`.
pub fn default_lambda(firms: usize, periods: usize, c_lambda: f64) -> f64 {
    let nt = (firms * periods) as f64;
    c_lambda * nt.sqrt() * nt.ln() / 2.0
}

/// Pooled OLS of within-demeaned outcomes on the within-demeaned sieve design.
pub fn fit_group(panel: &PanelData, members: &[usize], m_under: usize) -> Result<GroupFit> {
    if members.is_empty() {
        return Err(Error::InvalidInput("group has no members".into()));
    }
    if m_under < 2 {
        return Err(Error::InvalidInput(format!("sieve size {m_under} must be at least 2")));
    }
    let periods = panel.periods();
    let p = panel.regressors();
    let cols = coefficient_count(m_under, p);
    let rows = members.len() * periods;
    let mut design = Vec::with_capacity(rows * cols);
    let mut y = Vec::with_capacity(rows);
    for &i in members {
        if i >= panel.firms() {
            return Err(Error::InvalidInput(format!("firm index {i} out of range")));
        }
        let start = design.len();
        for t in 0..periods {
            fill_row(&mut design, panel.x(i, t), (t + 1) as f64 / periods as f64, m_under, false);
        }
        let block = &mut design[start..];
        for j in 0..cols {
            let mean = (0..periods).map(|t| block[t * cols + j]).sum::<f64>() / periods as f64;
            for t in 0..periods {
                block[t * cols + j] -= mean;
            }
        }
        let yi = panel.y(i);
        let mean = yi.iter().sum::<f64>() / periods as f64;
        y.extend(yi.iter().map(|v| v - mean));
    }
    let fit = lstsq::solve(rows, cols, &design, &y, || format!("pooled fit of {} firms", members.len()))?;
    let ssr = fit.ssr();
    let sigma_v = (ssr / (members.len() as f64 * (periods as f64 - 1.0))).sqrt();
    Ok(GroupFit {
        members: members.to_vec(),
        pi: fit.coef,
        sigma_v,
        m_under,
        regressors: p,
        ssr,
    })
}

/// `(α̂(s), β̂₁(s), …, β̂_p(s))` from a group's sieve coefficients.
pub fn frontier_eval(fit: &GroupFit, s: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidInput(format!("frontier argument {s} outside [0, 1]")));
    }
    let m = fit.m_under;
    let b: Vec<f64> = (0..m).map(|j| cosine(j, s)).collect();
    let mut out = Vec::with_capacity(fit.regressors + 1);
    out.push(b[1..].iter().zip(&fit.pi).map(|(a, c)| a * c).sum());
    for l in 0..fit.regressors {
        let block = &fit.pi[m - 1 + l * m..m - 1 + (l + 1) * m];
        out.push(block.iter().zip(&b).map(|(c, bj)| c * bj).sum());
    }
    Ok(out)
}

/// `Σ_k {N_k T log σ̂_k + N_k (T-1)} + λK`.
pub fn ic_value(fits: &[GroupFit], lambda: f64, periods: usize) -> Result<f64> {
    let t = periods as f64;
    let mut total = lambda * fits.len() as f64;
    for (k, fit) in fits.iter().enumerate() {
        if !(fit.sigma_v > 0.0) {
            return Err(Error::DegenerateIc { group: k + 1 });
        }
        let nk = fit.members.len() as f64;
        total += nk * t * fit.sigma_v.ln() + nk * (t - 1.0);
    }
    Ok(total)
}

/// Criterion evaluation for one candidate group count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcRecord {
    pub k: usize,
    pub assignment: GroupAssignment,
    pub fits: Vec<GroupFit>,
    pub ic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub lambda: f64,
    pub records: Vec<IcRecord>,
    pub selected_k: usize,
    pub history: MergeHistory,
}

impl IcReport {
    pub fn selected(&self) -> &IcRecord {
        self.record(self.selected_k).expect("selected K is always evaluated")
    }

    pub fn record(&self, k: usize) -> Option<&IcRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    /// Re-select under a different penalty without refitting.
    pub fn reselect(&self, lambda: f64) -> usize {
        let base = |r: &IcRecord| r.ic - self.lambda * r.k as f64;
        argmin_k(self.records.iter().map(|r| (r.k, base(r) + lambda * r.k as f64)))
    }
}

fn argmin_k(values: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, v) in values {
        // strict: ties stay with the smaller K
        if v < best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Fit every group of an assignment with its own default `m̲`.
pub fn fit_groups(panel: &PanelData, assignment: &GroupAssignment) -> Result<Vec<GroupFit>> {
    let periods = panel.periods();
    assignment
        .groups()
        .iter()
        .enumerate()
        .map(|(k, members)| {
            fit_group(panel, members, default_m_under(members.len(), periods)).map_err(|e| e.for_group(k + 1))
        })
        .collect()
}

/// Cluster `thetas`, fit groups for `K = 1..=k_max` and pick the minimizer.
pub fn select_k(panel: &PanelData, thetas: &[Vec<f64>], k_max: usize, lambda: f64) -> Result<IcReport> {
    if thetas.len() != panel.firms() {
        return Err(Error::DimensionMismatch {
            context: "clustering features",
            expected: panel.firms(),
            found: thetas.len(),
        });
    }
    if panel.firms() < 2 {
        return Err(Error::InvalidInput("clustering requires at least two firms".into()));
    }
    if k_max == 0 || k_max > panel.firms() {
        return Err(Error::InvalidInput(format!(
            "K_max = {k_max} outside 1..={}",
            panel.firms()
        )));
    }
    let history = ward_linkage(thetas)?;
    let evaluate = |k: usize| -> Result<IcRecord> {
        let assignment = history.cut(k)?;
        let fits = fit_groups(panel, &assignment)?;
        let ic = ic_value(&fits, lambda, panel.periods())?;
        Ok(IcRecord { k, assignment, fits, ic })
    };

    #[cfg(feature = "parallel")]
    let records: Vec<IcRecord> = {
        use rayon::prelude::*;
        (1..=k_max).into_par_iter().map(evaluate).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<IcRecord> = (1..=k_max).map(evaluate).collect::<Result<_>>()?;

    let selected_k = argmin_k(records.iter().map(|r| (r.k, r.ic)));
    Ok(IcReport {
        lambda,
        records,
        selected_k,
        history,
    })
}
