//! Estimation output: the structured result, the summary table and the
//! frontier curve files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sfgroup::inefficiency::ModelChoice;
use sfgroup::{Estimate, PanelData, PipelineConfig};

use crate::{io_error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: String,
    pub estimate: f64,
    /// `None` when the information matrix was not invertible.
    pub se: Option<f64>,
}

fn param(name: &str, estimate: f64, se: Option<f64>) -> Param {
    Param {
        name: name.into(),
        estimate,
        se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: usize,
    pub size: usize,
    pub sigma_v: f64,
    pub sigma_v_se: f64,
    pub m_under: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub group: usize,
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `beta[l][j]` is regressor `l+1` at `s[j]`.
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmRow {
    pub firm_id: String,
    pub group: usize,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcRow {
    pub k: usize,
    pub ic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub input: String,
    pub firms: usize,
    pub periods: usize,
    pub regressors: usize,
    pub m: usize,
    pub k_max: usize,
    pub c_lambda: f64,
    pub c_tilde: f64,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub metadata: Metadata,
    pub selected_k: usize,
    pub ic: Vec<IcRow>,
    pub groups: Vec<GroupSummary>,
    pub firms: Vec<FirmRow>,
    pub model: ModelChoice,
    pub ic_unique: f64,
    pub ic_mixture: f64,
    /// Parameters of the chosen model.
    pub params: Vec<Param>,
    pub unique: Vec<Param>,
    pub mixture: Vec<Param>,
    pub curves: Vec<Curve>,
}

/// Uniform grid of `n ≥ 2` points on `[0, 1]`.
pub fn grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

pub fn build(input: &str, panel: &PanelData, config: &PipelineConfig, est: &Estimate, grid_size: usize) -> Result<EstimateResult> {
    let periods = panel.periods();
    let fits = est.group_fits();
    let groups = fits
        .iter()
        .enumerate()
        .map(|(k, f)| GroupSummary {
            group: k + 1,
            size: f.members.len(),
            sigma_v: f.sigma_v,
            sigma_v_se: f.sigma_v_se(periods),
            m_under: f.m_under,
        })
        .collect();
    let labels = est.assignment().labels();
    let intercepts = &est.intercepts;
    let firms = (0..panel.firms())
        .map(|i| FirmRow {
            firm_id: panel.firm_ids()[i].clone(),
            group: labels[i] + 1,
            intercept: intercepts[i],
        })
        .collect();

    let u = &est.unique;
    let unique = vec![
        param("alpha0", u.alpha0, u.se.map(|s| s[0])),
        param("sigma_u", u.sigma_u(), u.sigma_u_se()),
    ];
    let mx = &est.mixture;
    let (s1, s2) = mx.sigma_u();
    let sse = mx.sigma_u_se();
    let mixture = vec![
        param("tau", mx.tau, mx.se.map(|s| s[0])),
        param("alpha0(1)", mx.alpha0_1, mx.se.map(|s| s[1])),
        param("sigma_u(1)", s1, sse.map(|s| s.0)),
        param("alpha0(2)", mx.alpha0_2, mx.se.map(|s| s[3])),
        param("sigma_u(2)", s2, sse.map(|s| s.1)),
    ];
    let params = match est.choice() {
        ModelChoice::Unique => unique.clone(),
        ModelChoice::Mixture => mixture.clone(),
    };

    let s = grid(grid_size);
    let mut curves = Vec::with_capacity(fits.len());
    for (k, f) in fits.iter().enumerate() {
        let mut alpha = Vec::with_capacity(s.len());
        let mut beta = vec![Vec::with_capacity(s.len()); panel.regressors()];
        for &sj in &s {
            let v = f.frontier_eval(sj)?;
            alpha.push(v[0]);
            for (b, vl) in beta.iter_mut().zip(&v[1..]) {
                b.push(*vl);
            }
        }
        curves.push(Curve {
            group: k + 1,
            s: s.clone(),
            alpha,
            beta,
        });
    }

    Ok(EstimateResult {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION"),
            input: input.into(),
            firms: panel.firms(),
            periods,
            regressors: panel.regressors(),
            m: est.m,
            k_max: config.k_max,
            c_lambda: config.c_lambda,
            c_tilde: config.c_tilde,
            lambda: est.lambda,
            lambda_tilde: est.lambda_tilde,
            seed: config.mle.seed,
        },
        selected_k: est.selected_k(),
        ic: est.ic.records.iter().map(|r| IcRow { k: r.k, ic: r.ic }).collect(),
        groups,
        firms,
        model: est.choice(),
        ic_unique: est.decision.ic_unique,
        ic_mixture: est.decision.ic_mixture,
        params,
        unique,
        mixture,
        curves,
    })
}

/// Noise standard deviations and the chosen inefficiency parameters in one
/// row, standard errors in parentheses underneath.
pub fn summary_table(result: &EstimateResult) -> String {
    let mut out = String::new();
    let ic: Vec<String> = result.ic.iter().map(|r| format!("K={}: {:.3}", r.k, r.ic)).collect();
    let _ = writeln!(out, "Selected K = {}  ({})", result.selected_k, ic.join(", "));
    let model = match result.model {
        ModelChoice::Unique => "unique",
        ModelChoice::Mixture => "mixture",
    };
    let _ = writeln!(
        out,
        "alpha0 - u: {model}  (IC unique {:.3}, IC mixture {:.3})",
        result.ic_unique, result.ic_mixture
    );
    let sizes: Vec<String> = result.groups.iter().map(|g| format!("{}", g.size)).collect();
    let _ = writeln!(out, "Group sizes: {}", sizes.join(", "));
    let _ = writeln!(out);

    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut ses = Vec::new();
    for g in &result.groups {
        names.push(format!("sigma_v({})", g.group));
        values.push(format!("{:.4}", g.sigma_v));
        ses.push(format!("({:.4})", g.sigma_v_se));
    }
    for p in &result.params {
        names.push(p.name.clone());
        values.push(format!("{:.4}", p.estimate));
        ses.push(p.se.map_or("(n/a)".into(), |s| format!("({s:.4})")));
    }
    let width = names.iter().chain(&values).chain(&ses).map(String::len).max().unwrap_or(8) + 2;
    for row in [&names, &values, &ses] {
        let line: String = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{line}");
    }
    out
}

/// `s,alpha,beta1..betap` per group, one file each.
pub fn write_curves(dir: &Path, curves: &[Curve]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for c in curves {
        let path = dir.join(format!("group_{}.csv", c.group));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        let mut header = vec!["s".to_string(), "alpha".into()];
        header.extend((1..=c.beta.len()).map(|l| format!("beta{l}")));
        w.write_record(&header).map_err(|e| io_error(&path, e))?;
        for j in 0..c.s.len() {
            let mut rec = vec![c.s[j].to_string(), c.alpha[j].to_string()];
            rec.extend(c.beta.iter().map(|b| b[j].to_string()));
            w.write_record(&rec).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}
