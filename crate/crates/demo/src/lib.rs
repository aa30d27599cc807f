//! WebAssembly bindings for the browser demo. Every function returns a JSON
//! string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use sfgroup::basis::basis_value;
use sfgroup::dgp::{generate, Design, DgpTruth, InefficiencyLaw};
use sfgroup::grouping::classification_error;
use sfgroup::inefficiency::ModelChoice;
use sfgroup::{estimate, normal, PipelineConfig, Result};
use wasm_bindgen::prelude::wasm_bindgen;

const GRID: usize = 61;

#[derive(Debug, Serialize)]
pub struct GroupView {
    pub size: usize,
    /// Truth group holding most of this group's firms.
    pub matched: usize,
    pub sigma_v: f64,
    pub true_sigma_v: f64,
    pub alpha: Vec<f64>,
    pub true_alpha: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EstimateView {
    pub design: Design,
    pub firms: usize,
    pub periods: usize,
    pub selected_k: usize,
    pub true_k: usize,
    pub misclassified: f64,
    pub model: ModelChoice,
    pub true_model: ModelChoice,
    pub s: Vec<f64>,
    pub groups: Vec<GroupView>,
    pub intercepts: Vec<f64>,
    /// Fitted and true densities of `α⁰ − u` on `density_x`.
    pub density_x: Vec<f64>,
    pub density_fit: Vec<f64>,
    pub density_true: Vec<f64>,
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

/// Density of `a = α⁰ − u` with `u` half-normal.
fn half_normal_shift(a: f64, alpha0: f64, sigma_u: f64) -> f64 {
    if a > alpha0 {
        0.0
    } else {
        2.0 / sigma_u * normal::pdf((alpha0 - a) / sigma_u)
    }
}

fn law_density(a: f64, law: &InefficiencyLaw) -> f64 {
    match *law {
        InefficiencyLaw::Unique { alpha0, sigma_u } => half_normal_shift(a, alpha0, sigma_u),
        InefficiencyLaw::Mixture { tau, alpha0, sigma_u } => {
            tau * half_normal_shift(a, alpha0[0], sigma_u[0]) + (1.0 - tau) * half_normal_shift(a, alpha0[1], sigma_u[1])
        }
    }
}

fn majority(members: &[usize], truth: &DgpTruth) -> usize {
    let labels = truth.groups.labels();
    let mut counts = vec![0usize; truth.groups.k()];
    for &i in members {
        counts[labels[i]] += 1;
    }
    (0..counts.len()).max_by_key(|&g| (counts[g], usize::MAX - g)).unwrap_or(0)
}

/// Simulate a design, run the full estimator and line the result up against
/// the truth.
pub fn estimate_view(design: Design, firms: usize, periods: usize, seed: u64) -> Result<EstimateView> {
    let (panel, truth) = generate(design, firms, periods, seed)?;
    let est = estimate(&panel, &PipelineConfig::default())?;
    let s = grid(GRID);
    // keep the curve endpoints off the clamp used in simulation
    let inner: Vec<f64> = s.iter().map(|v| v.clamp(0.01, 0.99)).collect();

    let mut groups = Vec::new();
    for f in est.group_fits() {
        let g = majority(&f.members, &truth);
        let alpha = inner.iter().map(|&v| f.frontier_eval(v).map(|r| r[0])).collect::<Result<_>>()?;
        let true_alpha = inner.iter().map(|&v| truth.frontier(g, v).0).collect();
        groups.push(GroupView {
            size: f.members.len(),
            matched: g,
            sigma_v: f.sigma_v,
            true_sigma_v: truth.sigma_v[g],
            alpha,
            true_alpha,
        });
    }

    let fitted_law = match est.choice() {
        ModelChoice::Unique => InefficiencyLaw::Unique {
            alpha0: est.unique.alpha0,
            sigma_u: est.unique.sigma_u(),
        },
        ModelChoice::Mixture => {
            let (s1, s2) = est.mixture.sigma_u();
            InefficiencyLaw::Mixture {
                tau: est.mixture.tau,
                alpha0: [est.mixture.alpha0_1, est.mixture.alpha0_2],
                sigma_u: [s1, s2],
            }
        }
    };
    let lo = est.intercepts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = est.intercepts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1e-6);
    let density_x: Vec<f64> = grid(201).iter().map(|v| lo - pad + v * (hi - lo + 2.0 * pad)).collect();

    Ok(EstimateView {
        design,
        firms,
        periods,
        selected_k: est.selected_k(),
        true_k: truth.groups.k(),
        misclassified: if est.selected_k() == truth.groups.k() {
            classification_error(est.assignment(), &truth.groups)?
        } else {
            f64::NAN
        },
        model: est.choice(),
        true_model: if design.is_mixture() { ModelChoice::Mixture } else { ModelChoice::Unique },
        s,
        groups,
        density_fit: density_x.iter().map(|&a| law_density(a, &fitted_law)).collect(),
        density_true: density_x.iter().map(|&a| law_density(a, &truth.law)).collect(),
        density_x,
        intercepts: est.intercepts,
    })
}

#[derive(Debug, Serialize)]
pub struct BasisView {
    pub s: Vec<f64>,
    pub target: Vec<f64>,
    pub approximation: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// Project a named test function onto the first `m` cosine basis functions
/// (the constant included) by midpoint quadrature.
pub fn basis_view(function: &str, m: usize) -> Result<BasisView> {
    let f: fn(f64) -> f64 = match function {
        "step" => |s| if s < 0.5 { 0.0 } else { 1.0 },
        "bump" => |s| (-40.0 * (s - 0.4) * (s - 0.4)).exp(),
        "sine" => |s| (2.0 * std::f64::consts::PI * s).sin() + s,
        _ => return Err(sfgroup::Error::InvalidInput(format!("unknown function {function:?}"))),
    };
    let nodes = 2000;
    let mut coefficients = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc = 0.0;
        for q in 0..nodes {
            let s = (q as f64 + 0.5) / nodes as f64;
            acc += f(s) * basis_value(j, s)?;
        }
        coefficients.push(acc / nodes as f64);
    }
    let s = grid(201);
    let approximation = s
        .iter()
        .map(|&v| {
            coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| basis_value(j, v).map(|b| c * b))
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    Ok(BasisView {
        target: s.iter().map(|&v| f(v)).collect(),
        s,
        approximation,
        coefficients,
    })
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

#[wasm_bindgen]
pub fn estimate_design(design: &str, firms: usize, periods: usize, seed: u64) -> String {
    if firms > 400 || periods > 200 {
        return error_json("the demo caps N at 400 and T at 200");
    }
    to_json(design.parse().and_then(|d| estimate_view(d, firms, periods, seed)))
}

#[wasm_bindgen]
pub fn basis_approximation(function: &str, m: usize) -> String {
    if m == 0 || m > 64 {
        return error_json("m must be between 1 and 64");
    }
    to_json(basis_view(function, m))
}
