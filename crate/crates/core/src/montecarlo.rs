//! Replication harness: simulate, estimate, score against the truth and
//! aggregate into selection frequencies and BIAS/RMSE tables.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dgp::{derive_seed, generate, Design, DgpTruth, InefficiencyLaw};
use crate::error::{Error, Result};
use crate::grouping::{best_matching, classification_error, GroupAssignment};
use crate::individual::{default_m, fit_all, NoiseFeature};
use crate::inefficiency::{
    default_lambda_tilde, fit_mixture_residuals, fit_unique_residuals, step5_select, MixtureFit, MleOptions, ModelChoice,
    UniqueFit,
};
use crate::likelihood::CompositeResiduals;
use crate::post::{default_lambda, select_k, GroupFit};

/// The `(N, T)` grid used in the published tables.
pub const PAPER_SIZES: [(usize, usize); 9] = [
    (100, 50),
    (100, 75),
    (100, 100),
    (250, 50),
    (250, 75),
    (250, 100),
    (500, 50),
    (500, 75),
    (500, 100),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub designs: Vec<Design>,
    pub sizes: Vec<(usize, usize)>,
    pub replications: usize,
    #[serde(default = "unit_grid")]
    pub c_lambda: Vec<f64>,
    #[serde(default = "unit_grid")]
    pub c_tilde: Vec<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub noise_feature: NoiseFeature,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub mle: MleOptions,
}

fn unit_grid() -> Vec<f64> {
    vec![1.0]
}

fn default_k_max() -> usize {
    4
}

impl McConfig {
    pub fn new(design: Design, firms: usize, periods: usize, replications: usize) -> Self {
        Self {
            designs: vec![design],
            sizes: vec![(firms, periods)],
            replications,
            c_lambda: unit_grid(),
            c_tilde: unit_grid(),
            k_max: default_k_max(),
            noise_feature: NoiseFeature::default(),
            seed: 0,
            workers: 0,
            mle: MleOptions::default(),
        }
    }

    /// All six designs on the nine published sizes, 500 replications each,
    /// with the three-point sensitivity grid.
    pub fn paper_full() -> Self {
        Self {
            designs: Design::PAPER.to_vec(),
            sizes: PAPER_SIZES.to_vec(),
            replications: 500,
            c_lambda: vec![0.75, 1.0, 1.5],
            c_tilde: vec![0.75, 1.0, 1.5],
            ..Self::new(Design::Dgp1U, 100, 50, 500)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.designs.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidInput("at least one design and one (N, T) size required".into()));
        }
        if self.c_lambda.is_empty() || self.c_tilde.is_empty() {
            return Err(Error::InvalidInput("penalty grids must be nonempty".into()));
        }
        if self.c_lambda.iter().chain(&self.c_tilde).any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidInput("penalty constants must be nonnegative".into()));
        }
        for d in &self.designs {
            if self.k_max < d.groups() {
                return Err(Error::InvalidInput(format!(
                    "K_max = {} is below the {} groups of {d}",
                    self.k_max,
                    d.groups()
                )));
            }
            for &(n, t) in &self.sizes {
                if n < self.k_max || n < 2 || t < 10 {
                    return Err(Error::InvalidInput(format!("size ({n}, {t}) too small for {d}")));
                }
            }
        }
        Ok(())
    }

    /// Number of (design, size) cases.
    pub fn cases(&self) -> usize {
        self.designs.len() * self.sizes.len()
    }
}

/// Outcome of one replication under one `(c_λ, c̃)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub c_lambda: f64,
    pub c_tilde: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Success(RepSummary),
    Failed { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub k_hat: usize,
    /// Share of firms outside their matched true group under the selected `K̂`.
    pub classification_error: f64,
    pub choice: ModelChoice,
    /// `estimate - truth` per named parameter, in a fixed order.
    pub errors: Vec<(String, f64)>,
}

fn stage_of(err: &Error) -> String {
    match err {
        Error::Stage { stage, .. } => stage.to_string(),
        _ => "setup".into(),
    }
}

/// σᵥ per true group from the estimated partition: matched groups first,
/// then the estimated group holding most of an unmatched true group.
fn aligned_sigma_v(assignment: &GroupAssignment, fits: &[GroupFit], truth: &GroupAssignment) -> Result<Vec<f64>> {
    let matching = best_matching(assignment, truth)?;
    let mut out = vec![f64::NAN; truth.k()];
    for &(est, tru, overlap) in &matching {
        if est < assignment.k() && tru < truth.k() && overlap > 0 {
            out[tru] = fits[est].sigma_v;
        }
    }
    for (g, slot) in out.iter_mut().enumerate() {
        if slot.is_nan() {
            let mut counts = vec![0usize; assignment.k()];
            for i in truth.members(g) {
                counts[assignment.labels()[i]] += 1;
            }
            let host = (0..counts.len()).max_by_key(|&e| (counts[e], std::cmp::Reverse(e))).unwrap_or(0);
            *slot = fits[host].sigma_v;
        }
    }
    Ok(out)
}

fn unique_errors(fit: &UniqueFit, law: &InefficiencyLaw) -> Vec<(String, f64)> {
    match *law {
        InefficiencyLaw::Unique { alpha0, sigma_u } => {
            vec![("alpha0".into(), fit.alpha0 - alpha0), ("sigma_u".into(), fit.sigma_u() - sigma_u)]
        }
        InefficiencyLaw::Mixture { .. } => Vec::new(),
    }
}

/// Component-aligned errors: the labelling with the smaller squared distance
/// to the truth is used.
fn mixture_errors(fit: &MixtureFit, law: &InefficiencyLaw) -> Vec<(String, f64)> {
    let InefficiencyLaw::Mixture { tau, alpha0, sigma_u } = *law else {
        return Vec::new();
    };
    let (s1, s2) = fit.sigma_u();
    let kept = [fit.tau, fit.alpha0_1, s1, fit.alpha0_2, s2];
    let swapped = [1.0 - fit.tau, fit.alpha0_2, s2, fit.alpha0_1, s1];
    let target = [tau, alpha0[0], sigma_u[0], alpha0[1], sigma_u[1]];
    let dist = |v: &[f64; 5]| v.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let est = if dist(&swapped) < dist(&kept) { swapped } else { kept };
    ["tau", "alpha0(1)", "sigma_u(1)", "alpha0(2)", "sigma_u(2)"]
        .iter()
        .zip(est.iter().zip(&target))
        .map(|(name, (e, t))| (name.to_string(), e - t))
        .collect()
}

/// Simulate replication `rep` of one case and score it for every
/// `(c_λ, c̃)` pair. Steps 1–3 run once; the penalties only change the
/// selected `K` and the Step 5 decision.
pub fn run_replication(
    design: Design,
    firms: usize,
    periods: usize,
    config: &McConfig,
    rep: usize,
) -> Vec<ReplicationRecord> {
    let grid: Vec<(f64, f64)> = config
        .c_lambda
        .iter()
        .flat_map(|&cl| config.c_tilde.iter().map(move |&ct| (cl, ct)))
        .collect();
    match score_replication(design, firms, periods, config, rep, &grid) {
        Ok(records) => records,
        Err(e) => grid
            .iter()
            .map(|&(c_lambda, c_tilde)| ReplicationRecord {
                rep,
                c_lambda,
                c_tilde,
                outcome: Outcome::Failed {
                    stage: stage_of(&e),
                    message: e.to_string(),
                },
            })
            .collect(),
    }
}

struct InefficiencyPair {
    unique: UniqueFit,
    mixture: MixtureFit,
    sigma_v: Vec<f64>,
}

fn score_replication(
    design: Design,
    firms: usize,
    periods: usize,
    config: &McConfig,
    rep: usize,
    grid: &[(f64, f64)],
) -> Result<Vec<ReplicationRecord>> {
    let seed = derive_seed(&[config.seed, rep as u64]);
    let (panel, truth): (_, DgpTruth) = generate(design, firms, periods, seed).map_err(|e| e.at_stage("simulation"))?;
    let estimates = fit_all(&panel, default_m(periods)).map_err(|e| e.at_stage("individual regressions"))?;
    let thetas: Vec<Vec<f64>> = estimates.iter().map(|e| e.features(config.noise_feature)).collect();
    let base_lambda = default_lambda(firms, periods, grid[0].0);
    let ic = select_k(&panel, &thetas, config.k_max, base_lambda).map_err(|e| e.at_stage("group selection"))?;

    let mut by_k: BTreeMap<usize, InefficiencyPair> = BTreeMap::new();
    let mut records = Vec::with_capacity(grid.len());
    for &(c_lambda, c_tilde) in grid {
        let lambda = default_lambda(firms, periods, c_lambda);
        let k_hat = if lambda == base_lambda { ic.selected_k } else { ic.reselect(lambda) };
        if !by_k.contains_key(&k_hat) {
            let record = ic.record(k_hat).expect("every K up to K_max is evaluated");
            let resid = CompositeResiduals::new(&panel, &record.assignment, &record.fits)?;
            let unique = fit_unique_residuals(&resid, &config.mle).map_err(|e| e.at_stage("unique inefficiency fit"))?;
            let mixture =
                fit_mixture_residuals(&resid, &unique, &config.mle).map_err(|e| e.at_stage("mixture inefficiency fit"))?;
            let sigma_v = aligned_sigma_v(&record.assignment, &record.fits, &truth.groups)?;
            by_k.insert(k_hat, InefficiencyPair { unique, mixture, sigma_v });
        }
        let class_err = classification_error(&ic.record(k_hat).expect("evaluated").assignment, &truth.groups)?;
        let pair = &by_k[&k_hat];
        let decision = step5_select(&pair.unique, &pair.mixture, default_lambda_tilde(firms, c_tilde));
        let mut errors: Vec<(String, f64)> = pair
            .sigma_v
            .iter()
            .enumerate()
            .map(|(g, s)| (format!("sigma_v({})", g + 1), s - truth.sigma_v[g]))
            .collect();
        errors.extend(unique_errors(&pair.unique, &truth.law));
        errors.extend(mixture_errors(&pair.mixture, &truth.law));
        records.push(ReplicationRecord {
            rep,
            c_lambda,
            c_tilde,
            outcome: Outcome::Success(RepSummary {
                k_hat,
                classification_error: class_err,
                choice: decision.choice,
                errors,
            }),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStat {
    pub name: String,
    pub bias: f64,
    pub rmse: f64,
}

/// Summary of one `(design, N, T, c_λ, c̃)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub design: Design,
    pub firms: usize,
    pub periods: usize,
    pub c_lambda: f64,
    pub c_tilde: f64,
    pub replications: usize,
    pub failures: usize,
    /// `k_frequency[k-1]` is the share of successful replications with `K̂ = k`.
    pub k_frequency: Vec<f64>,
    pub classification_error: f64,
    pub unique_frequency: f64,
    pub mixture_frequency: f64,
    pub params: Vec<ParamStat>,
    pub failure_messages: Vec<String>,
}

impl MonteCarloReport {
    pub fn param(&self, name: &str) -> Option<&ParamStat> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// BIAS is `|mean error|`, RMSE is `sqrt(mean error²)`, both over successful
/// replications, accumulated in record order. Frequencies are shares of
/// successful replications; failures are counted separately.
pub fn aggregate(records: &[ReplicationRecord], k_max: usize) -> Result<AggregateStats> {
    let ok: Vec<&RepSummary> = records
        .iter()
        .filter_map(|r| match &r.outcome {
            Outcome::Success(s) => Some(s),
            Outcome::Failed { .. } => None,
        })
        .collect();
    if ok.is_empty() {
        return Err(Error::NoSuccessfulReplications);
    }
    let n = ok.len() as f64;
    let k_frequency = (1..=k_max)
        .map(|k| ok.iter().filter(|s| s.k_hat == k).count() as f64 / n)
        .collect();
    let classification_error = ok.iter().map(|s| s.classification_error).sum::<f64>() / n;
    let mixture = ok.iter().filter(|s| s.choice == ModelChoice::Mixture).count() as f64 / n;
    let names: Vec<String> = ok[0].errors.iter().map(|(name, _)| name.clone()).collect();
    let params = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let errs: Vec<f64> = ok.iter().map(|s| s.errors[j].1).collect();
            let mean = errs.iter().sum::<f64>() / n;
            let mse = errs.iter().map(|e| e * e).sum::<f64>() / n;
            ParamStat {
                name: name.clone(),
                bias: mean.abs(),
                rmse: mse.sqrt(),
            }
        })
        .collect();
    let failure_messages = records
        .iter()
        .filter_map(|r| match &r.outcome {
            Outcome::Failed { stage, message } => Some(format!("rep {}: {stage}: {message}", r.rep)),
            Outcome::Success(_) => None,
        })
        .collect();
    Ok(AggregateStats {
        failures: records.len() - ok.len(),
        k_frequency,
        classification_error,
        unique_frequency: 1.0 - mixture,
        mixture_frequency: mixture,
        params,
        failure_messages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub failures: usize,
    pub k_frequency: Vec<f64>,
    pub classification_error: f64,
    pub unique_frequency: f64,
    pub mixture_frequency: f64,
    pub params: Vec<ParamStat>,
    pub failure_messages: Vec<String>,
}

fn run_case(design: Design, firms: usize, periods: usize, config: &McConfig) -> Vec<Vec<ReplicationRecord>> {
    let run = |rep: usize| run_replication(design, firms, periods, config, rep);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.replications).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.replications).map(run).collect()
    }
}

/// Run every case and penalty pair of `config`. The result depends only on
/// the configuration, not on the worker count.
pub fn sensitivity_sweep(config: &McConfig) -> Result<Vec<MonteCarloReport>> {
    config.validate()?;
    let body = || -> Result<Vec<MonteCarloReport>> {
        let mut reports = Vec::new();
        for &design in &config.designs {
            for &(firms, periods) in &config.sizes {
                let per_rep = run_case(design, firms, periods, config);
                let pairs = per_rep.first().map_or(0, Vec::len);
                for j in 0..pairs {
                    let records: Vec<ReplicationRecord> = per_rep.iter().map(|r| r[j].clone()).collect();
                    let stats = aggregate(&records, config.k_max)?;
                    reports.push(MonteCarloReport {
                        design,
                        firms,
                        periods,
                        c_lambda: records[0].c_lambda,
                        c_tilde: records[0].c_tilde,
                        replications: records.len(),
                        failures: stats.failures,
                        k_frequency: stats.k_frequency,
                        classification_error: stats.classification_error,
                        unique_frequency: stats.unique_frequency,
                        mixture_frequency: stats.mixture_frequency,
                        params: stats.params,
                        failure_messages: stats.failure_messages,
                    });
                }
            }
        }
        Ok(reports)
    };
    #[cfg(feature = "parallel")]
    {
        if config.workers > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
            return pool.install(body);
        }
    }
    body()
}

/// Alias of [`sensitivity_sweep`] for single-point grids.
pub fn run(config: &McConfig) -> Result<Vec<MonteCarloReport>> {
    sensitivity_sweep(config)
}

/// Aligned text tables: selection frequencies and BIAS/RMSE, one block per
/// design and penalty pair.
pub fn render_tables(reports: &[MonteCarloReport]) -> String {
    let mut out = String::new();
    let mut blocks: Vec<(Design, u64, u64)> = Vec::new();
    for r in reports {
        let key = (r.design, r.c_lambda.to_bits(), r.c_tilde.to_bits());
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }
    for (design, cl, ct) in blocks {
        let rows: Vec<&MonteCarloReport> = reports
            .iter()
            .filter(|r| r.design == design && r.c_lambda.to_bits() == cl && r.c_tilde.to_bits() == ct)
            .collect();
        let (cl, ct) = (f64::from_bits(cl), f64::from_bits(ct));
        let _ = writeln!(out, "{design}  c_lambda = {cl}  c_tilde = {ct}");
        let kmax = rows[0].k_frequency.len();
        let mut head = format!("{:<12}", "(N,T)");
        for k in 1..=kmax {
            head += &format!("{:>8}", format!("K={k}"));
        }
        head += &format!("{:>9}{:>8}{:>8}{:>7}", "Pr(F)", "uni", "mix", "fail");
        let _ = writeln!(out, "{head}");
        for r in &rows {
            let mut line = format!("{:<12}", format!("({},{})", r.firms, r.periods));
            for f in &r.k_frequency {
                line += &format!("{f:>8.3}");
            }
            line += &format!(
                "{:>9.3}{:>8.3}{:>8.3}{:>7}",
                r.classification_error, r.unique_frequency, r.mixture_frequency, r.failures
            );
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
        let mut head = format!("{:<12}", "(N,T)");
        for p in &rows[0].params {
            head += &format!("{:>24}", format!("{} BIAS/RMSE", p.name));
        }
        let _ = writeln!(out, "{head}");
        for r in &rows {
            let mut line = format!("{:<12}", format!("({},{})", r.firms, r.periods));
            for p in &r.params {
                line += &format!("{:>24}", format!("{:.3} / {:.3}", p.bias, p.rmse));
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
    }
    out
}
