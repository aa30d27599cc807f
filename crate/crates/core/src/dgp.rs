//! Simulation designs with known group structure and inefficiency law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;
use crate::panel::PanelData;
use crate::quadrature::integrate;

/// Frontier arguments are kept this far inside `[0, 1]` when simulating.
pub const FRONTIER_CLAMP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Design {
    Dgp1U,
    Dgp1M,
    Dgp2U,
    Dgp2M,
    Dgp3U,
    Dgp3M,
    /// Two groups (113:353 split) with five regressors and a mixture law at
    /// the banking estimates.
    Bank,
}

impl Design {
    pub const PAPER: [Design; 6] = [
        Design::Dgp1U,
        Design::Dgp1M,
        Design::Dgp2U,
        Design::Dgp2M,
        Design::Dgp3U,
        Design::Dgp3M,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::Dgp1U => "DGP1U",
            Design::Dgp1M => "DGP1M",
            Design::Dgp2U => "DGP2U",
            Design::Dgp2M => "DGP2M",
            Design::Dgp3U => "DGP3U",
            Design::Dgp3M => "DGP3M",
            Design::Bank => "BANK",
        }
    }

    pub fn groups(self) -> usize {
        match self {
            Design::Dgp3U | Design::Dgp3M => 3,
            _ => 2,
        }
    }

    pub fn regressors(self) -> usize {
        match self {
            Design::Dgp1U | Design::Dgp1M | Design::Dgp2U | Design::Dgp2M => 1,
            Design::Dgp3U | Design::Dgp3M => 2,
            Design::Bank => 5,
        }
    }

    pub fn is_mixture(self) -> bool {
        matches!(self, Design::Dgp1M | Design::Dgp2M | Design::Dgp3M | Design::Bank)
    }

    pub fn law(self) -> InefficiencyLaw {
        match self {
            Design::Bank => InefficiencyLaw::Mixture {
                tau: 0.8748,
                alpha0: [0.0157, 0.6161],
                sigma_u: [0.4426, 0.7756],
            },
            d if d.is_mixture() => InefficiencyLaw::Mixture {
                tau: 0.5,
                alpha0: [1.0, -1.0],
                sigma_u: [0.75, 1.25],
            },
            _ => InefficiencyLaw::Unique {
                alpha0: 0.5,
                sigma_u: 1.0,
            },
        }
    }

    pub fn sigma_v(self) -> Vec<f64> {
        match self {
            Design::Dgp1U | Design::Dgp1M => vec![1.0, 1.0],
            Design::Dgp2U | Design::Dgp2M => vec![0.5, 1.5],
            Design::Dgp3U | Design::Dgp3M => vec![0.75, 1.25, 1.25],
            Design::Bank => vec![0.0862, 0.0855],
        }
    }

    /// Mean and standard deviation of each regressor.
    fn regressor_law(self) -> Vec<(f64, f64)> {
        match self {
            Design::Dgp1U | Design::Dgp1M => vec![(1.0, 1.0)],
            Design::Dgp2U | Design::Dgp2M => vec![(2.0, 0.75)],
            Design::Dgp3U | Design::Dgp3M => vec![(1.0, 0.5); 2],
            Design::Bank => vec![(-0.5, 0.3), (-0.2, 0.3), (1.0, 1.0), (2.0, 1.0), (1.5, 1.0)],
        }
    }

    fn tag(self) -> u64 {
        match self {
            Design::Dgp1U => 1,
            Design::Dgp1M => 2,
            Design::Dgp2U => 3,
            Design::Dgp2M => 4,
            Design::Dgp3U => 5,
            Design::Dgp3M => 6,
            Design::Bank => 7,
        }
    }

    /// Group sizes for `firms` firms: equal blocks, or 113:353 for the bank
    /// design.
    pub fn group_sizes(self, firms: usize) -> Vec<usize> {
        match self {
            Design::Bank => {
                let first = ((firms as f64) * 113.0 / 466.0).round() as usize;
                let first = first.clamp(1.min(firms), firms.saturating_sub(1));
                vec![first, firms - first]
            }
            d => {
                let k = d.groups();
                (0..k).map(|g| (g + 1) * firms / k - g * firms / k).collect()
            }
        }
    }

    /// Uncentered `α_(g)(s)` and `β_(g)(s)` at `s`.
    fn raw_frontier(self, group: usize, s: f64) -> (f64, Vec<f64>) {
        let logistic = |mu: f64, sd: f64| 1.0 / (1.0 + (-(s - mu) / sd).exp());
        match (self, group) {
            (Design::Dgp1U | Design::Dgp1M, 0) => (
                3.0 * logistic(0.5, 0.1),
                vec![3.0 * (2.0 * s - 4.0 * s * s + 2.0 * s.powi(3) + logistic(0.6, 0.1))],
            ),
            (Design::Dgp1U | Design::Dgp1M, _) => (
                3.0 * (2.0 * s - 6.0 * s * s + 4.0 * s.powi(3) + logistic(0.7, 0.05)),
                vec![3.0 * (s - 3.0 * s * s + 2.0 * s.powi(3) + logistic(0.7, 0.04))],
            ),
            (Design::Dgp2U | Design::Dgp2M, _) => (s.ln() * (6.0 * s).sin(), vec![7.0 * (5.0 * s).sin() * (-5.0 * s).exp()]),
            (Design::Dgp3U | Design::Dgp3M, 0) => (-1.0 / (1.0 + 3.0 * s), vec![2.0 * s.powi(3), (5.0 * s).ln()]),
            (Design::Dgp3U | Design::Dgp3M, 1) => (-(4.0 * s).cos(), vec![(4.0 * s).sin(), (s / (1.0 - s)).ln()]),
            (Design::Dgp3U | Design::Dgp3M, _) => (
                5.0 * s * s - s + 1.0,
                vec![(-s).exp() + (5.0 * s).sin(), -5.0 * s.sin() * (5.0 * s).cos() + 1.0],
            ),
            (Design::Bank, 0) => (
                0.3 * (2.0 * std::f64::consts::PI * s).sin(),
                vec![0.25 + 0.1 * s, 0.15, 0.1 + 0.05 * s, 0.55 - 0.2 * s, 0.2],
            ),
            (Design::Bank, _) => (
                -0.2 * (std::f64::consts::PI * s).cos() + 0.4 * s,
                vec![0.3, 0.1 + 0.1 * s, 0.15, 0.3 + 0.15 * s, 0.25 - 0.05 * s],
            ),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        [Design::PAPER.as_slice(), &[Design::Bank]]
            .concat()
            .into_iter()
            .find(|d| d.name() == key)
            .ok_or_else(|| Error::UnknownDesign(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InefficiencyLaw {
    Unique { alpha0: f64, sigma_u: f64 },
    Mixture { tau: f64, alpha0: [f64; 2], sigma_u: [f64; 2] },
}

/// Everything needed to score an estimate against the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpTruth {
    pub design: Design,
    pub seed: u64,
    pub groups: GroupAssignment,
    pub sigma_v: Vec<f64>,
    pub law: InefficiencyLaw,
    /// `ϖ_(g)` for each group.
    pub centering: Vec<f64>,
    pub u: Vec<f64>,
    /// Mixture component of each firm (0 or 1); all 0 under a unique law.
    pub component: Vec<usize>,
    pub frontier_clamp: f64,
}

impl DgpTruth {
    /// `α⁰` of each firm's component.
    pub fn alpha0(&self) -> Vec<f64> {
        self.component
            .iter()
            .map(|&c| match self.law {
                InefficiencyLaw::Unique { alpha0, .. } => alpha0,
                InefficiencyLaw::Mixture { alpha0, .. } => alpha0[c],
            })
            .collect()
    }

    /// Centered frontier `(α_(g)(s), β_(g)(s))`, with `s` clamped as in
    /// simulation.
    pub fn frontier(&self, group: usize, s: f64) -> (f64, Vec<f64>) {
        let s = s.clamp(self.frontier_clamp, 1.0 - self.frontier_clamp);
        let (a, b) = self.design.raw_frontier(group, s);
        (a - self.centering[group], b)
    }

    /// Centered `α_(g)(s)` without clamping, for `s` strictly inside `(0, 1)`.
    pub fn alpha_exact(&self, group: usize, s: f64) -> f64 {
        self.design.raw_frontier(group, s).0 - self.centering[group]
    }
}

/// `|Z|·σ` for a standard normal `Z`.
pub fn sample_half_normal<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z.abs() * sigma
}

/// `∫₀¹ f(s) ds` by adaptive quadrature.
pub fn centering_constant<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    integrate(f, 0.0, 1.0, 1e-12)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of keys into one 64-bit seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x5EED_u64, |acc, &k| splitmix(acc ^ splitmix(k)))
}

#[derive(Clone, Copy)]
enum Role {
    Regressors = 1,
    Noise = 2,
    Inefficiency = 3,
    Component = 4,
}

fn stream(seed: u64, design: Design, firm: usize, role: Role) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, design.tag(), firm as u64, role as u64]))
}

/// Simulate a balanced panel from `design`.
pub fn generate(design: Design, firms: usize, periods: usize, seed: u64) -> Result<(PanelData, DgpTruth)> {
    if firms < design.groups() {
        return Err(Error::InvalidInput(format!(
            "{design} needs at least {} firms, got {firms}",
            design.groups()
        )));
    }
    if periods == 0 {
        return Err(Error::InvalidInput("simulation needs at least one period".into()));
    }
    let sizes = design.group_sizes(firms);
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(g, n)).collect();
    let groups = GroupAssignment::from_labels(&labels)?;
    let centering = (0..design.groups())
        .map(|g| centering_constant(|s| design.raw_frontier(g, s).0))
        .collect::<Result<Vec<_>>>()?;
    let law = design.law();
    let sigma_v = design.sigma_v();
    let truth_partial = DgpTruth {
        design,
        seed,
        groups,
        sigma_v,
        law,
        centering,
        u: Vec::new(),
        component: Vec::new(),
        frontier_clamp: FRONTIER_CLAMP,
    };
    let frontiers: Vec<Vec<(f64, Vec<f64>)>> = (0..design.groups())
        .map(|g| (1..=periods).map(|t| truth_partial.frontier(g, t as f64 / periods as f64)).collect())
        .collect();

    let p = design.regressors();
    let xlaw = design.regressor_law();
    let mut y = Vec::with_capacity(firms * periods);
    let mut x = Vec::with_capacity(firms * periods * p);
    let mut u = Vec::with_capacity(firms);
    let mut component = Vec::with_capacity(firms);
    for i in 0..firms {
        let g = labels[i];
        let (c, level) = match law {
            InefficiencyLaw::Unique { alpha0, sigma_u } => {
                let ui = sample_half_normal(sigma_u, &mut stream(seed, design, i, Role::Inefficiency));
                u.push(ui);
                (0, alpha0 - ui)
            }
            InefficiencyLaw::Mixture { tau, alpha0, sigma_u } => {
                let c = usize::from(stream(seed, design, i, Role::Component).random::<f64>() >= tau);
                let ui = sample_half_normal(sigma_u[c], &mut stream(seed, design, i, Role::Inefficiency));
                u.push(ui);
                (c, alpha0[c] - ui)
            }
        };
        component.push(c);
        let mut xr = stream(seed, design, i, Role::Regressors);
        let mut vr = stream(seed, design, i, Role::Noise);
        for (alpha, beta) in &frontiers[g] {
            let mut yt = level + alpha + truth_partial.sigma_v[g] * vr.sample::<f64, _>(StandardNormal);
            for (l, &(mean, sd)) in xlaw.iter().enumerate() {
                let xv = mean + sd * xr.sample::<f64, _>(StandardNormal);
                yt += xv * beta[l];
                x.push(xv);
            }
            y.push(yt);
        }
    }
    let panel = PanelData::unlabeled(firms, periods, p, y, x)?;
    Ok((
        panel,
        DgpTruth {
            u,
            component,
            ..truth_partial
        },
    ))
}
