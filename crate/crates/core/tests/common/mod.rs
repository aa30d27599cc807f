//! Independent reference implementations shared by the oracle and
//! acceptance tests. Nothing here calls into the estimator's numerics.

#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sfgroup::grouping::GroupAssignment;
use sfgroup::likelihood::{loglik_unique_firm, CompositeResiduals, FirmResidual, MixtureParams};
use sfgroup::individual::fit_firm;
use sfgroup::post::fit_group;
use sfgroup::PanelData;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

// ---------------------------------------------------------------- least squares

fn cos_term(j: usize, s: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT_2 * (j as f64 * PI * s).cos()
    }
}

fn row(x: &[f64], s: f64, m: usize, intercept: bool) -> Vec<f64> {
    let mut r = Vec::new();
    if intercept {
        r.push(1.0);
    }
    r.extend((1..m).map(|j| cos_term(j, s)));
    for &xl in x {
        r.extend((0..m).map(|j| xl * cos_term(j, s)));
    }
    r
}

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Exact solution of the normal equations `X'X b = X'y` over the rationals.
pub fn exact_normal_equations(rows: &[Vec<BigRational>], y: &[BigRational]) -> Vec<BigRational> {
    let k = rows[0].len();
    let mut a = vec![vec![BigRational::zero(); k + 1]; k];
    for (r, yr) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += &r[i] * &r[j];
            }
            a[i][k] += &r[i] * yr;
        }
    }
    for col in 0..k {
        let pivot = (col..k).find(|&r| !a[r][col].is_zero()).expect("nonsingular normal equations");
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for j in col..=k {
            a[col][j] = &a[col][j] / &p;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..=k {
                    let t = &f * &a[col][j];
                    a[r][j] -= t;
                }
            }
        }
    }
    a.into_iter().map(|r| r[k].clone()).collect()
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("representable")
}

pub struct LstsqInstance {
    pub panel: PanelData,
    pub m: usize,
}

/// A small random panel whose firm regression is well posed.
pub fn lstsq_instance(seed: u64) -> LstsqInstance {
    let mut g = rng(seed);
    let firms = g.random_range(2..=4);
    let p = g.random_range(1..=2);
    let m = g.random_range(2..=3);
    let periods = g.random_range(m * (p + 1) + 3..=20);
    let y: Vec<f64> = (0..firms * periods).map(|_| 3.0 * normal(&mut g)).collect();
    let x: Vec<f64> = (0..firms * periods * p).map(|_| 1.0 + normal(&mut g)).collect();
    LstsqInstance {
        panel: PanelData::unlabeled(firms, periods, p, y, x).unwrap(),
        m,
    }
}

/// Largest coefficient discrepancy (relative to `max(1, |exact|)`) between
/// the firm regression of firm 0 and the exact normal-equations solution,
/// including `σ̂ᵥ`.
pub fn firm_fit_discrepancy(inst: &LstsqInstance) -> f64 {
    let panel = &inst.panel;
    let t_n = panel.periods();
    let rows: Vec<Vec<f64>> = (0..t_n)
        .map(|t| row(panel.x(0, t), (t + 1) as f64 / t_n as f64, inst.m, true))
        .collect();
    let qr: Vec<Vec<BigRational>> = rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
    let qy: Vec<BigRational> = panel.y(0).iter().map(|&v| q(v)).collect();
    let exact = exact_normal_equations(&qr, &qy);
    let ssr: BigRational = qr
        .iter()
        .zip(&qy)
        .map(|(r, yv)| {
            let fit: BigRational = r.iter().zip(&exact).map(|(a, b)| a * b).sum();
            let e = yv - fit;
            &e * &e
        })
        .sum();
    let sigma = (to_f64(&ssr) / (t_n as f64 - 1.0)).sqrt();

    let est = fit_firm(panel, 0, inst.m).unwrap();
    let mut got = vec![est.intercept_hat];
    got.extend(&est.pi_hat);
    got.push(est.sigma_v_hat);
    let mut want: Vec<f64> = exact.iter().map(to_f64).collect();
    want.push(sigma);
    max_rel(&got, &want)
}

/// Same comparison for the pooled within fit of every firm in the panel.
pub fn pooled_fit_discrepancy(inst: &LstsqInstance) -> f64 {
    let panel = &inst.panel;
    let t_n = panel.periods();
    let tq = BigRational::from_integer(BigInt::from(t_n));
    let mut qr = Vec::new();
    let mut qy = Vec::new();
    for i in 0..panel.firms() {
        let block: Vec<Vec<BigRational>> = (0..t_n)
            .map(|t| {
                row(panel.x(i, t), (t + 1) as f64 / t_n as f64, inst.m, false)
                    .iter()
                    .map(|&v| q(v))
                    .collect()
            })
            .collect();
        let k = block[0].len();
        let means: Vec<BigRational> = (0..k)
            .map(|j| block.iter().map(|r| r[j].clone()).sum::<BigRational>() / &tq)
            .collect();
        for r in &block {
            qr.push(r.iter().zip(&means).map(|(a, b)| a - b).collect::<Vec<_>>());
        }
        let ys: Vec<BigRational> = panel.y(i).iter().map(|&v| q(v)).collect();
        let ym = ys.iter().cloned().sum::<BigRational>() / &tq;
        qy.extend(ys.into_iter().map(|v| v - &ym));
    }
    let exact = exact_normal_equations(&qr, &qy);
    let ssr: BigRational = qr
        .iter()
        .zip(&qy)
        .map(|(r, yv)| {
            let fit: BigRational = r.iter().zip(&exact).map(|(a, b)| a * b).sum();
            let e = yv - fit;
            &e * &e
        })
        .sum();
    let members: Vec<usize> = (0..panel.firms()).collect();
    let sigma = (to_f64(&ssr) / (members.len() as f64 * (t_n as f64 - 1.0))).sqrt();

    let fit = fit_group(panel, &members, inst.m).unwrap();
    let mut got = fit.pi.clone();
    got.push(fit.sigma_v);
    let mut want: Vec<f64> = exact.iter().map(to_f64).collect();
    want.push(sigma);
    max_rel(&got, &want)
}

fn max_rel(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- Ward

/// Merge `(a, b, cost)` steps of greedy Ward agglomeration, with every cost
/// recomputed from the raw points as the increase in within-cluster sum of
/// squares. Clusters are named by their smallest member.
pub fn ward_by_recompute(points: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let ess = |members: &[usize]| -> f64 {
        let d = points[0].len();
        let n = members.len() as f64;
        let mut c = vec![0.0; d];
        for &i in members {
            for (cj, pj) in c.iter_mut().zip(&points[i]) {
                *cj += pj / n;
            }
        }
        members
            .iter()
            .map(|&i| points[i].iter().zip(&c).map(|(p, cj)| (p - cj).powi(2)).sum::<f64>())
            .sum()
    };
    // kept sorted by smallest member, so scanning pairs in order breaks
    // exact ties toward the lexicographically smallest names
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (0, 0, f64::INFINITY);
        for x in 0..clusters.len() {
            for y in (x + 1)..clusters.len() {
                let mut joined = clusters[x].clone();
                joined.extend(&clusters[y]);
                let cost = ess(&joined) - ess(&clusters[x]) - ess(&clusters[y]);
                if cost < best.2 {
                    best = (x, y, cost);
                }
            }
        }
        let (x, y, cost) = best;
        out.push((clusters[x][0], clusters[y][0], cost));
        let taken = clusters.remove(y);
        clusters[x].extend(taken);
        clusters[x].sort_unstable();
    }
    out
}

/// Partition into `k` clusters obtained by replaying `merges` (named by
/// smallest member) until `k` remain.
pub fn replay_cut(n: usize, merges: &[(usize, usize, f64)], k: usize) -> GroupAssignment {
    let mut rep: Vec<usize> = (0..n).collect();
    for &(a, b, _) in &merges[..n - k] {
        for r in rep.iter_mut() {
            if *r == b {
                *r = a;
            }
        }
    }
    GroupAssignment::from_labels(&rep).unwrap()
}

// ---------------------------------------------------------------- likelihood

/// Tanh-sinh quadrature on `[a, b]`, halving the step until two successive
/// levels agree to `rel` relative.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let half_pi = 0.5 * PI;
    let term = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let x = s.tanh();
        let w = half_pi * t.cosh() / s.cosh().powi(2);
        if w == 0.0 || x.abs() >= 1.0 {
            return 0.0;
        }
        w * f(c + r * x)
    };
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1.0;
    while k * h <= t_max {
        sum += term(k * h) + term(-k * h);
        k += 1.0;
    }
    let mut estimate = r * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        // new nodes are the odd multiples of the halved step
        let mut k = 1.0;
        while k * h <= t_max {
            sum += term(k * h) + term(-k * h);
            k += 2.0;
        }
        let next = r * h * sum;
        if (next - estimate).abs() <= rel * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `log ∫₀^∞ ∏_t φ_{σᵥ}(ε_t + u) · (2/σᵤ) φ(u/σᵤ) du` by tanh-sinh quadrature,
/// with the integrand rescaled by its maximum.
pub fn loglik_by_quadrature(eps: &[f64], sigma_v: f64, sigma_u: f64) -> f64 {
    let log_phi = |z: f64| -0.5 * z * z - 0.5 * (2.0 * PI).ln();
    let log_integrand = |u: f64| -> f64 {
        eps.iter().map(|e| log_phi((e + u) / sigma_v) - sigma_v.ln()).sum::<f64>() + 2f64.ln() - sigma_u.ln()
            + log_phi(u / sigma_u)
    };
    let t = eps.len() as f64;
    let s: f64 = eps.iter().sum();
    let (sv2, su2) = (sigma_v * sigma_v, sigma_u * sigma_u);
    let mode = (-su2 * s / (sv2 + t * su2)).max(0.0);
    let spread = (sv2 * su2 / (sv2 + t * su2)).sqrt();
    let peak = log_integrand(mode);
    let f = |u: f64| (log_integrand(u) - peak).exp();
    let upper = mode + 40.0 * spread;
    // split at the mode so the peak is a node
    let mut total = tanh_sinh(&f, mode, upper, 1e-14);
    if mode > 0.0 {
        total += tanh_sinh(&f, 0.0, mode, 1e-14);
    }
    peak + total.ln()
}

pub struct LikelihoodInstance {
    pub eps: Vec<f64>,
    pub sigma_v: f64,
    pub sigma_u: f64,
}

pub fn likelihood_instance(seed: u64) -> LikelihoodInstance {
    let mut g = rng(seed);
    let periods = g.random_range(1..=6);
    let sigma_v = g.random_range(0.2..2.0);
    let sigma_u = g.random_range(0.1..3.0);
    // residuals from the model plus an occasional misspecified offset
    let u = sigma_u * normal(&mut g).abs();
    let offset = if g.random_bool(0.3) { 2.0 * normal(&mut g) } else { 0.0 };
    let eps = (0..periods).map(|_| sigma_v * normal(&mut g) - u + offset).collect();
    LikelihoodInstance { eps, sigma_v, sigma_u }
}

/// `|exp(loglik - oracle) - 1|`.
pub fn likelihood_discrepancy(inst: &LikelihoodInstance) -> f64 {
    let s: f64 = inst.eps.iter().sum();
    let ss: f64 = inst.eps.iter().map(|e| e * e).sum();
    let got = loglik_unique_firm(s, ss, inst.eps.len(), inst.sigma_v.powi(2), inst.sigma_u.powi(2)).unwrap();
    let want = loglik_by_quadrature(&inst.eps, inst.sigma_v, inst.sigma_u);
    (got - want).exp_m1().abs()
}

// ---------------------------------------------------------------- derivatives

/// Five-point central stencil.
pub fn five_point_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            let step = h * x[j].abs().max(1.0);
            let mut at = |k: f64| {
                p[j] = x[j] + k * step;
                let v = f(&p);
                p[j] = x[j];
                v
            };
            (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * step)
        })
        .collect()
}

pub fn residual_sample(seed: u64, firms: usize) -> CompositeResiduals {
    let mut g = rng(seed);
    let firms = (0..firms)
        .map(|_| {
            let t = g.random_range(5..=30);
            let sv = g.random_range(0.3..1.5);
            let u = 0.8 * normal(&mut g).abs();
            let series: Vec<f64> = (0..t).map(|_| 0.5 - u + sv * normal(&mut g)).collect();
            FirmResidual::from_series(&series, sv * sv)
        })
        .collect();
    CompositeResiduals { firms }
}

/// `max |g₁ - g₂| / max(1, |g₂|)` over coordinates.
pub fn gradient_gap(g1: &[f64], g2: &[f64]) -> f64 {
    g1.iter()
        .zip(g2)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Largest stencil disagreement over `draws` random interior points of the
/// total unique and mixture log-likelihoods.
pub fn worst_gradient_gap(draws: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..draws {
        let resid = residual_sample(seed, 40);
        let mut g = rng(9000 + seed);
        let f = |th: &[f64]| resid.loglik_unique(th[0], th[1].exp());
        let at = [g.random_range(-0.5..1.5), g.random_range(-2.0..1.0)];
        worst = worst.max(gradient_gap(&sfgroup::optimize::gradient(&f, &at), &five_point_gradient(&f, &at, 1e-3)));
        let f = |th: &[f64]| {
            resid.loglik_mixture(&MixtureParams {
                tau: 1.0 / (1.0 + (-th[0]).exp()),
                alpha0_1: th[1],
                sigma_u2_1: th[2].exp(),
                alpha0_2: th[3],
                sigma_u2_2: th[4].exp(),
            })
        };
        let at = [
            g.random_range(-1.5..1.5),
            g.random_range(0.0..1.5),
            g.random_range(-2.0..0.5),
            g.random_range(-1.5..0.0),
            g.random_range(-2.0..0.5),
        ];
        worst = worst.max(gradient_gap(&sfgroup::optimize::gradient(&f, &at), &five_point_gradient(&f, &at, 1e-3)));
    }
    worst
}

/// `Σe²` of a pooled fit, with residuals rebuilt from the raw panel.
pub fn pooled_residual_ss(panel: &PanelData, members: &[usize], m: usize, pi: &[f64]) -> f64 {
    let t_n = panel.periods();
    let mut ss = 0.0;
    for &i in members {
        let rows: Vec<Vec<f64>> = (0..t_n).map(|t| row(panel.x(i, t), (t + 1) as f64 / t_n as f64, m, false)).collect();
        let k = rows[0].len();
        let means: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t_n as f64).collect();
        let y = panel.y(i);
        let ym = y.iter().sum::<f64>() / t_n as f64;
        for (r, yt) in rows.iter().zip(y) {
            let fit: f64 = r.iter().zip(&means).zip(pi).map(|((a, b), c)| (a - b) * c).sum();
            ss += (yt - ym - fit).powi(2);
        }
    }
    ss
}
