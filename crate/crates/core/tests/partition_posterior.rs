//! The DP sampler against the exact posterior over partitions of a tiny
//! one-dimensional sample, with α integrated out numerically.

use dppm::random::ln_multigamma;
use dppm::{run_gibbs, DataMatrix, GibbsConfig, Hyperparams, ModelFamily, RngHandle};
use statrs::function::gamma::ln_gamma;

const XS: [f64; 6] = [-1.2, -0.9, -1.0, 1.1, 0.8, 2.5];

/// All set partitions as restricted growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..n {
        let mut next = Vec::new();
        for p in &out {
            let m = *p.iter().max().unwrap();
            for z in 0..=m + 1 {
                let mut q = p.clone();
                q.push(z);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log ∫ CRP(partition | α) Gamma(α; a, b) dα by the trapezoid rule in log α.
fn log_crp_marginal(counts: &[usize], a: f64, b: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    let (lo, hi, m) = (-14.0f64, 7.0f64, 6000);
    let step = (hi - lo) / m as f64;
    let terms: Vec<f64> = (0..=m)
        .map(|i| {
            let t = lo + step * i as f64;
            let alpha = t.exp();
            let edge: f64 = if i == 0 || i == m { 0.5 } else { 1.0 };
            let prior = a * b.ln() - ln_gamma(a) + (a - 1.0) * t - b * alpha;
            edge.ln() + step.ln() + t + prior + k * t + ln_gamma(alpha) - ln_gamma(alpha + n as f64)
        })
        .collect();
    log_sum_exp(&terms) + counts.iter().map(|&c| ln_gamma(c as f64)).sum::<f64>()
}

fn exact_k_posterior(model: ModelFamily, h: &Hyperparams) -> Vec<f64> {
    let n = XS.len();
    let (kappa, nu0, s0_sq, mu0) = (h.kappa, h.nu0, h.s0_sq, h.mu0[0]);
    let l0 = h.lambda0.matrix()[(0, 0)];
    let mut scored = Vec::new();
    for p in partitions(n) {
        let k = p.iter().max().unwrap() + 1;
        let mut counts = vec![0; k];
        for &z in &p {
            counts[z] += 1;
        }
        let mut lp = log_crp_marginal(&counts, h.alpha_a, h.alpha_b);
        let mut scatter_total = 0.0;
        for c in 0..k {
            let v: Vec<f64> = p.iter().zip(&XS).filter(|(z, _)| **z == c).map(|(_, x)| *x).collect();
            let nk = v.len() as f64;
            let xbar = v.iter().sum::<f64>() / nk;
            let w: f64 = v.iter().map(|x| (x - xbar).powi(2)).sum();
            let s = w + nk * kappa / (nk + kappa) * (xbar - mu0).powi(2);
            scatter_total += s;
            lp += 0.5 * (kappa / (kappa + nk)).ln();
            if model == ModelFamily::GeneralFull {
                let nun = nu0 + nk;
                lp += -nk / 2.0 * std::f64::consts::PI.ln() + ln_multigamma(1, nun / 2.0) - ln_multigamma(1, nu0 / 2.0)
                    + nu0 / 2.0 * l0.ln()
                    - nun / 2.0 * (l0 + s).ln();
            }
        }
        if model == ModelFamily::SphericalEqual {
            // one volume shared by every cluster
            let nn = n as f64;
            lp += -nn / 2.0 * (2.0 * std::f64::consts::PI).ln() + ln_gamma((nu0 + nn) / 2.0) - ln_gamma(nu0 / 2.0)
                + nu0 / 2.0 * (s0_sq / 2.0).ln()
                - (nu0 + nn) / 2.0 * ((s0_sq + scatter_total) / 2.0).ln();
        }
        scored.push((k, lp));
    }
    let z = log_sum_exp(&scored.iter().map(|s| s.1).collect::<Vec<_>>());
    let mut pk = vec![0.0; n + 1];
    for (k, lp) in scored {
        pk[k] += (lp - z).exp();
    }
    pk
}

fn check(model: ModelFamily, seed: u64) {
    let rows: Vec<Vec<f64>> = XS.iter().map(|&v| vec![v]).collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let h = Hyperparams::from_data(&data).unwrap();
    let exact = exact_k_posterior(model, &h);
    assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let chain = run_gibbs(&data, model, &h, GibbsConfig::new(40_000, 1_000).unwrap(), &mut RngHandle::new(seed)).unwrap();
    let dist = chain.k_distribution();
    for (k, &p) in exact.iter().enumerate().skip(1) {
        let emp = dist.iter().find(|e| e.0 == k).map_or(0.0, |e| e.1);
        assert!((emp - p).abs() < 0.02, "{model} K={k}: chain {emp:.4} vs exact {p:.4}");
    }
}

#[test]
fn unconstrained_model_matches_enumeration() {
    check(ModelFamily::GeneralFull, 11);
}

#[test]
fn shared_volume_model_matches_enumeration() {
    check(ModelFamily::SphericalEqual, 12);
}
