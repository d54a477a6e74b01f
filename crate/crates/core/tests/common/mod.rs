#![allow(dead_code)]

use densdep::dynamics::{self, DynamicsParams};
use densdep::ObservedSeries;

/// A simulated series observed with a constant sd, without centering.
pub fn simulated(k: usize, b: &[f64], sigma: f64, obs_sd: f64, horizon: usize, seed: u64) -> ObservedSeries {
    let p = DynamicsParams::new(k, b.to_vec(), sigma * sigma).unwrap();
    let tr = dynamics::simulate(&p, &vec![0.0; k.max(1)], horizon, &vec![obs_sd; horizon], seed).unwrap();
    ObservedSeries::from_parts(tr.observed, tr.obs_sd)
}

/// The first published simulation setting.
pub fn sim1(horizon: usize, seed: u64) -> ObservedSeries {
    simulated(1, &[0.5, -0.5], 0.05, 0.05, horizon, seed)
}

/// Exact log marginal likelihood of `y[5..]` under
/// `x_t = x_{t-1} + beta + eps`, `eps ~ N(0, sigma2)`, `y_t ~ N(x_t, s_t^2)`,
/// with `x_5 ~ N(y_5, s_5^2)` and `beta ~ N(0, v0)` independent.
pub fn kalman_log_evidence(y: &[f64], s: &[f64], sigma2: f64, v0: f64) -> f64 {
    // state (x, beta), covariance [[p11, p12], [p12, p22]]
    let (mut m1, mut m2) = (y[4], 0.0);
    let (mut p11, mut p12, mut p22) = (s[4] * s[4], 0.0, v0);
    let mut total = 0.0;
    for t in 5..y.len() {
        // predict with F = [[1, 1], [0, 1]]
        m1 += m2;
        let q11 = p11 + 2.0 * p12 + p22 + sigma2;
        let q12 = p12 + p22;
        let q22 = p22;
        // update with H = [1, 0]
        let f = q11 + s[t] * s[t];
        let e = y[t] - m1;
        total += -0.5 * ((2.0 * std::f64::consts::PI * f).ln() + e * e / f);
        let (g1, g2) = (q11 / f, q12 / f);
        m1 += g1 * e;
        m2 += g2 * e;
        p11 = q11 - g1 * q11;
        p12 = q12 - g1 * q12;
        p22 = q22 - g2 * q12;
    }
    total
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}
