//! A particle bank for one model order.
//!
//! Each particle carries a five-state lag window, regression sufficient
//! statistics for the path it descends from, and a current draw of
//! `(b, sigma^2)` from the parameter posterior given those statistics.
//!
//! The coefficient prior `N(0, Sigma_0)` is handled in whitened coordinates
//! `b = L u` with `L L^T = Sigma_0`, which also covers rank-deficient priors.
//! All vectors are padded to `MAX_ORDER + 1` entries; coordinates past `k`
//! stay zero.

use nalgebra::{DMatrix, SMatrix, SVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{DIVERGENCE_BOUND, N_ORDERS};
use crate::linalg::psd_factor;
use crate::priors::{in_stability_set, InitialStatePrior, PriorSpec, WARMUP};

use super::resample::{effective_sample_size, systematic};
use super::streams::{self, PHASE_INIT, PHASE_PARAMS, PHASE_PROPAGATE, PHASE_RESAMPLE};

pub type Vec6 = SVector<f64, N_ORDERS>;
pub type Mat6 = SMatrix<f64, N_ORDERS, N_ORDERS>;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Regression accumulators for the transitions along one particle's path:
/// response `x_t - x_{t-1}`, regressors `(1, e^{x_{t-1}}, .., e^{x_{t-k}})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub xtx: Mat6,
    pub xty: Vec6,
    pub yty: f64,
    pub n: u32,
}

impl Default for SufficientStats {
    fn default() -> Self {
        Self {
            xtx: Mat6::zeros(),
            xty: Vec6::zeros(),
            yty: 0.0,
            n: 0,
        }
    }
}

impl SufficientStats {
    pub fn assimilate(&mut self, z: &Vec6, response: f64) {
        self.xtx.ger(1.0, z, z, 1.0);
        self.xty.axpy(response, z, 1.0);
        self.yty += response * response;
        self.n += 1;
    }

    /// Residual sum of squares of the regression at coefficients `b`.
    pub fn residual_ss(&self, b: &Vec6) -> f64 {
        self.yty - 2.0 * b.dot(&self.xty) + b.dot(&(self.xtx * b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    /// `x_{t-1}, .., x_{t-5}`.
    pub lagwin: [f64; WARMUP],
    pub stats: SufficientStats,
    pub b: Vec6,
    pub sigma2: f64,
}

impl Particle {
    pub fn regressors(&self, k: usize) -> Vec6 {
        let mut z = Vec6::zeros();
        z[0] = 1.0;
        for i in 1..=k {
            z[i] = self.lagwin[i - 1].exp();
        }
        z
    }

    /// Mean of `x_t` given the lag window and current coefficients.
    pub fn transition_mean(&self, k: usize) -> f64 {
        self.lagwin[0] + self.regressors(k).dot(&self.b)
    }
}

/// Weighted one-step predictive moments of a particle cloud: the mixture of
/// `N(m_i, sigma2_i)` under the weights.
pub fn cloud_prediction(k: usize, particles: &[Particle], weights: &[f64]) -> (f64, f64) {
    let means: Vec<f64> = particles.iter().map(|p| p.transition_mean(k)).collect();
    let mean: f64 = means.iter().zip(weights).map(|(m, w)| w * m).sum();
    let var: f64 = particles
        .iter()
        .zip(&means)
        .zip(weights)
        .map(|((p, m), w)| w * (p.sigma2 + (m - mean) * (m - mean)))
        .sum();
    (mean, var)
}

/// Settings shared by every bank of a run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BankSettings {
    pub seed: u64,
    pub n_particles: usize,
    pub fixed_sigma2: Option<f64>,
    pub gibbs_sweeps: usize,
    pub rejection_budget: u32,
    pub ess_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BankFailure {
    Diverged,
    Starved,
}

#[derive(Debug, Clone)]
pub struct ParticleBank {
    k: usize,
    prior: PriorSpec,
    factor: Mat6,
    /// Inverse-gamma `(shape, rate)` prior on `sigma^2`.
    sigma2_prior: (f64, f64),
    settings: BankSettings,
    particles: Vec<Particle>,
    weights: Vec<f64>,
    log_evidence: f64,
    /// Latent state of every particle at every time, in the particle order
    /// that held after that time's resampling.
    states: Vec<Vec<f64>>,
    /// Parent indices into the previous time's ordering; `None` when no
    /// resampling took place.
    parents: Vec<Option<Vec<u32>>>,
    resample_count: usize,
}

impl ParticleBank {
    pub(crate) fn new(
        prior: PriorSpec,
        init: &InitialStatePrior,
        sigma2_init: (f64, f64),
        settings: BankSettings,
    ) -> Result<Self, BankFailure> {
        let k = prior.k;
        let l = psd_factor(&prior.cov);
        let mut factor = Mat6::zeros();
        factor.view_mut((0, 0), (k + 1, k + 1)).copy_from(&l);

        let n = settings.n_particles;
        let (shape, rate) = sigma2_init;
        let warm = Gamma::new(shape, 1.0).expect("positive warm-start shape");

        let mut bank = Self {
            k,
            prior,
            factor,
            sigma2_prior: sigma2_init,
            settings,
            particles: Vec::with_capacity(n),
            weights: vec![1.0 / n as f64; n],
            log_evidence: 0.0,
            states: (0..WARMUP).map(|_| Vec::with_capacity(n)).collect(),
            parents: vec![None; WARMUP],
            resample_count: 0,
        };

        let drawn: Vec<Result<Particle, BankFailure>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams::stream(settings.seed, k, WARMUP, PHASE_INIT, i);
                let x = init.sample(&mut rng);
                let mut lagwin = x;
                lagwin.reverse();
                let g: f64 = warm.sample(&mut rng);
                let mut p = Particle {
                    lagwin,
                    stats: SufficientStats::default(),
                    b: Vec6::zeros(),
                    sigma2: settings.fixed_sigma2.unwrap_or(rate / g),
                };
                bank.draw_params(&mut p, &mut rng)?;
                Ok(p)
            })
            .collect();
        for p in drawn {
            bank.particles.push(p?);
        }
        for (ti, col) in bank.states.iter_mut().enumerate() {
            col.extend(bank.particles.iter().map(|p| p.lagwin[WARMUP - 1 - ti]));
        }
        Ok(bank)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    pub fn resample_count(&self) -> usize {
        self.resample_count
    }

    pub fn prediction(&self) -> (f64, f64) {
        cloud_prediction(self.k, &self.particles, &self.weights)
    }

    /// Gibbs sweep(s) over `b | sigma^2` and `sigma^2 | b` given the
    /// particle's statistics. `b` respects the prior support by rejection.
    fn draw_params<R: Rng + ?Sized>(&self, p: &mut Particle, rng: &mut R) -> Result<(), BankFailure> {
        let k = self.k;
        let lt = self.factor.transpose();
        for _ in 0..self.settings.gibbs_sweeps.max(1) {
            let prec = p.sigma2.max(1e-300).recip();
            let a = Mat6::identity() + lt * p.stats.xtx * self.factor * prec;
            let rhs = lt * p.stats.xty * prec;
            let chol = a.cholesky().ok_or(BankFailure::Diverged)?;
            let mean = chol.solve(&rhs);
            let l = chol.l();

            let mut tries = 0u32;
            let b = loop {
                if tries >= self.settings.rejection_budget {
                    return Err(BankFailure::Starved);
                }
                tries += 1;
                let eps = Vec6::from_fn(|_, _| rng.sample(StandardNormal));
                let u = mean + l.tr_solve_lower_triangular(&eps).ok_or(BankFailure::Diverged)?;
                let b = self.factor * u;
                if !self.prior.truncated || in_stability_set(&b.as_slice()[..=k]) {
                    break b;
                }
            };
            p.b = b;

            if let Some(s2) = self.settings.fixed_sigma2 {
                p.sigma2 = s2;
            } else {
                let (a0, r0) = self.sigma2_prior;
                let shape = a0 + 0.5 * p.stats.n as f64;
                let rate = r0 + 0.5 * p.stats.residual_ss(&b).max(0.0);
                let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
                p.sigma2 = (rate / g).max(1e-300);
            }
        }
        Ok(())
    }

    /// Assimilate observation `y` with sd `s` at 1-based time `t`. Returns the
    /// log predictive density increment.
    pub(crate) fn assimilate(&mut self, t: usize, y: f64, s: f64) -> Result<f64, BankFailure> {
        let k = self.k;
        let seed = self.settings.seed;
        let s2 = s * s;

        // propagate through the locally optimal proposal
        let moves: Vec<(f64, f64)> = self
            .particles
            .par_iter_mut()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = streams::stream(seed, k, t, PHASE_PROPAGATE, i);
                let z = p.regressors(k);
                let m = p.lagwin[0] + z.dot(&p.b);
                if !m.is_finite() {
                    return (f64::NEG_INFINITY, p.lagwin[0]);
                }
                let v = (p.sigma2 + s2).max(1e-300);
                let resid = y - m;
                let log_inc = -0.5 * (LN_2PI + v.ln() + resid * resid / v);
                let gain = p.sigma2 / v;
                let sd = (p.sigma2 * s2 / v).sqrt();
                let eps: f64 = rng.sample(StandardNormal);
                let x = m + gain * resid + sd * eps;
                if !x.is_finite() || x.abs() > DIVERGENCE_BOUND {
                    return (f64::NEG_INFINITY, p.lagwin[0]);
                }
                p.stats.assimilate(&z, x - p.lagwin[0]);
                p.lagwin.rotate_right(1);
                p.lagwin[0] = x;
                (log_inc, x)
            })
            .collect();

        let max = moves
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|((l, _), _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(BankFailure::Diverged);
        }
        let mut total = 0.0;
        for (w, (l, _)) in self.weights.iter_mut().zip(&moves) {
            *w *= (l - max).exp();
            total += *w;
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        let increment = max + total.ln();
        self.log_evidence += increment;

        let n = self.particles.len();
        let xs: Vec<f64> = moves.iter().map(|(_, x)| *x).collect();
        if effective_sample_size(&self.weights) < self.settings.ess_threshold * n as f64 {
            let mut rng = streams::stream(seed, k, t, PHASE_RESAMPLE, 0);
            let idx = systematic(&self.weights, &mut rng);
            self.particles = idx.iter().map(|&i| self.particles[i].clone()).collect();
            self.weights.fill(1.0 / n as f64);
            self.states.push(idx.iter().map(|&i| xs[i]).collect());
            self.parents.push(Some(idx.iter().map(|&i| i as u32).collect()));
            self.resample_count += 1;
        } else {
            self.states.push(xs);
            self.parents.push(None);
        }

        // refresh parameters against the updated statistics
        let this = &*self;
        let refreshed: Result<Vec<Particle>, BankFailure> = this
            .particles
            .par_iter()
            .enumerate()
            .map(|(j, p)| {
                let mut rng = streams::stream(seed, k, t, PHASE_PARAMS, j);
                let mut q = p.clone();
                this.draw_params(&mut q, &mut rng)?;
                Ok(q)
            })
            .collect();
        self.particles = refreshed?;
        Ok(increment)
    }

    /// Number of stored time points.
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// Ancestral paths of the current particles, one row per particle.
    pub fn ancestral_paths(&self) -> DMatrix<f64> {
        let n = self.particles.len();
        let t_len = self.states.len();
        let mut paths = DMatrix::<f64>::zeros(n, t_len);
        for j in 0..n {
            let mut idx = j;
            for ti in (0..t_len).rev() {
                paths[(j, ti)] = self.states[ti][idx];
                if let Some(par) = &self.parents[ti] {
                    idx = par[idx] as usize;
                }
            }
        }
        paths
    }

    /// Weighted mean of the ancestral paths.
    pub fn smoothed_path(&self) -> Vec<f64> {
        let t_len = self.states.len();
        let mut acc = vec![0.0; t_len];
        for (j, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let mut idx = j;
            for ti in (0..t_len).rev() {
                acc[ti] += w * self.states[ti][idx];
                if let Some(par) = &self.parents[ti] {
                    idx = par[idx] as usize;
                }
            }
        }
        acc
    }

    /// Weighted mean and covariance of the ancestral paths over `range`.
    pub fn path_moments(&self, range: std::ops::Range<usize>) -> (Vec<f64>, DMatrix<f64>) {
        let paths = self.ancestral_paths();
        let m = range.len();
        let sub = paths.columns(range.start, m);
        let mut mean = vec![0.0; m];
        for (j, w) in self.weights.iter().enumerate() {
            for c in 0..m {
                mean[c] += w * sub[(j, c)];
            }
        }
        let mut centred = DMatrix::<f64>::zeros(self.particles.len(), m);
        for (j, w) in self.weights.iter().enumerate() {
            let sw = w.sqrt();
            for c in 0..m {
                centred[(j, c)] = sw * (sub[(j, c)] - mean[c]);
            }
        }
        let cov = centred.transpose() * &centred;
        (mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn particle(x: f64, b0: f64, b1: f64, sigma2: f64) -> Particle {
        let mut b = Vec6::zeros();
        b[0] = b0;
        b[1] = b1;
        Particle {
            lagwin: [x; WARMUP],
            stats: SufficientStats::default(),
            b,
            sigma2,
        }
    }

    #[test]
    fn degenerate_cloud_at_capacity() {
        let ps = vec![particle(0.0, 0.5, -0.5, 0.01); 10];
        let (m, v) = cloud_prediction(1, &ps, &[0.1; 10]);
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn cloud_spread_adds_to_variance() {
        let ps = vec![particle(0.0, 0.0, 0.0, 0.5), particle(1.0, 0.0, 0.0, 0.5)];
        let (m, v) = cloud_prediction(1, &ps, &[0.5, 0.5]);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn stats_accumulate_regression_terms() {
        let mut s = SufficientStats::default();
        let z1 = Vec6::from_column_slice(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let z2 = Vec6::from_column_slice(&[1.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        s.assimilate(&z1, 0.3);
        s.assimilate(&z2, -0.1);
        assert_eq!(s.n, 2);
        assert_abs_diff_eq!(s.xtx[(0, 1)], 2.5, epsilon = 1e-15);
        assert_eq!(s.xtx, s.xtx.transpose());
        let b = Vec6::from_column_slice(&[0.1, 0.2, 0.0, 0.0, 0.0, 0.0]);
        let direct = (0.3 - 0.5f64).powi(2) + (-0.1 - 0.2f64).powi(2);
        assert_abs_diff_eq!(s.residual_ss(&b), direct, epsilon = 1e-14);
    }
}
