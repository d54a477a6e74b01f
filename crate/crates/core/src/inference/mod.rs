//! Sequential Monte Carlo over model orders `k = 0..=5`.
//!
//! One particle bank runs per order. Banks carry conjugate regression
//! statistics along each particle path and refresh `(b, sigma^2)` from them
//! every step, propagate states through the locally optimal Gaussian
//! proposal, and accumulate the log marginal likelihood of the
//! post-warm-up observations. The posterior over `k` is the prior times
//! the per-bank evidence, normalized.
//!
//! The first five observations enter only through the state prior, so every
//! bank's evidence starts at year six and the banks are comparable.

mod bank;
mod resample;
mod streams;

pub use bank::{cloud_prediction, Mat6, Particle, ParticleBank, SufficientStats, Vec6};
pub use resample::{effective_sample_size, systematic};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{MAX_ORDER, N_ORDERS};
use crate::ingest::ObservedSeries;
use crate::priors::{build_prior, initial_state_prior, HyperParams, PriorError, PriorFamily, WARMUP};

use bank::{BankFailure, BankSettings};

pub const MIN_PARTICLES: usize = 100;
pub const DEFAULT_PARTICLES: usize = 5000;
pub const DEFAULT_REJECTION_BUDGET: u32 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("series has {0} observations, need at least {min}", min = WARMUP + 1)]
    InsufficientWarmup(usize),
    #[error("need at least {MIN_PARTICLES} particles, got {0}")]
    InvalidParticleCount(usize),
    #[error("invalid observation at t = {t}: y = {y}, sd = {s}")]
    InvalidObservation { t: usize, y: f64, s: f64 },
    #[error("bank k = {k} diverged at t = {t}")]
    Diverged { k: usize, t: usize },
    #[error("bank k = {k}: truncation rejection budget exhausted at t = {t}")]
    RejectionBudgetExceeded { k: usize, t: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prior(#[from] PriorError),
}

impl InferenceError {
    fn from_bank(f: BankFailure, k: usize, t: usize) -> Self {
        match f {
            BankFailure::Diverged => InferenceError::Diverged { k, t },
            BankFailure::Starved => InferenceError::RejectionBudgetExceeded { k, t },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub family: PriorFamily,
    pub hyper: HyperParams,
    pub n_particles: usize,
    pub seed: u64,
    /// Orders to run; the others get zero posterior mass.
    pub orders: Vec<usize>,
    /// Prior over `k = 0..=5`.
    pub model_prior: [f64; N_ORDERS],
    /// Hold `sigma^2` at this value instead of learning it.
    pub fixed_sigma2: Option<f64>,
    pub gibbs_sweeps: usize,
    pub rejection_budget: u32,
    /// Resample when ESS falls below this fraction of the particle count.
    pub ess_threshold: f64,
}

impl FilterConfig {
    pub fn new(family: PriorFamily) -> Self {
        Self {
            family,
            hyper: HyperParams::default(),
            n_particles: DEFAULT_PARTICLES,
            seed: 0,
            orders: (0..=MAX_ORDER).collect(),
            model_prior: [1.0 / N_ORDERS as f64; N_ORDERS],
            fixed_sigma2: None,
            gibbs_sweeps: 1,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
            ess_threshold: 0.5,
        }
    }

    pub fn with_particles(mut self, n: usize) -> Self {
        self.n_particles = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hyper(mut self, hyper: HyperParams) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn with_orders(mut self, orders: impl IntoIterator<Item = usize>) -> Self {
        self.orders = orders.into_iter().collect();
        self
    }

    pub fn with_fixed_sigma2(mut self, sigma2: f64) -> Self {
        self.fixed_sigma2 = Some(sigma2);
        self
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.n_particles < MIN_PARTICLES {
            return Err(InferenceError::InvalidParticleCount(self.n_particles));
        }
        self.hyper.validate()?;
        if self.orders.is_empty() {
            return Err(InferenceError::Config("no model orders selected".into()));
        }
        let mut seen = [false; N_ORDERS];
        for &k in &self.orders {
            if k > MAX_ORDER {
                return Err(PriorError::InvalidOrder(k).into());
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(InferenceError::Config(format!("order {k} listed twice")));
            }
        }
        if self.model_prior.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || self.orders.iter().all(|&k| self.model_prior[k] == 0.0)
        {
            return Err(InferenceError::Config("model prior must be non-negative with mass on a selected order".into()));
        }
        if let Some(s2) = self.fixed_sigma2 {
            if !(s2.is_finite() && s2 > 0.0) {
                return Err(InferenceError::Config(format!("fixed sigma^2 must be positive, got {s2}")));
            }
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(InferenceError::Config(format!("ESS threshold {} outside [0, 1]", self.ess_threshold)));
        }
        Ok(())
    }
}

/// Softmax of `log prior + log evidence`, shifted by the maximum. Orders with
/// `-inf` evidence or zero prior get zero mass.
pub fn posterior_from_log_evidence(prior: &[f64; N_ORDERS], log_evidence: &[f64; N_ORDERS]) -> [f64; N_ORDERS] {
    let mut logp = [f64::NEG_INFINITY; N_ORDERS];
    for k in 0..N_ORDERS {
        if prior[k] > 0.0 {
            logp[k] = prior[k].ln() + log_evidence[k];
        }
    }
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_ORDERS];
    if max == f64::NEG_INFINITY {
        return out;
    }
    let mut total = 0.0;
    for k in 0..N_ORDERS {
        out[k] = (logp[k] - max).exp();
        total += out[k];
    }
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// One-step predictive moments of `x_t` given data to `t - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepPrediction {
    pub t: usize,
    /// `(mean, variance)` per order; `None` for orders not run.
    pub per_model: [Option<(f64, f64)>; N_ORDERS],
    pub mean: f64,
    pub var: f64,
}

/// Mean and variance of a finite Gaussian mixture (not a moment-matched
/// collapse of the components' variances).
pub fn mixture_moments(components: &[(f64, f64, f64)]) -> (f64, f64) {
    let total: f64 = components.iter().map(|c| c.0).sum();
    let mean = components.iter().map(|(w, m, _)| w * m).sum::<f64>() / total;
    let second = components.iter().map(|(w, m, v)| w * (v + m * m)).sum::<f64>() / total;
    (mean, (second - mean * mean).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    /// Log predictive density increment of each bank (`-inf` if not run).
    pub log_pred: [f64; N_ORDERS],
    pub prediction: OneStepPrediction,
    pub posterior: [f64; N_ORDERS],
}

#[derive(Debug, Clone)]
pub struct FilterState {
    config: FilterConfig,
    banks: Vec<ParticleBank>,
    t: usize,
}

impl FilterState {
    /// Build banks from the first five observations. Uses only `series[..5]`.
    pub fn init(series: &ObservedSeries, config: FilterConfig) -> Result<Self, InferenceError> {
        config.validate()?;
        if series.len() <= WARMUP {
            return Err(InferenceError::InsufficientWarmup(series.len()));
        }
        for (i, (&y, &s)) in series.y.iter().zip(&series.s).enumerate() {
            if !y.is_finite() || !(s.is_finite() && s > 0.0) {
                return Err(InferenceError::InvalidObservation { t: i + 1, y, s });
            }
        }
        let warm_obs = series.pairs();
        let init = initial_state_prior(&warm_obs)?;
        let sigma2_init = sigma2_warm_start(&series.y[..WARMUP]);
        let settings = BankSettings {
            seed: config.seed,
            n_particles: config.n_particles,
            fixed_sigma2: config.fixed_sigma2,
            gibbs_sweeps: config.gibbs_sweeps,
            rejection_budget: config.rejection_budget,
            ess_threshold: config.ess_threshold,
        };
        let mut orders = config.orders.clone();
        orders.sort_unstable();
        let banks = orders
            .iter()
            .map(|&k| {
                let prior = build_prior(config.family, k, config.hyper)?;
                ParticleBank::new(prior, &init, sigma2_init, settings)
                    .map_err(|f| InferenceError::from_bank(f, k, WARMUP))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config,
            banks,
            t: WARMUP,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Time index of the last assimilated observation (1-based).
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn banks(&self) -> &[ParticleBank] {
        &self.banks
    }

    pub fn bank(&self, k: usize) -> Option<&ParticleBank> {
        self.banks.iter().find(|b| b.k() == k)
    }

    pub fn log_evidence(&self) -> [f64; N_ORDERS] {
        let mut out = [f64::NEG_INFINITY; N_ORDERS];
        for b in &self.banks {
            out[b.k()] = b.log_evidence();
        }
        out
    }

    pub fn model_posterior(&self) -> [f64; N_ORDERS] {
        posterior_from_log_evidence(&self.config.model_prior, &self.log_evidence())
    }

    /// Predictive moments of the next latent state, per order and averaged
    /// over orders under the current model posterior.
    pub fn predict_one_step(&self) -> OneStepPrediction {
        let post = self.model_posterior();
        let mut per_model = [None; N_ORDERS];
        let mut comps = Vec::with_capacity(self.banks.len());
        for b in &self.banks {
            let (m, v) = b.prediction();
            per_model[b.k()] = Some((m, v));
            if post[b.k()] > 0.0 {
                comps.push((post[b.k()], m, v));
            }
        }
        let (mean, var) = mixture_moments(&comps);
        OneStepPrediction {
            t: self.t + 1,
            per_model,
            mean,
            var,
        }
    }

    /// Assimilate the next observation.
    pub fn assimilate(&mut self, y: f64, s: f64) -> Result<StepReport, InferenceError> {
        let t = self.t + 1;
        if !y.is_finite() || !(s.is_finite() && s > 0.0) {
            return Err(InferenceError::InvalidObservation { t, y, s });
        }
        let prediction = self.predict_one_step();
        let mut log_pred = [f64::NEG_INFINITY; N_ORDERS];
        for b in &mut self.banks {
            let k = b.k();
            log_pred[k] = b.assimilate(t, y, s).map_err(|f| InferenceError::from_bank(f, k, t))?;
        }
        self.t = t;
        Ok(StepReport {
            t,
            log_pred,
            prediction,
            posterior: self.model_posterior(),
        })
    }

    /// Posterior-weighted mean of every bank's ancestral paths, `x~_1..x~_t`.
    pub fn smoothed_path(&self) -> Vec<f64> {
        let post = self.model_posterior();
        let mut out = vec![0.0; self.t];
        for b in &self.banks {
            let w = post[b.k()];
            if w == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(b.smoothed_path()) {
                *o += w * x;
            }
        }
        out
    }

    /// Posterior covariance of the smoothed states over 0-based `range`,
    /// mixed across orders.
    pub fn smoothed_covariance(&self, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let post = self.model_posterior();
        let m = range.len();
        let mut second = DMatrix::<f64>::zeros(m, m);
        let mut mean = nalgebra::DVector::<f64>::zeros(m);
        for b in &self.banks {
            let w = post[b.k()];
            if w == 0.0 {
                continue;
            }
            let (mu, cov) = b.path_moments(range.clone());
            let mu = nalgebra::DVector::from_vec(mu);
            second += (cov + &mu * mu.transpose()) * w;
            mean += mu * w;
        }
        second - &mean * mean.transpose()
    }
}

/// Inverse-gamma prior for `sigma^2`, with the shape/rate a driftless random
/// walk through the warm-up observations would give. Shared by every bank.
/// It stays in each particle's conditional, so the variance draw remains
/// proper while a bank has fewer transitions than coefficients.
fn sigma2_warm_start(warm: &[f64]) -> (f64, f64) {
    let ss: f64 = warm.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let n = (warm.len() - 1) as f64;
    (0.5 * n, (0.5 * ss).max(1e-8))
}

/// Per-time record of a full filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTrace {
    /// Time index of each posterior row; starts at 5 (the prior row).
    pub times: Vec<usize>,
    pub posterior: Vec<[f64; N_ORDERS]>,
    pub log_evidence: Vec<[f64; N_ORDERS]>,
    /// One-step predictions for `t = 6..=T`.
    pub predictions: Vec<OneStepPrediction>,
    /// Smoothed states `x~_1..x~_T` from the final particle set.
    pub smoothed: Vec<f64>,
}

impl PosteriorTrace {
    pub fn final_posterior(&self) -> [f64; N_ORDERS] {
        *self.posterior.last().expect("trace has the prior row")
    }

    /// Posterior row at time `t`, if recorded.
    pub fn posterior_at(&self, t: usize) -> Option<[f64; N_ORDERS]> {
        self.times.iter().position(|&u| u == t).map(|i| self.posterior[i])
    }
}

/// Run the filter across the whole series.
pub fn run(series: &ObservedSeries, config: FilterConfig) -> Result<(FilterState, PosteriorTrace), InferenceError> {
    run_until(series, config, series.len())
}

/// Run the filter over the first `horizon` observations.
pub fn run_until(
    series: &ObservedSeries,
    config: FilterConfig,
    horizon: usize,
) -> Result<(FilterState, PosteriorTrace), InferenceError> {
    let horizon = horizon.min(series.len());
    let mut state = FilterState::init(series, config)?;
    let mut trace = PosteriorTrace {
        times: vec![state.t()],
        posterior: vec![state.model_posterior()],
        log_evidence: vec![state.log_evidence()],
        predictions: Vec::with_capacity(horizon.saturating_sub(WARMUP)),
        smoothed: Vec::new(),
    };
    for i in WARMUP..horizon {
        let rep = state.assimilate(series.y[i], series.s[i])?;
        trace.times.push(rep.t);
        trace.posterior.push(rep.posterior);
        trace.log_evidence.push(state.log_evidence());
        trace.predictions.push(rep.prediction);
    }
    trace.smoothed = state.smoothed_path();
    Ok((state, trace))
}
