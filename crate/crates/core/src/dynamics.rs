//! The generative model: a lagged Ricker-type update on the log scale,
//!
//! ```text
//! x_t = x_{t-1} + b_0 + sum_{i=1..k} b_i exp(x_{t-i}) + eps_t,   eps_t ~ N(0, sigma^2)
//! y_t ~ N(x_t, S_t^2)
//! ```
//!
//! observed through Gaussian noise with a known, per-year standard deviation.
//! Lag windows are always ordered most-recent-first: `history[0]` is `x_{t-1}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported density-dependence order.
pub const MAX_ORDER: usize = 5;

/// Number of orders considered, `0..=MAX_ORDER`.
pub const N_ORDERS: usize = MAX_ORDER + 1;

/// Latent states beyond this magnitude are treated as a divergent trajectory.
pub const DIVERGENCE_BOUND: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("model order {0} outside 0..={MAX_ORDER}")]
    InvalidOrder(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("innovation variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
    #[error("lag window has length {got}, need at least {needed}")]
    ShortHistory { needed: usize, got: usize },
    #[error("trajectory diverged at index {index} (|x| = {value})")]
    Diverged { index: usize, value: f64 },
    #[error("the null model (k = 0) has no carrying capacity")]
    CapacityUndefinedForNull,
    #[error("invalid simulation setup: {0}")]
    InvalidSetup(String),
}

/// Parameters of the density-dependence law for one model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    k: usize,
    b: Vec<f64>,
    sigma2: f64,
}

impl DynamicsParams {
    /// `b` holds `b_0..=b_k`. A zero variance gives the deterministic skeleton.
    pub fn new(k: usize, b: Vec<f64>, sigma2: f64) -> Result<Self, DynamicsError> {
        check_shape(&b, k)?;
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(DynamicsError::InvalidVariance(sigma2));
        }
        Ok(Self { k, b, sigma2 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Length of the lag window the update consumes.
    pub fn window(&self) -> usize {
        self.k.max(1)
    }
}

fn check_shape(b: &[f64], k: usize) -> Result<(), DynamicsError> {
    if k > MAX_ORDER {
        return Err(DynamicsError::InvalidOrder(k));
    }
    if b.len() != k + 1 {
        return Err(DynamicsError::CoefficientLength {
            expected: k + 1,
            got: b.len(),
        });
    }
    Ok(())
}

/// A simulated or observed path. Index 0 corresponds to time `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: i64,
    pub latent: Vec<f64>,
    pub observed: Vec<f64>,
    pub obs_sd: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.latent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latent.is_empty()
    }
}

/// Qualitative behaviour of the deterministic skeleton after a small
/// perturbation away from carrying capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Unstable,
    MonotoneReturn,
    DampedOscillation,
    SustainedOrUnbounded,
    NullModel,
}

/// Deterministic part of the update: `x_{t-1} + b_0 + sum b_i exp(x_{t-i})`.
///
/// Callers must have checked the window length.
#[inline]
pub(crate) fn transition_mean(history: &[f64], b: &[f64]) -> f64 {
    let mut m = history[0] + b[0];
    for (bi, x) in b[1..].iter().zip(history) {
        m += bi * x.exp();
    }
    m
}

/// One step of the stochastic update with a realized innovation.
pub fn step(history: &[f64], params: &DynamicsParams, innovation: f64) -> Result<f64, DynamicsError> {
    let need = params.window();
    if history.len() < need {
        return Err(DynamicsError::ShortHistory {
            needed: need,
            got: history.len(),
        });
    }
    if let Some(&x) = history[..need].iter().find(|x| !x.is_finite() || x.abs() > DIVERGENCE_BOUND) {
        return Err(DynamicsError::Diverged { index: 0, value: x.abs() });
    }
    Ok(transition_mean(history, &params.b) + innovation)
}

/// Simulate `horizon` years. `init` is a most-recent-first lag window of at
/// least `max(k, 1)` states; it occupies the first `init.len()` entries of the
/// latent path (oldest first). Every year, including the initial ones, is
/// observed with the matching entry of `obs_sd`.
pub fn simulate(
    params: &DynamicsParams,
    init: &[f64],
    horizon: usize,
    obs_sd: &[f64],
    seed: u64,
) -> Result<Trajectory, DynamicsError> {
    let w = params.window();
    if horizon == 0 {
        return Err(DynamicsError::InvalidSetup("horizon must be at least 1".into()));
    }
    if init.len() < w {
        return Err(DynamicsError::ShortHistory {
            needed: w,
            got: init.len(),
        });
    }
    if obs_sd.len() != horizon {
        return Err(DynamicsError::InvalidSetup(format!(
            "obs_sd has {} entries for horizon {horizon}",
            obs_sd.len()
        )));
    }
    if let Some(s) = obs_sd.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(DynamicsError::InvalidSetup(format!("invalid observation sd {s}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov = Normal::new(0.0, params.sigma2.sqrt()).expect("variance validated");

    let mut latent: Vec<f64> = init.iter().rev().copied().collect();
    latent.truncate(horizon);
    for (i, x) in latent.iter().enumerate() {
        if !x.is_finite() || x.abs() > DIVERGENCE_BOUND {
            return Err(DynamicsError::Diverged { index: i, value: x.abs() });
        }
    }
    // most-recent-first working window
    let mut window: Vec<f64> = init[..w].to_vec();
    while latent.len() < horizon {
        let eps = innov.sample(&mut rng);
        let x = transition_mean(&window, &params.b) + eps;
        if !x.is_finite() || x.abs() > DIVERGENCE_BOUND {
            return Err(DynamicsError::Diverged {
                index: latent.len(),
                value: x.abs(),
            });
        }
        window.rotate_right(1);
        window[0] = x;
        latent.push(x);
    }

    let observed = latent
        .iter()
        .zip(obs_sd)
        .map(|(x, s)| {
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            x + s * z
        })
        .collect::<Vec<f64>>();

    Ok(Trajectory {
        t0: 1,
        latent,
        observed,
        obs_sd: obs_sd.to_vec(),
    })
}

/// `log(-b_0 / sum b_i)` when `b_0` and the lag sum have strictly opposite
/// signs, `None` otherwise.
pub fn carrying_capacity(b: &[f64], k: usize) -> Result<Option<f64>, DynamicsError> {
    check_shape(b, k)?;
    if k == 0 {
        return Err(DynamicsError::CapacityUndefinedForNull);
    }
    let lag_sum: f64 = b[1..].iter().sum();
    let b0 = b[0];
    if (b0 > 0.0 && lag_sum < 0.0) || (b0 < 0.0 && lag_sum > 0.0) {
        Ok(Some((-b0 / lag_sum).ln()))
    } else {
        Ok(None)
    }
}

/// Classify by the lag sum `s`. Boundaries go to the more oscillatory side:
/// `s = 0` is unstable, `s = -1` damped, `s = -2` sustained.
pub fn classify_stability(b: &[f64], k: usize) -> Result<Regime, DynamicsError> {
    check_shape(b, k)?;
    if k == 0 {
        return Ok(Regime::NullModel);
    }
    let s: f64 = b[1..].iter().sum();
    Ok(if s >= 0.0 {
        Regime::Unstable
    } else if s > -1.0 {
        Regime::MonotoneReturn
    } else if s > -2.0 {
        Regime::DampedOscillation
    } else {
        Regime::SustainedOrUnbounded
    })
}
