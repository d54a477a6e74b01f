//! Prior distributions over the dynamics coefficients, the innovation
//! variance and the warm-up states.
//!
//! The structured families keep the marginal law of the lag sum
//! `sum_{i>=1} b_i` at `N(0, sigma_b2)` for every order `k >= 1`, and tie `b_0`
//! to minus that sum (carrying capacity near zero on the centred scale) up to
//! an extra variance `h`. They are truncated to the stability set
//! `-2 < sum b_i < 0`, whose prior mass is then the same for every `k`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erf;
use thiserror::Error;

use crate::dynamics::MAX_ORDER;
use crate::linalg;

/// Upper bound on proposals in [`sample_b`].
pub const SAMPLE_BUDGET: u64 = 10_000_000;

/// Number of leading observations whose likelihood serves as the state prior.
pub const WARMUP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("model order {0} outside 0..={MAX_ORDER}")]
    InvalidOrder(usize),
    #[error("harmonic shrinkage weight needs k >= 1")]
    ShrinkageWeightDomain,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("vector of length {got} does not match prior dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is singular; density undefined")]
    SingularCovariance,
    #[error("rejection sampler exceeded {budget} proposals")]
    RejectionBudgetExceeded { budget: u64 },
    #[error("need {WARMUP} warm-up observations, got {0}")]
    InsufficientWarmup(usize),
    #[error("invalid warm-up observation sd {0}")]
    InvalidObservationSd(f64),
    #[error("unknown prior family '{0}'")]
    UnknownFamily(String),
}

/// The five coefficient priors, in the canonical comparison order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriorFamily {
    /// Independent N(0, 5) on every coefficient.
    Independent5,
    /// Independent N(0, 1) on every coefficient.
    Independent1,
    Correlated,
    Shrinkage1,
    /// Like `Shrinkage1` with variance decaying as `1/i` over the lags.
    Shrinkage2,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 5] = [
        PriorFamily::Independent5,
        PriorFamily::Independent1,
        PriorFamily::Correlated,
        PriorFamily::Shrinkage1,
        PriorFamily::Shrinkage2,
    ];

    /// Identifier used on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            PriorFamily::Independent5 => "indep5",
            PriorFamily::Independent1 => "indep1",
            PriorFamily::Correlated => "corr",
            PriorFamily::Shrinkage1 => "shrink1",
            PriorFamily::Shrinkage2 => "shrink2",
        }
    }

    /// Column label for comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            PriorFamily::Independent5 => "N(0,5)",
            PriorFamily::Independent1 => "N(0,1)",
            PriorFamily::Correlated => "Corr.",
            PriorFamily::Shrinkage1 => "Shrink.1",
            PriorFamily::Shrinkage2 => "Shrink.2",
        }
    }

    pub fn is_structured(self) -> bool {
        matches!(
            self,
            PriorFamily::Correlated | PriorFamily::Shrinkage1 | PriorFamily::Shrinkage2
        )
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PriorFamily {
    type Err = PriorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PriorFamily::ALL
            .into_iter()
            .find(|f| f.slug() == s)
            .ok_or_else(|| PriorError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Prior variance of the lag sum.
    pub sigma_b2: f64,
    /// Extra variance on `b_0`; also the whole `b_0` prior when `k = 0`.
    pub h: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            sigma_b2: 1.0,
            h: 0.04225,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), PriorError> {
        if !(self.sigma_b2.is_finite() && self.sigma_b2 > 0.0) {
            return Err(PriorError::InvalidHyper(format!("sigma_b2 = {}", self.sigma_b2)));
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(PriorError::InvalidHyper(format!("h = {}", self.h)));
        }
        Ok(())
    }
}

/// A zero-mean Gaussian over `b_0..=b_k`, optionally restricted to the
/// stability set.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub k: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub truncated: bool,
    /// Gaussian mass of the support; 1 when untruncated.
    pub trunc_mass: f64,
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        self.k + 1
    }

    /// Variance of `sum_{i>=1} b_i` under the untruncated Gaussian.
    pub fn lag_sum_variance(&self) -> f64 {
        let d = self.dim();
        let mut v = 0.0;
        for i in 1..d {
            for j in 1..d {
                v += self.cov[(i, j)];
            }
        }
        v
    }

    /// Gaussian probability of `-2 < sum b_i < 0`, whether or not the spec is
    /// truncated to it.
    pub fn stability_mass(&self) -> f64 {
        if self.k == 0 {
            return 1.0;
        }
        let sd = self.lag_sum_variance().sqrt();
        if sd == 0.0 {
            // point mass at zero sits on the open boundary
            return 0.0;
        }
        // P(0 < Z < 2/sd) without the cancellation in cdf(.) - 0.5
        0.5 * erf(2.0 / (sd * std::f64::consts::SQRT_2))
    }

    /// Whether `b` lies in the support of the prior.
    pub fn in_support(&self, b: &[f64]) -> bool {
        !self.truncated || in_stability_set(b)
    }
}

/// `-2 < sum_{i>=1} b_i < 0`; vacuous for `k = 0`.
pub fn in_stability_set(b: &[f64]) -> bool {
    if b.len() <= 1 {
        return true;
    }
    let s: f64 = b[1..].iter().sum();
    s > -2.0 && s < 0.0
}

/// `1 / sum_{j=1..k} 1/j`, so that variances `d/i` over the lags sum to one.
pub fn shrinkage_weight(k: usize) -> Result<f64, PriorError> {
    if k == 0 {
        return Err(PriorError::ShrinkageWeightDomain);
    }
    let harmonic: f64 = (1..=k).map(|j| 1.0 / j as f64).sum();
    Ok(1.0 / harmonic)
}

pub fn build_prior(family: PriorFamily, k: usize, hyper: HyperParams) -> Result<PriorSpec, PriorError> {
    if k > MAX_ORDER {
        return Err(PriorError::InvalidOrder(k));
    }
    hyper.validate()?;
    let d = k + 1;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let sb2 = hyper.sigma_b2;

    let truncated = match family {
        PriorFamily::Independent5 | PriorFamily::Independent1 => {
            let v = if family == PriorFamily::Independent5 { 5.0 } else { 1.0 };
            cov.fill_diagonal(v);
            false
        }
        _ if k == 0 => {
            cov[(0, 0)] = hyper.h;
            false
        }
        PriorFamily::Correlated | PriorFamily::Shrinkage1 => {
            let v = sb2 / k as f64;
            cov[(0, 0)] = sb2 + hyper.h;
            for i in 1..d {
                cov[(i, i)] = v;
                cov[(0, i)] = -v;
                cov[(i, 0)] = -v;
            }
            true
        }
        PriorFamily::Shrinkage2 => {
            let dw = shrinkage_weight(k)?;
            cov[(0, 0)] = sb2 + hyper.h;
            for i in 1..d {
                let v = sb2 * dw / i as f64;
                cov[(i, i)] = v;
                cov[(0, i)] = -v;
                cov[(i, 0)] = -v;
            }
            true
        }
    };

    let mut spec = PriorSpec {
        k,
        mean: DVector::zeros(d),
        cov,
        truncated,
        trunc_mass: 1.0,
    };
    if truncated {
        spec.trunc_mass = spec.stability_mass();
    }
    Ok(spec)
}

/// `n` draws from the (possibly truncated) prior, one per row.
pub fn sample_b(spec: &PriorSpec, n: usize, seed: u64) -> Result<DMatrix<f64>, PriorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = linalg::psd_factor(&spec.cov);
    let d = spec.dim();
    let mut out = DMatrix::<f64>::zeros(n, d);
    let mut proposals = 0u64;
    let mut z = DVector::<f64>::zeros(d);
    let mut row = 0;
    while row < n {
        if proposals >= SAMPLE_BUDGET {
            return Err(PriorError::RejectionBudgetExceeded { budget: SAMPLE_BUDGET });
        }
        proposals += 1;
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let b = &spec.mean + &l * &z;
        if spec.in_support(b.as_slice()) {
            out.row_mut(row).copy_from(&b.transpose());
            row += 1;
        }
    }
    Ok(out)
}

/// Log density of the prior, renormalized by the support mass when
/// truncated, and `-inf` outside the support.
pub fn log_prior_density(spec: &PriorSpec, b: &[f64]) -> Result<f64, PriorError> {
    let d = spec.dim();
    if b.len() != d {
        return Err(PriorError::DimensionMismatch { expected: d, got: b.len() });
    }
    if !spec.in_support(b) {
        return Ok(f64::NEG_INFINITY);
    }
    let chol = spec.cov.clone().cholesky().ok_or(PriorError::SingularCovariance)?;
    let diff = DVector::from_column_slice(b) - &spec.mean;
    let sol = chol.solve(&diff);
    let quad = diff.dot(&sol);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mut lp = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
    if spec.truncated {
        lp -= spec.trunc_mass.ln();
    }
    Ok(lp)
}

/// Shape/rate accumulator for the inverse-gamma law of the innovation
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaStats {
    pub shape: f64,
    pub rate: f64,
}

impl InvGammaStats {
    /// Conjugate update with one regression residual.
    pub fn update(&mut self, residual: f64) {
        self.shape += 0.5;
        self.rate += 0.5 * residual * residual;
    }

    /// Zero rate: the posterior collapses onto `sigma^2 = 0` (or is still the
    /// improper prior).
    pub fn is_degenerate(&self) -> bool {
        self.rate <= 0.0
    }

    pub fn is_proper(&self) -> bool {
        self.shape > 0.0 && self.rate > 0.0
    }
}

/// The improper `IG(0, 0)` starting point.
pub fn sigma2_prior_suffstats() -> InvGammaStats {
    InvGammaStats { shape: 0.0, rate: 0.0 }
}

/// Independent Gaussians on the first five latent states, centred on the
/// observations with the observation sd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStatePrior {
    pub mean: [f64; WARMUP],
    pub sd: [f64; WARMUP],
}

impl InitialStatePrior {
    /// Draw `x_1..x_5` in time order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; WARMUP] {
        let mut x = [0.0; WARMUP];
        for (i, xi) in x.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *xi = self.mean[i] + self.sd[i] * z;
        }
        x
    }
}

/// Uses the first [`WARMUP`] `(y_t, S_t)` pairs.
pub fn initial_state_prior(observations: &[(f64, f64)]) -> Result<InitialStatePrior, PriorError> {
    if observations.len() < WARMUP {
        return Err(PriorError::InsufficientWarmup(observations.len()));
    }
    let mut mean = [0.0; WARMUP];
    let mut sd = [0.0; WARMUP];
    for (i, &(y, s)) in observations[..WARMUP].iter().enumerate() {
        if !s.is_finite() || s < 0.0 {
            return Err(PriorError::InvalidObservationSd(s));
        }
        mean[i] = y;
        sd[i] = s;
    }
    Ok(InitialStatePrior { mean, sd })
}
