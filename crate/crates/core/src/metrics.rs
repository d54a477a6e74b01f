//! Predictive accuracy: one-step mean squared error against the smoothed
//! states, the Mahalanobis distance of the whole prediction vector, and a
//! driver that compares prior families on shared data.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::N_ORDERS;
use crate::inference::{self, FilterConfig, FilterState, InferenceError, PosteriorTrace};
use crate::ingest::ObservedSeries;
use crate::linalg::condition_number;
use crate::priors::{HyperParams, PriorFamily, WARMUP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no prediction records")]
    Empty,
    #[error("covariance is {rows}x{cols} for {n} records")]
    ShapeMismatch { rows: usize, cols: usize, n: usize },
    #[error("covariance is not positive definite (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("prior {family}, seed {seed}: {source}")]
    Inference {
        family: PriorFamily,
        seed: u64,
        #[source]
        source: InferenceError,
    },
    #[error("no prior families requested")]
    NoFamilies,
}

/// One-step prediction of `x_t` made at `t - 1`, with the smoothed state it
/// is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: usize,
    pub xhat: f64,
    pub pvar: f64,
    pub xtilde: f64,
}

impl PredictionRecord {
    pub fn error(&self) -> f64 {
        self.xhat - self.xtilde
    }
}

/// Pair the model-averaged predictions of a run with its smoothed path.
pub fn records_from_trace(trace: &PosteriorTrace) -> Vec<PredictionRecord> {
    trace
        .predictions
        .iter()
        .map(|p| PredictionRecord {
            t: p.t,
            xhat: p.mean,
            pvar: p.var,
            xtilde: trace.smoothed[p.t - 1],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub t: usize,
    /// Squared error at this time alone.
    pub sq_err: f64,
    /// Running mean of squared errors up to and including `t`.
    pub mse: f64,
}

pub fn mse_curve(records: &[PredictionRecord]) -> Vec<MsePoint> {
    let mut sum = 0.0;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let e2 = r.error().powi(2);
            sum += e2;
            MsePoint {
                t: r.t,
                sq_err: e2,
                mse: sum / (i + 1) as f64,
            }
        })
        .collect()
}

/// Covariance of the prediction errors used in the Mahalanobis distance.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    Identity,
    /// The one-step predictive variances on the diagonal.
    PredictiveDiagonal,
    Full(DMatrix<f64>),
}

/// How `compare_priors` and the CLI build the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DmCovMode {
    /// Predictive variances only (errors treated as uncorrelated).
    #[default]
    Diag,
    /// Predictive variances plus the smoothed-state posterior covariance
    /// from the final ancestral paths.
    Full,
}

/// `e^T S^{-1} e` with `e = xhat - xtilde` over the records.
pub fn mahalanobis(records: &[PredictionRecord], cov: &CovarianceSpec) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len();
    match cov {
        CovarianceSpec::Identity => Ok(records.iter().map(|r| r.error().powi(2)).sum()),
        CovarianceSpec::PredictiveDiagonal => {
            let mut total = 0.0;
            for r in records {
                if !(r.pvar > 0.0 && r.pvar.is_finite()) {
                    return Err(MetricsError::Singular { condition: f64::INFINITY });
                }
                total += r.error().powi(2) / r.pvar;
            }
            Ok(total)
        }
        CovarianceSpec::Full(s) => {
            if s.nrows() != n || s.ncols() != n {
                return Err(MetricsError::ShapeMismatch {
                    rows: s.nrows(),
                    cols: s.ncols(),
                    n,
                });
            }
            let e = DVector::from_iterator(n, records.iter().map(|r| r.error()));
            let chol = s.clone().cholesky().ok_or_else(|| MetricsError::Singular {
                condition: condition_number(s),
            })?;
            Ok(e.dot(&chol.solve(&e)))
        }
    }
}

/// Full-mode covariance for a finished run: diagonal predictive variances
/// plus the smoothed-path covariance over the prediction times.
pub fn full_covariance(state: &FilterState, records: &[PredictionRecord]) -> DMatrix<f64> {
    let first = records.first().map(|r| r.t - 1).unwrap_or(WARMUP);
    let mut s = state.smoothed_covariance(first..first + records.len());
    for (i, r) in records.iter().enumerate() {
        s[(i, i)] += r.pvar;
    }
    s
}

/// Output of one inference run inside a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: PriorFamily,
    pub seed: u64,
    pub dm: f64,
    pub mse: Vec<MsePoint>,
    pub final_posterior: [f64; N_ORDERS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: PriorFamily,
    pub dm_per_seed: Vec<f64>,
    pub dm_median: f64,
    /// Seed-averaged cumulative MSE, one entry per prediction time.
    pub mse_mean: Vec<f64>,
    /// `mse_mean` as a percentage of the baseline family's curve.
    pub mse_percent: Vec<f64>,
    pub final_posterior_mean: [f64; N_ORDERS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorComparison {
    pub baseline: PriorFamily,
    pub times: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
    pub cells: Vec<CellResult>,
}

impl PriorComparison {
    pub fn row(&self, family: PriorFamily) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.family == family)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Score one filter run.
pub fn evaluate_run(
    state: &FilterState,
    trace: &PosteriorTrace,
    mode: DmCovMode,
) -> Result<(f64, Vec<MsePoint>), MetricsError> {
    let records = records_from_trace(trace);
    let cov = match mode {
        DmCovMode::Diag => CovarianceSpec::PredictiveDiagonal,
        DmCovMode::Full => CovarianceSpec::Full(full_covariance(state, &records)),
    };
    Ok((mahalanobis(&records, &cov)?, mse_curve(&records)))
}

/// Run inference once per `(family, seed)` on shared data and tabulate the
/// Mahalanobis distance, MSE curves (normalized to the baseline family) and
/// final model posteriors. Rows follow the canonical family order, so the
/// result does not depend on the order `families` is given in. The baseline
/// is `Independent5` when present, else the first family in canonical order.
pub fn compare_priors(
    series: &ObservedSeries,
    families: &[PriorFamily],
    hyper: HyperParams,
    n_particles: usize,
    seeds: &[u64],
    mode: DmCovMode,
) -> Result<PriorComparison, MetricsError> {
    compare_priors_with(
        series,
        families,
        mode,
        |family, seed| {
            FilterConfig::new(family)
                .with_hyper(hyper)
                .with_particles(n_particles)
                .with_seed(seed)
        },
        seeds,
    )
}

/// `compare_priors` with a caller-supplied filter configuration per cell.
pub fn compare_priors_with<F>(
    series: &ObservedSeries,
    families: &[PriorFamily],
    mode: DmCovMode,
    make_config: F,
    seeds: &[u64],
) -> Result<PriorComparison, MetricsError>
where
    F: Fn(PriorFamily, u64) -> FilterConfig + Sync,
{
    let mut fams = families.to_vec();
    fams.sort_unstable();
    fams.dedup();
    if fams.is_empty() {
        return Err(MetricsError::NoFamilies);
    }
    let baseline = fams[0];

    let jobs: Vec<(PriorFamily, u64)> = fams
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&s| (f, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(family, seed)| {
            let tag = |source| MetricsError::Inference { family, seed, source };
            let (state, trace) = inference::run(series, make_config(family, seed)).map_err(tag)?;
            let (dm, mse) = evaluate_run(&state, &trace, mode)?;
            Ok(CellResult {
                family,
                seed,
                dm,
                mse,
                final_posterior: trace.final_posterior(),
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;

    let times: Vec<usize> = cells
        .first()
        .map(|c| c.mse.iter().map(|p| p.t).collect())
        .unwrap_or_default();
    let mut rows: Vec<ComparisonRow> = fams
        .iter()
        .map(|&family| {
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.family == family).collect();
            let ns = mine.len().max(1) as f64;
            let dm_per_seed: Vec<f64> = mine.iter().map(|c| c.dm).collect();
            let mse_mean: Vec<f64> = (0..times.len())
                .map(|i| mine.iter().map(|c| c.mse[i].mse).sum::<f64>() / ns)
                .collect();
            let mut post = [0.0; N_ORDERS];
            for c in &mine {
                for (p, q) in post.iter_mut().zip(c.final_posterior) {
                    *p += q / ns;
                }
            }
            ComparisonRow {
                family,
                dm_median: median(&dm_per_seed),
                dm_per_seed,
                mse_mean,
                mse_percent: Vec::new(),
                final_posterior_mean: post,
            }
        })
        .collect();

    let base = rows[0].mse_mean.clone();
    for row in &mut rows {
        row.mse_percent = row
            .mse_mean
            .iter()
            .zip(&base)
            .map(|(m, b)| if *b > 0.0 { m / b * 100.0 } else { 100.0 })
            .collect();
    }
    Ok(PriorComparison {
        baseline,
        times,
        rows,
        cells,
    })
}
