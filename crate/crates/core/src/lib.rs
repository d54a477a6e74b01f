//! Bayesian inference for density dependence in population time series.
//!
//! * [`dynamics`]: the lagged log-scale update, its observation law, carrying
//!   capacity and stability classes, and a seeded simulator.
//! * [`priors`]: the five coefficient prior families, truncation to the
//!   stability set, and the variance / warm-up state priors.
//! * [`inference`]: per-order particle banks with parameter learning, giving
//!   the evolving posterior over the order `k`.
//! * [`metrics`]: one-step MSE curves, Mahalanobis distance, prior comparison.
//! * [`ingest`]: survey CSV loading, log transform and centering.
//! * [`cli`]: the `simulate`, `fit` and `compare-priors` workflows.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod dynamics;
pub mod inference;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod priors;

pub use dynamics::{DynamicsParams, Regime, Trajectory};
pub use inference::{FilterConfig, FilterState, PosteriorTrace};
pub use ingest::{ObservedSeries, RawSeries};
pub use priors::{HyperParams, PriorFamily, PriorSpec};
