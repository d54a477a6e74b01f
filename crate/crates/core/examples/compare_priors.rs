//! Compare the five prior families on one simulated series: Mahalanobis
//! distance and MSE relative to the N(0,5) prior.
//!
//! cargo run --release --example compare_priors

use densdep::dynamics::{self, DynamicsParams};
use densdep::metrics::{self, DmCovMode, PriorComparison};
use densdep::{HyperParams, ObservedSeries, PriorFamily};

pub fn run_example() -> Result<PriorComparison, Box<dyn std::error::Error>> {
    let params = DynamicsParams::new(1, vec![0.5, -0.5], 0.0025)?;
    let traj = dynamics::simulate(&params, &[0.0], 50, &[0.05; 50], 11)?;
    let series = ObservedSeries::from_parts(traj.observed, traj.obs_sd);

    let cmp = metrics::compare_priors(&series, &PriorFamily::ALL, HyperParams::default(), 500, &[1, 2, 3], DmCovMode::Diag)?;
    println!("{:10} {:>10} {:>14} {:>8}", "prior", "median D_M", "final MSE (%)", "P(k=1)");
    for row in &cmp.rows {
        println!(
            "{:10} {:10.2} {:14.1} {:8.3}",
            row.family.label(),
            row.dm_median,
            row.mse_percent.last().unwrap(),
            row.final_posterior_mean[1]
        );
    }
    Ok(cmp)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
