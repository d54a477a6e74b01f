//! Watch the posterior over the model order sharpen as a simulated k = 1
//! series is assimilated year by year.
//!
//! cargo run --release --example evolving_posterior

use densdep::dynamics::{self, DynamicsParams};
use densdep::inference::FilterState;
use densdep::{FilterConfig, ObservedSeries, PriorFamily};

pub fn run_example() -> Result<[f64; 6], Box<dyn std::error::Error>> {
    let params = DynamicsParams::new(1, vec![0.5, -0.5], 0.0025)?;
    let traj = dynamics::simulate(&params, &[0.0], 200, &[0.05; 200], 3)?;
    let series = ObservedSeries::from_parts(traj.observed, traj.obs_sd);

    let config = FilterConfig::new(PriorFamily::Shrinkage1).with_particles(1000).with_seed(3);
    let mut state = FilterState::init(&series, config)?;
    println!("   t    k=0    k=1    k=2    k=3    k=4    k=5");
    for t in 5..series.len() {
        let report = state.assimilate(series.y[t], series.s[t])?;
        if report.t % 25 == 0 || report.t == 6 || report.t == series.len() {
            let row: Vec<String> = report.posterior.iter().map(|p| format!("{p:.3}")).collect();
            println!("{:4}  {}", report.t, row.join("  "));
        }
    }

    let bank = state.bank(1).expect("k = 1 bank");
    let w = bank.weights();
    let b0: f64 = bank.particles().iter().zip(w).map(|(p, w)| w * p.b[0]).sum();
    let b1: f64 = bank.particles().iter().zip(w).map(|(p, w)| w * p.b[1]).sum();
    println!("k = 1 posterior mean b = ({b0:.3}, {b1:.3}); truth (0.5, -0.5)");
    Ok(state.model_posterior())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
