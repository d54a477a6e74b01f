//! The four stability regimes of the k = 1 model: classification, carrying
//! capacity and the spread of a simulated path.
//!
//! cargo run --example simulate_regimes

use densdep::dynamics::{self, carrying_capacity, classify_stability, DynamicsParams, Regime};

pub fn run_example() -> Result<Vec<(Regime, f64)>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for b in [[0.5, -0.5], [1.0, -1.0], [1.5, -1.5], [2.5, -2.5]] {
        let regime = classify_stability(&b, 1)?;
        let cap = carrying_capacity(&b, 1)?;
        let params = DynamicsParams::new(1, b.to_vec(), 0.05f64.powi(2))?;
        // no measurement error, keep years 100..150 like the classic panels
        let traj = dynamics::simulate(&params, &[0.0], 150, &[0.0; 150], 7)?;
        let tail = &traj.latent[100..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let sd = (tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt();
        println!("b = {b:?}: {regime:?}, capacity {cap:?}, sd of years 100-150 {sd:.3}");
        out.push((regime, sd));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
