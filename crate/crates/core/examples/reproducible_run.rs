//! Drive the command-line workflows from code: simulate, fit, then replay
//! the fit from its manifest and confirm the outputs match byte for byte.
//!
//! cargo run --release --example reproducible_run

use std::fs;

use densdep::cli::{self, Preset, RunConfig, SimSpec};
use densdep::PriorFamily;

pub fn run_example() -> Result<bool, Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join(format!("densdep-example-{}", std::process::id()));
    let mut spec = SimSpec::preset(Preset::Sim2);
    spec.horizon = 60;
    cli::execute(&RunConfig::simulate(spec, 5), &root.join("sim"))?;

    let mut fit = RunConfig::fit(root.join("sim/trajectory.csv"), PriorFamily::Shrinkage1, 5);
    fit.n_particles = 500;
    for f in cli::execute(&fit, &root.join("fit"))? {
        println!("wrote {}", f.display());
    }

    let replay = cli::read_manifest(&root.join("fit/manifest.json"))?;
    cli::execute(&replay, &root.join("replay"))?;
    let same = fs::read(root.join("fit/posterior.csv"))? == fs::read(root.join("replay/posterior.csv"))?;
    println!("replayed posterior identical: {same}");
    fs::remove_dir_all(&root)?;
    Ok(same)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
