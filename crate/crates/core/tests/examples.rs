//! Every example runs and produces sensible output.

#[path = "../examples/simulate_regimes.rs"]
mod simulate_regimes;
#[path = "../examples/prior_families.rs"]
mod prior_families;
#[path = "../examples/evolving_posterior.rs"]
mod evolving_posterior;
#[path = "../examples/fit_survey.rs"]
mod fit_survey;
#[path = "../examples/compare_priors.rs"]
mod compare_priors;
#[path = "../examples/reproducible_run.rs"]
mod reproducible_run;

use densdep::dynamics::Regime;
use densdep::PriorFamily;

#[test]
fn regimes_example() {
    let r = simulate_regimes::run_example().unwrap();
    let kinds: Vec<Regime> = r.iter().map(|x| x.0).collect();
    assert_eq!(
        kinds,
        [Regime::MonotoneReturn, Regime::DampedOscillation, Regime::DampedOscillation, Regime::SustainedOrUnbounded]
    );
    assert!(r[3].1 > 5.0 * r[0].1);
}

#[test]
fn prior_families_example() {
    let m = prior_families::run_example().unwrap();
    assert_eq!(m.len(), 5);
    assert!(m.iter().filter(|(f, _)| f.is_structured()).all(|(_, p)| (p - 0.47725).abs() < 1e-5));
}

#[test]
fn evolving_posterior_example() {
    let p = evolving_posterior::run_example().unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn fit_survey_example() {
    let p = fit_survey::run_example().unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn compare_priors_example() {
    let c = compare_priors::run_example().unwrap();
    assert_eq!(c.rows.len(), 5);
    assert_eq!(c.baseline, PriorFamily::Independent5);
}

#[test]
fn reproducible_run_example() {
    assert!(reproducible_run::run_example().unwrap());
}
