mod common;

use common::sim1;
use densdep::inference::{self, FilterConfig};
use densdep::metrics::{self, CovarianceSpec, DmCovMode, MetricsError};
use densdep::priors::{HyperParams, PriorFamily};

#[test]
fn single_family_normalizes_to_itself() {
    let s = sim1(30, 1);
    let cmp = metrics::compare_priors(&s, &[PriorFamily::Correlated], HyperParams::default(), 200, &[3], DmCovMode::Diag).unwrap();
    assert_eq!(cmp.rows.len(), 1);
    assert_eq!(cmp.baseline, PriorFamily::Correlated);
    assert!(cmp.rows[0].mse_percent.iter().all(|p| (p - 100.0).abs() < 1e-12));
    assert_eq!(cmp.times.first(), Some(&6));
    assert_eq!(cmp.times.len(), 25);
}

#[test]
fn comparison_ignores_family_order_and_is_deterministic() {
    let s = sim1(25, 2);
    let hp = HyperParams::default();
    let fwd = [PriorFamily::Independent5, PriorFamily::Shrinkage1, PriorFamily::Independent1];
    let rev = [PriorFamily::Independent1, PriorFamily::Shrinkage1, PriorFamily::Independent5];
    let a = metrics::compare_priors(&s, &fwd, hp, 150, &[1, 2], DmCovMode::Diag).unwrap();
    let b = metrics::compare_priors(&s, &rev, hp, 150, &[1, 2], DmCovMode::Diag).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.baseline, PriorFamily::Independent5);
    let order: Vec<_> = a.rows.iter().map(|r| r.family).collect();
    assert_eq!(order, [PriorFamily::Independent5, PriorFamily::Independent1, PriorFamily::Shrinkage1]);
    assert!(a.rows[0].mse_percent.iter().all(|p| (p - 100.0).abs() < 1e-12));
}

#[test]
fn full_covariance_distance_is_finite() {
    let s = sim1(30, 4);
    let (state, trace) = inference::run(&s, FilterConfig::new(PriorFamily::Shrinkage1).with_particles(300)).unwrap();
    let records = metrics::records_from_trace(&trace);
    let full = metrics::full_covariance(&state, &records);
    assert_eq!(full.nrows(), records.len());
    let dm = metrics::mahalanobis(&records, &CovarianceSpec::Full(full)).unwrap();
    let diag = metrics::mahalanobis(&records, &CovarianceSpec::PredictiveDiagonal).unwrap();
    assert!(dm.is_finite() && dm >= 0.0 && diag.is_finite());
}

#[test]
fn records_pair_predictions_with_smoothed_states() {
    let s = sim1(20, 5);
    let (_, trace) = inference::run(&s, FilterConfig::new(PriorFamily::Shrinkage2).with_particles(200)).unwrap();
    let r = metrics::records_from_trace(&trace);
    assert_eq!(r.len(), 15);
    for rec in &r {
        assert!(rec.t >= 6 && rec.pvar > 0.0);
        assert_eq!(rec.xtilde, trace.smoothed[rec.t - 1]);
    }
}

#[test]
fn no_families_is_an_error() {
    let s = sim1(20, 5);
    let e = metrics::compare_priors(&s, &[], HyperParams::default(), 200, &[1], DmCovMode::Diag);
    assert_eq!(e, Err(MetricsError::NoFamilies));
}
