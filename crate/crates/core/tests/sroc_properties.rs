mod common;

use common::{sigma_from, simulate};
use dta_core::bivariate::{fit_reitsma, FitOptions};
use dta_core::numerics::{Mat2, RngStream};
use dta_core::sroc::{
    auc, confidence_region, hsroc_from_bivariate, logit_ellipse, map_hsroc, prediction_region, sroc_sens, DEFAULT_GRID,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn hsroc_mapping_round_trips(
        m1 in -3.0f64..3.0, m2 in -4.0f64..2.0,
        s1 in 0.05f64..2.0, s2 in 0.05f64..2.0, r in -0.95f64..0.95,
    ) {
        let sigma = sigma_from([s1, s2], r);
        let p = hsroc_from_bivariate([m1, m2], &sigma).unwrap();
        prop_assert!((p.beta.exp() - s2 / s1).abs() < 1e-10 * (s2 / s1).max(1.0));
        prop_assert!((p.tau_theta2 + p.tau_alpha2 / 4.0 - s1 * s2).abs() < 1e-10);
        let (mu, back) = p.to_bivariate();
        prop_assert!((mu[0] - m1).abs() < 1e-10 && (mu[1] - m2).abs() < 1e-10);
        prop_assert!(back.max_abs_diff(&sigma) < 1e-10);
        // increasing curve; steep ones saturate at 1.0 in floating point
        prop_assert!(sroc_sens(0.1, &p) <= sroc_sens(0.2, &p));
        prop_assert!(sroc_sens(0.1, &p) < 1.0 || sroc_sens(0.2, &p) == 1.0);
        let a = auc(&p, DEFAULT_GRID).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn auc_grid_convergence() {
    let sigma = sigma_from([0.32, 0.724], -0.218);
    let p = hsroc_from_bivariate([0.653, -1.448], &sigma).unwrap();
    let half = auc(&p, DEFAULT_GRID / 2).unwrap();
    let double = auc(&p, DEFAULT_GRID * 2).unwrap();
    assert!((half - double).abs() < 1e-4);
    // a steep asymmetric curve converges too
    let steep = hsroc_from_bivariate([2.0, -3.0], &sigma_from([0.2, 1.5], 0.3)).unwrap();
    assert!((auc(&steep, DEFAULT_GRID / 2).unwrap() - auc(&steep, DEFAULT_GRID * 2).unwrap()).abs() < 1e-4);
}

#[test]
fn auc_depends_only_on_fit() {
    let mut rng = RngStream::new(31, 0);
    let studies = simulate(15, [0.6, -1.4], &sigma_from([0.4, 0.7], -0.2), (0.05, 0.5), &mut rng);
    let mut rev = studies.clone();
    rev.reverse();
    let a = map_hsroc(&fit_reitsma(&studies, &FitOptions::default()).unwrap()).unwrap();
    let b = map_hsroc(&fit_reitsma(&rev, &FitOptions::default()).unwrap()).unwrap();
    assert_eq!(auc(&a, DEFAULT_GRID).unwrap(), auc(&b, DEFAULT_GRID).unwrap());
}

#[test]
fn prediction_region_encloses_confidence_region() {
    let mut rng = RngStream::new(32, 0);
    let studies = simulate(15, [0.6, -1.4], &sigma_from([0.4, 0.7], -0.2), (0.05, 0.5), &mut rng);
    let fit = fit_reitsma(&studies, &FitOptions::default()).unwrap();
    let conf = logit_ellipse(fit.mu, &fit.cov_mu, 0.95, 256).unwrap();
    let pred = logit_ellipse(fit.mu, &(fit.cov_mu + fit.sigma), 0.95, 256).unwrap();
    // every confidence point lies inside the prediction ellipse (Mahalanobis < r²)
    let r2 = dta_core::numerics::chisq_quantile(0.95, 2.0).unwrap();
    let inv: Mat2 = (fit.cov_mu + fit.sigma).inv().unwrap();
    for p in &conf {
        let d = [p[0] - fit.mu[0], p[1] - fit.mu[1]];
        assert!(inv.quad_form(d) < r2);
    }
    assert_eq!(pred.len(), 256);
    assert_eq!(confidence_region(&fit, 0.95).unwrap().len(), 256);
    assert_eq!(prediction_region(&fit, 0.95).unwrap().len(), 256);
}
