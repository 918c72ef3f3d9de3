#![allow(dead_code)]

use dta_core::ingest::TransformedStudy;
use dta_core::numerics::{mvn2_sample, Mat2, RngStream};

pub fn sigma_from(sd: [f64; 2], rho: f64) -> Mat2 {
    Mat2::symmetric(sd[0] * sd[0], rho * sd[0] * sd[1], sd[1] * sd[1])
}

/// Studies drawn from the bivariate null model with within-study
/// variances uniform on `[vlo, vhi)`.
pub fn simulate(
    n: usize,
    mu: [f64; 2],
    sigma: &Mat2,
    (vlo, vhi): (f64, f64),
    rng: &mut RngStream,
) -> Vec<TransformedStudy> {
    (0..n)
        .map(|i| {
            let v = [rng.uniform(vlo, vhi), rng.uniform(vlo, vhi)];
            let y = mvn2_sample(mu, &(Mat2::diag(v[0], v[1]) + *sigma), rng).unwrap();
            TransformedStudy::from_parts(format!("s{i}"), y, v).unwrap()
        })
        .collect()
}

pub fn random_sigma(rng: &mut RngStream) -> Mat2 {
    sigma_from([rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)], rng.uniform(-0.9, 0.9))
}
