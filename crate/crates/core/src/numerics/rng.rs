use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{Mat2, Vec2};
use crate::Result;

/// Reproducible random source: ChaCha20 keyed by a master seed, with the
/// stream index selecting one of 2⁶⁴ independent keystreams. Streams with
/// different indices never overlap, so work split by index gives the same
/// numbers whatever order it runs in.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    /// Sibling stream with the same master seed.
    pub fn derive(&self, stream_index: u64) -> Self {
        Self::new(self.master_seed, stream_index)
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }
}

/// One draw from N₂(mu, cov). `cov` may be singular but must be PSD.
pub fn mvn2_sample(mu: Vec2, cov: &Mat2, rng: &mut RngStream) -> Result<Vec2> {
    let l = cov.psd_factor()?;
    let z = [rng.standard_normal(), rng.standard_normal()];
    let dz = l.mul_vec(z);
    Ok([mu[0] + dz[0], mu[1] + dz[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn degenerate_covariance_returns_mean() {
        let mut rng = RngStream::new(7, 0);
        for _ in 0..10 {
            assert_eq!(mvn2_sample([0.5, -1.0], &Mat2::zeros(), &mut rng).unwrap(), [0.5, -1.0]);
        }
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let mut rng = RngStream::new(7, 0);
        let bad = Mat2::symmetric(1.0, 3.0, 1.0);
        assert_eq!(mvn2_sample([0.0, 0.0], &bad, &mut rng), Err(Error::NotPsd));
    }

    #[test]
    fn same_seed_same_sequence() {
        let draw = |seed, idx| {
            let mut r = RngStream::new(seed, idx);
            (0..20).map(|_| r.standard_normal()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42, 3), draw(42, 3));
        assert_ne!(draw(42, 3), draw(42, 4));
        assert_ne!(draw(42, 3), draw(43, 3));
    }

    #[test]
    fn streams_do_not_depend_on_consumption_order() {
        let base = RngStream::new(9, 0);
        let mut a = base.derive(1);
        let mut b = base.derive(2);
        let b_first: Vec<f64> = (0..5).map(|_| b.standard_normal()).collect();
        let a_after: Vec<f64> = (0..5).map(|_| a.standard_normal()).collect();
        let mut a2 = RngStream::new(9, 1);
        let a_fresh: Vec<f64> = (0..5).map(|_| a2.standard_normal()).collect();
        assert_eq!(a_after, a_fresh);
        assert_ne!(a_fresh, b_first);
    }

    #[test]
    fn sample_moments_match() {
        let mut rng = RngStream::new(2024, 0);
        let mu = [0.3, -0.7];
        let cov = Mat2::symmetric(1.0, 0.4, 2.0);
        let n = 100_000;
        let draws: Vec<Vec2> = (0..n).map(|_| mvn2_sample(mu, &cov, &mut rng).unwrap()).collect();
        let m0 = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        let m1 = draws.iter().map(|d| d[1]).sum::<f64>() / n as f64;
        let c00 = draws.iter().map(|d| (d[0] - m0).powi(2)).sum::<f64>() / n as f64;
        let c11 = draws.iter().map(|d| (d[1] - m1).powi(2)).sum::<f64>() / n as f64;
        let c01 = draws.iter().map(|d| (d[0] - m0) * (d[1] - m1)).sum::<f64>() / n as f64;
        let nf = n as f64;
        // three Monte Carlo standard errors
        assert!((m0 - mu[0]).abs() < 3.0 * (cov.a11 / nf).sqrt());
        assert!((m1 - mu[1]).abs() < 3.0 * (cov.a22 / nf).sqrt());
        assert!((c00 - cov.a11).abs() < 3.0 * (2.0 * cov.a11 * cov.a11 / nf).sqrt());
        assert!((c11 - cov.a22).abs() < 3.0 * (2.0 * cov.a22 * cov.a22 / nf).sqrt());
        let se01 = ((cov.a11 * cov.a22 + cov.a12 * cov.a12) / nf).sqrt();
        assert!((c01 - cov.a12).abs() < 3.0 * se01);
    }

    #[test]
    fn standard_normal_means_near_zero() {
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let mut s = [0.0; 2];
        for _ in 0..n {
            let d = mvn2_sample([0.0, 0.0], &Mat2::identity(), &mut rng).unwrap();
            s[0] += d[0];
            s[1] += d[1];
        }
        assert!(s[0].abs() / (n as f64) < 0.01 && s[1].abs() / (n as f64) < 0.01);
    }
}
