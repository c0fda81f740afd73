//! Normal maximum-likelihood fit and the standard normal CDF / quantile.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// MLE estimate of a normal distribution from a sample of distances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalFit {
    pub mu_hat: f64,
    /// Square root of the divide-by-n variance.
    pub sigma_hat: f64,
    pub sample_size: usize,
}

impl NormalFit {
    /// True when every sample was identical.
    pub fn is_degenerate(&self) -> bool {
        self.sigma_hat == 0.0
    }

    /// Quantile of the fitted distribution.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.mu_hat + self.sigma_hat * inverse_normal_cdf(p)?)
    }
}

pub fn fit_normal_mle(samples: &[f64]) -> Result<NormalFit> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "normal fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mu_hat = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|d| (d - mu_hat).powi(2)).sum::<f64>() / n;
    let first = samples[0];
    let sigma_hat = if samples.iter().all(|&d| d == first) {
        0.0
    } else {
        var.sqrt()
    };
    Ok(NormalFit {
        mu_hat,
        sigma_hat,
        sample_size: samples.len(),
    })
}

/// Φ(z), the standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

// Rational approximation of the lower-tail quantile (P. J. Acklam),
// relative error about 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_24,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Φ⁻¹(p) for p in (0, 1).
///
/// The rational approximation is polished with one Halley step against
/// `erfc`. Upper-half arguments go through the symmetry Φ⁻¹(p) = −Φ⁻¹(1−p),
/// where `1 − p` is exact.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse normal CDF needs p in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let x = acklam_lower(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn fit_constant_is_degenerate() {
        let f = fit_normal_mle(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((f.mu_hat, f.sigma_hat), (1.0, 0.0));
        assert!(f.is_degenerate());
    }

    #[test]
    fn fit_uses_unadjusted_variance() {
        let f = fit_normal_mle(&[0.0, 2.0]).unwrap();
        assert_eq!((f.mu_hat, f.sigma_hat), (1.0, 1.0));
        assert!(!f.is_degenerate());
        assert!(fit_normal_mle(&[0.3]).is_err());
    }

    #[test]
    fn fit_recovers_synthetic_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = Normal::new(0.8, 0.04).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let f = fit_normal_mle(&xs).unwrap();
        assert!((f.mu_hat - 0.8).abs() < 1e-3, "{f:?}");
        assert!((f.sigma_hat - 0.04).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn quantile_reference_points() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        assert!((inverse_normal_cdf(0.975).unwrap() - 1.959_963_985).abs() < 1e-4);
        assert!((inverse_normal_cdf(1.0 / 2071.0).unwrap() + 3.302).abs() < 5e-3);
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(inverse_normal_cdf(p).is_err(), "{p}");
        }
    }
}
