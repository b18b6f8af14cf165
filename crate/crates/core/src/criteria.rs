//! Gaussian log-likelihood with the error variance profiled out, and the
//! comparison objectives built on it.
//!
//! Both information criteria count `K + 1` parameters: the `K` network
//! weights plus the error variance.

use std::f64::consts::PI;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::predict_batch;
use crate::trainer::FittedModel;

/// Likelihood summary of one fitted network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub rss: f64,
    pub n: usize,
    pub k: usize,
    pub sigma2_hat: f64,
    pub log_lik: f64,
    pub bic: f64,
    pub aic: f64,
}

impl FitSummary {
    pub fn from_rss(rss: f64, n: usize, k: usize) -> Result<Self> {
        let sigma2_hat = sigma2_mle(rss, n)?;
        let log_lik = log_likelihood(rss, n)?;
        Ok(Self {
            rss,
            n,
            k,
            sigma2_hat,
            log_lik,
            bic: bic(log_lik, n, k),
            aic: aic(log_lik, k),
        })
    }
}

/// Maximum-likelihood error variance `rss / n`.
pub fn sigma2_mle(rss: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be positive".into()));
    }
    if !rss.is_finite() || rss < 0.0 {
        return Err(Error::NonFinite(format!("residual sum of squares = {rss}")));
    }
    if rss == 0.0 {
        return Err(Error::DegenerateFit);
    }
    Ok(rss / n as f64)
}

/// Profile log-likelihood `-(n/2) (ln(2 pi rss / n) + 1)`.
pub fn log_likelihood(rss: f64, n: usize) -> Result<f64> {
    let s2 = sigma2_mle(rss, n)?;
    let n = n as f64;
    Ok(-0.5 * n * ((2.0 * PI * s2).ln() + 1.0))
}

/// `-2 log_lik + ln(n) (K + 1)`.
pub fn bic(log_lik: f64, n: usize, k: usize) -> f64 {
    -2.0 * log_lik + (n as f64).ln() * (k as f64 + 1.0)
}

/// `-2 log_lik + 2 (K + 1)`.
pub fn aic(log_lik: f64, k: usize) -> f64 {
    -2.0 * log_lik + 2.0 * (k as f64 + 1.0)
}

/// Mean squared prediction error of a fitted model on held-out rows.
pub fn oos_mse(model: &FittedModel, holdout: &Dataset) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyHoldout);
    }
    let preds = predict_batch(&model.arch, &model.theta_hat, holdout)?;
    let sse: f64 = preds
        .iter()
        .zip(holdout.response())
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    let mse = sse / holdout.n() as f64;
    if mse.is_finite() {
        Ok(mse)
    } else {
        Err(Error::NonFinite("out-of-sample error".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // l(s2) written per observation, straight from the Gaussian density
    fn gaussian_loglik(residuals: &[f64], s2: f64) -> f64 {
        residuals
            .iter()
            .map(|r| -0.5 * (2.0 * PI * s2).ln() - r * r / (2.0 * s2))
            .sum()
    }

    #[test]
    fn sigma2_cases() {
        assert_eq!(sigma2_mle(10.0, 5).unwrap(), 2.0);
        assert!(matches!(sigma2_mle(0.0, 5), Err(Error::DegenerateFit)));
        assert!(sigma2_mle(-1.0, 5).is_err());
        assert!(sigma2_mle(1.0, 0).is_err());
    }

    #[test]
    fn sigma2_maximises_profile_likelihood_on_a_grid() {
        let y = [1.0, 3.0, 2.5, 0.5, 4.0, 2.0];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let res: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let rss: f64 = res.iter().map(|r| r * r).sum();
        let s2 = sigma2_mle(rss, y.len()).unwrap();
        let best = (1..=2000)
            .map(|i| i as f64 * 0.002)
            .map(|g| (g, gaussian_loglik(&res, g)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best.0 - s2).abs() <= 0.002, "grid {} vs {s2}", best.0);
        assert!(gaussian_loglik(&res, s2) >= best.1);
    }

    #[test]
    fn loglik_cancellation() {
        // sigma2_hat = 1/(2 pi) makes the log term vanish
        let n = 2;
        let rss = n as f64 / (2.0 * PI);
        assert!((log_likelihood(rss, n).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn loglik_decreases_in_rss() {
        assert!(log_likelihood(1.0, 10).unwrap() > log_likelihood(2.0, 10).unwrap());
        assert!(log_likelihood(0.0, 10).is_err());
    }

    #[test]
    fn loglik_matches_per_observation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(2..50);
            let res: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let rss: f64 = res.iter().map(|r| r * r).sum();
            let direct = gaussian_loglik(&res, rss / n as f64);
            let got = log_likelihood(rss, n).unwrap();
            assert!((got - direct).abs() <= 1e-10 * direct.abs());
        }
    }

    #[test]
    fn criteria_formulas() {
        assert_eq!(bic(-10.0, 1, 4), 20.0);
        assert_eq!(aic(0.0, 4), 10.0);
        let s = FitSummary::from_rss(3.0, 20, 7).unwrap();
        assert_eq!(s.bic, -2.0 * s.log_lik + (20f64).ln() * 8.0);
        assert_eq!(s.aic, -2.0 * s.log_lik + 16.0);
    }

    #[test]
    fn bic_penalises_harder_than_aic_from_eight_observations() {
        for n in 8..200 {
            assert!(bic(0.0, n, 5) > aic(0.0, 5));
        }
    }
}
