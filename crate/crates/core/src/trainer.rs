//! Multi-start fitting of a fixed architecture.
//!
//! Each start draws its initial weights from its own stream, keyed by the
//! configured seed and the start index. Adding starts therefore only appends
//! new local optima to the pool and never perturbs the existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::criteria::FitSummary;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ActiveDesign, Architecture, ParamVector};
use crate::optim::{minimize, BfgsOptions, Termination};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Number of random starts.
    pub n_init: usize,
    /// BFGS iteration cap per start. Capped runs are flagged, not failed; a
    /// modest cap keeps starts from drifting to huge weights that isolate a
    /// few observations.
    pub max_iterations: usize,
    /// Sup-norm gradient threshold for declaring a start converged.
    pub gradient_tolerance: f64,
    /// Initial weights are uniform on `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            max_iterations: 100,
            gradient_tolerance: 1e-6,
            init_range: 0.7,
            seed: 1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::InvalidConfig("n_init must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gradient_tolerance must be positive".into()));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(Error::InvalidConfig("init_range must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Optimiser outcome for the winning start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_sup_norm: f64,
    pub termination: Termination,
    /// Starts that ended with a non-finite objective.
    pub starts_failed: usize,
}

impl FitDiagnostics {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub arch: Architecture,
    pub theta_hat: ParamVector,
    pub summary: FitSummary,
    /// Starts whose gradient reached the tolerance.
    pub starts_converged: usize,
    pub best_start_index: usize,
    pub diagnostics: FitDiagnostics,
}

/// Seed of the stream feeding start `start`.
pub fn start_seed(seed: u64, start: usize) -> u64 {
    seed::derive(seed, &[seed::START, start as u64])
}

/// Independent uniform draws on `[-init_range, init_range]`.
pub fn init_params<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R, init_range: f64) -> ParamVector {
    let theta = (0..arch.param_count())
        .map(|_| rng.random_range(-init_range..=init_range))
        .collect();
    ParamVector::new(arch, theta).expect("length matches by construction")
}

struct StartResult {
    theta: Vec<f64>,
    rss: f64,
    iterations: usize,
    evaluations: usize,
    gradient_sup_norm: f64,
    termination: Termination,
}

/// Fits `arch` to `data` by minimising the residual sum of squares from
/// `config.n_init` random starts and keeping the best optimum (ties go to the
/// lowest start index).
pub fn fit(arch: &Architecture, data: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    config.validate()?;
    arch.check_inputs(data.p())?;
    let k = arch.param_count();
    if data.n() < k + 2 {
        return Err(Error::UnderdeterminedFit { n: data.n(), k });
    }
    let design = ActiveDesign::new(arch, data);
    let opts = BfgsOptions {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
    };

    let starts: Vec<StartResult> = (0..config.n_init)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(start_seed(config.seed, i));
            let theta0 = init_params(arch, &mut rng, config.init_range).into_vec();
            let m = minimize(|t, g| design.rss_and_gradient(t, g), theta0, &opts);
            StartResult {
                theta: m.x,
                rss: m.value,
                iterations: m.iterations,
                evaluations: m.evaluations,
                gradient_sup_norm: m.gradient_sup_norm,
                termination: m.termination,
            }
        })
        .collect();

    let starts_failed = starts.iter().filter(|s| !s.rss.is_finite()).count();
    let starts_converged = starts
        .iter()
        .filter(|s| s.termination == Termination::Converged)
        .count();
    let (best_start_index, best) = starts
        .iter()
        .enumerate()
        .filter(|(_, s)| s.rss.is_finite())
        .fold(None::<(usize, &StartResult)>, |acc, (i, s)| match acc {
            Some((_, b)) if b.rss <= s.rss => acc,
            _ => Some((i, s)),
        })
        .ok_or(Error::AllStartsFailed)?;

    let summary = FitSummary::from_rss(best.rss, data.n(), k)?;
    Ok(FittedModel {
        arch: arch.clone(),
        theta_hat: ParamVector::new(arch, best.theta.clone())?,
        summary,
        starts_converged,
        best_start_index,
        diagnostics: FitDiagnostics {
            iterations: best.iterations,
            evaluations: best.evaluations,
            gradient_sup_norm: best.gradient_sup_norm,
            termination: best.termination,
            starts_failed,
        },
    })
}
