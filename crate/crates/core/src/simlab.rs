//! Simulation laboratory: draws data from a known network with a few
//! important inputs and many irrelevant ones, runs selection, and scores how
//! often the true architecture is recovered.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::criteria::oos_mse;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{forward, Architecture, ParamVector};
use crate::selector::{select, Objective, SelectionConfig};
use crate::seed;

const MAX_DRAWS: usize = 10_000;

/// Law of the data-generating network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueModelSpec {
    pub p_important: usize,
    pub p_noise: usize,
    pub q_true: usize,
    /// Input-to-hidden and hidden-to-output weights have magnitude uniform on
    /// `[weight_min, weight_max]` with a random sign.
    pub weight_min: f64,
    pub weight_max: f64,
    /// Biases are uniform on `[-bias_range, bias_range]`.
    pub bias_range: f64,
    pub noise_sd: f64,
    pub covariates: CovariateLaw,
    /// Draws where two hidden units have first-layer weight vectors with
    /// absolute cosine above this are rejected and redrawn. Near-parallel
    /// units collapse into one and leave `q_true` unidentifiable. Ignored
    /// with a single important input; `1.0` disables the check.
    pub max_direction_cosine: f64,
}

/// Distribution of every simulated covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovariateLaw {
    Uniform01,
    #[default]
    StandardNormal,
}

impl Default for TrueModelSpec {
    fn default() -> Self {
        Self {
            p_important: 3,
            p_noise: 10,
            q_true: 3,
            weight_min: 1.0,
            weight_max: 3.0,
            bias_range: 1.0,
            noise_sd: 0.7,
            covariates: CovariateLaw::StandardNormal,
            max_direction_cosine: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub p_important: usize,
    pub p_noise: usize,
    pub q_true: usize,
    /// Parameters of the network on the important inputs only.
    pub weights: ParamVector,
    pub noise_sd: f64,
    pub covariates: CovariateLaw,
}

impl TrueModel {
    /// True architecture over the `p_important + p_noise` covariates.
    pub fn arch(&self) -> Architecture {
        Architecture::new(0..self.p_important, self.q_true).expect("q_true >= 1")
    }

    pub fn p_total(&self) -> usize {
        self.p_important + self.p_noise
    }

    pub fn k_true(&self) -> usize {
        self.arch().param_count()
    }

    /// Largest absolute cosine between the first-layer weight vectors of two
    /// hidden units.
    pub fn max_direction_cosine(&self) -> f64 {
        let w = &self.weights;
        let dir = |k: usize| -> Vec<f64> {
            (0..self.p_important).map(|j| w.as_slice()[w.input_weight_index(k, j)]).collect()
        };
        let dirs: Vec<Vec<f64>> = (0..self.q_true).map(dir).collect();
        let norm = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut worst = 0.0f64;
        for a in 0..dirs.len() {
            for b in a + 1..dirs.len() {
                let dot: f64 = dirs[a].iter().zip(&dirs[b]).map(|(x, y)| x * y).sum();
                worst = worst.max((dot / (norm(&dirs[a]) * norm(&dirs[b]))).abs());
            }
        }
        worst
    }

    /// Noise-free response for a full covariate row.
    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        forward(&self.arch(), &self.weights, x)
    }
}

impl TrueModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_important == 0 || self.q_true == 0 {
            return Err(Error::InvalidConfig(
                "true model needs at least one important input and one hidden node".into(),
            ));
        }
        if !(0.0 < self.weight_min && self.weight_min <= self.weight_max) {
            return Err(Error::InvalidConfig("weight range must satisfy 0 < min <= max".into()));
        }
        if !(self.bias_range >= 0.0 && self.noise_sd >= 0.0) {
            return Err(Error::InvalidConfig("bias range and noise sd must be non-negative".into()));
        }
        if !(self.max_direction_cosine > 0.0 && self.max_direction_cosine <= 1.0) {
            return Err(Error::InvalidConfig("max_direction_cosine must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn generate(&self, seed: u64) -> Result<TrueModel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_DRAWS {
            let model = self.draw(&mut rng)?;
            if self.p_important < 2 || model.max_direction_cosine() <= self.max_direction_cosine {
                return Ok(model);
            }
        }
        Err(Error::InvalidConfig(format!(
            "no true model with direction cosine <= {} in {MAX_DRAWS} draws",
            self.max_direction_cosine
        )))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<TrueModel> {
        let arch = Architecture::new(0..self.p_important, self.q_true)?;
        let mut weights = ParamVector::zeros(&arch);
        let bias = |rng: &mut ChaCha8Rng| {
            if self.bias_range > 0.0 {
                rng.random_range(-self.bias_range..=self.bias_range)
            } else {
                0.0
            }
        };
        let signed = |rng: &mut ChaCha8Rng| {
            let m = rng.random_range(self.weight_min..=self.weight_max);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        };
        for k in 0..self.q_true {
            let i = weights.hidden_bias_index(k);
            weights.as_mut_slice()[i] = bias(rng);
            for j in 0..self.p_important {
                let i = weights.input_weight_index(k, j);
                weights.as_mut_slice()[i] = signed(rng);
            }
        }
        let ob = weights.output_bias_index();
        weights.as_mut_slice()[ob] = bias(rng);
        for k in 0..self.q_true {
            let i = weights.output_weight_index(k);
            weights.as_mut_slice()[i] = signed(rng);
        }
        Ok(TrueModel {
            p_important: self.p_important,
            p_noise: self.p_noise,
            q_true: self.q_true,
            weights,
            noise_sd: self.noise_sd,
            covariates: self.covariates,
        })
    }
}

/// Draws a true model with the default law.
pub fn generate_true_model(seed: u64) -> TrueModel {
    TrueModelSpec::default()
        .generate(seed)
        .expect("default generator is valid")
}

/// `n` rows with i.i.d. covariates from the model's law and Gaussian noise
/// added to the network output.
pub fn simulate_dataset(model: &TrueModel, n: usize, seed: u64) -> Result<Dataset> {
    let p = model.p_total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.noise_sd)
        .map_err(|e| Error::InvalidConfig(format!("noise sd: {e}")))?;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for _ in 0..n {
        match model.covariates {
            CovariateLaw::Uniform01 => row.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            CovariateLaw::StandardNormal => {
                row.iter_mut().for_each(|v| *v = rand_distr::StandardNormal.sample(&mut rng))
            }
        }
        x.extend_from_slice(&row);
        y.push(model.mean(&row)? + noise.sample(&mut rng));
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::from_flat(names, "y", x, y)
}

/// Recovery scores of a selected architecture against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recovery {
    /// Irrelevant inputs left out of the selected model.
    pub c: usize,
    pub pi_hit: bool,
    pub ph_hit: bool,
    pub pt_hit: bool,
}

pub fn score(truth: &TrueModel, selected: &Architecture) -> Recovery {
    let noise = truth.p_important..truth.p_total();
    let c = noise.filter(|&j| !selected.has_input(j)).count();
    let pi_hit = selected.inputs().iter().copied().eq(0..truth.p_important);
    let ph_hit = selected.q() == truth.q_true;
    Recovery {
        c,
        pi_hit,
        ph_hit,
        pt_hit: pi_hit && ph_hit,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub recovery: Recovery,
    pub selected: Architecture,
    pub k: usize,
    pub bic: f64,
    pub aic: f64,
    /// Objective value of the selected model (equals `bic`/`aic` for those
    /// objectives, validation MSE for OOS).
    pub objective: f64,
    /// MSE on a fresh test set 20% the size of the training set.
    pub test_mse: f64,
    pub fits: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    pub outcome: std::result::Result<ReplicateMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Training rows per replicate.
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub generator: TrueModelSpec,
    pub selection: SelectionConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            replicates: 100,
            seed: 1,
            generator: TrueModelSpec::default(),
            selection: SelectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub completed: usize,
    pub failed: usize,
    pub c_mean: f64,
    pub pi: f64,
    pub ph: f64,
    pub pt: f64,
    pub median_k: f64,
    pub median_test_mse: f64,
    pub median_bic: f64,
    pub median_aic: f64,
    pub median_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub records: Vec<ReplicateRecord>,
    pub aggregate: Aggregate,
}

/// Seeds of replicate `r`: (true model, training data, test data, selection).
pub fn replicate_seeds(master: u64, r: usize) -> [u64; 4] {
    let base = seed::derive(master, &[seed::REPLICATE, r as u64]);
    [1, 2, 3, 4].map(|tag| seed::derive(base, &[tag]))
}

/// Runs one replicate in isolation.
pub fn run_replicate(config: &SimulationConfig, r: usize) -> Result<ReplicateMetrics> {
    let started = Instant::now();
    let [model_seed, data_seed, test_seed, select_seed] = replicate_seeds(config.seed, r);
    let truth = config.generator.generate(model_seed)?;
    let mut selection = config.selection;
    selection.fit_config.seed = select_seed;
    let n_total = match selection.objective {
        // extra rows become the validation split inside the selector
        Objective::Oos => {
            config.n + (selection.validation_fraction * config.n as f64 + 0.5).floor() as usize
        }
        _ => config.n,
    };
    let data = simulate_dataset(&truth, n_total, data_seed)?;
    let test = simulate_dataset(&truth, ((0.2 * config.n as f64) + 0.5).floor().max(1.0) as usize, test_seed)?;
    let outcome = select(&data, &selection)?;
    let model = &outcome.model;
    Ok(ReplicateMetrics {
        recovery: score(&truth, &model.arch),
        selected: model.arch.clone(),
        k: model.arch.param_count(),
        bic: model.summary.bic,
        aic: model.summary.aic,
        objective: outcome.objective,
        test_mse: oos_mse(model, &test)?,
        fits: outcome.fits,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Runs every replicate (concurrently) and aggregates in replicate order.
pub fn run_replicates(config: &SimulationConfig) -> Result<SimulationReport> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("at least one replicate is required".into()));
    }
    if config.n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    config.generator.validate()?;
    config.selection.validate()?;
    let records: Vec<ReplicateRecord> = (0..config.replicates)
        .into_par_iter()
        .map(|r| ReplicateRecord {
            index: r,
            outcome: run_replicate(config, r).map_err(|e| e.to_string()),
        })
        .collect();
    let aggregate = aggregate(&records);
    Ok(SimulationReport {
        config: *config,
        records,
        aggregate,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Means, proportions and medians over the completed replicates.
pub fn aggregate(records: &[ReplicateRecord]) -> Aggregate {
    let ok: Vec<&ReplicateMetrics> = records.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let n = ok.len() as f64;
    let frac = |f: &dyn Fn(&ReplicateMetrics) -> bool| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().filter(|m| f(m)).count() as f64 / n
        }
    };
    let med = |f: &dyn Fn(&ReplicateMetrics) -> f64| median(&mut ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    Aggregate {
        completed: ok.len(),
        failed: records.len() - ok.len(),
        c_mean: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|m| m.recovery.c as f64).sum::<f64>() / n
        },
        pi: frac(&|m| m.recovery.pi_hit),
        ph: frac(&|m| m.recovery.ph_hit),
        pt: frac(&|m| m.recovery.pt_hit),
        median_k: med(&|m| m.k as f64),
        median_test_mse: med(&|m| m.test_mse),
        median_bic: med(&|m| m.bic),
        median_aic: med(&|m| m.aic),
        median_time: med(&|m| m.wall_time),
    }
}
