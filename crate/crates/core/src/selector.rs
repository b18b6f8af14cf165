//! Architecture search: hidden-node phase, input-node phase and stepwise
//! fine-tuning, composed into the five strategies.
//!
//! Each architecture is fitted at most once per selection run. Its random
//! starts are keyed by the architecture itself, so a candidate revisited in a
//! later phase gets the same fit and the same objective value, and every
//! accept decision compares fixed numbers. Because accepted moves strictly
//! lower the objective and the candidate space is finite, every strategy
//! terminates.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::criteria::oos_mse;
use crate::data::{partition_indices, Dataset};
use crate::error::{Error, Result};
use crate::model::Architecture;
use crate::seed;
use crate::trainer::{fit, FitConfig, FitDiagnostics, FittedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Bic,
    Aic,
    /// Mean squared error on a validation split.
    Oos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Hidden phase, input phase, fine-tuning.
    Hif,
    /// Input phase (at `q_max`), hidden phase, fine-tuning.
    Ihf,
    Hi,
    Ih,
    /// Fine-tuning only, from the full model.
    F,
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().replace('-', "").as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(Error::InvalidConfig(format!("unknown {} `{s}`", $what))),
                }
            }
        }
    };
}

str_enum!(Objective, "objective", Objective::Bic => "bic", Objective::Aic => "aic", Objective::Oos => "oos");
str_enum!(
    Strategy, "strategy",
    Strategy::Hif => "hif", Strategy::Ihf => "ihf", Strategy::Hi => "hi", Strategy::Ih => "ih", Strategy::F => "f",
);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub q_max: usize,
    pub objective: Objective,
    pub strategy: Strategy,
    pub fit_config: FitConfig,
    /// Validation rows as a fraction of the training rows (OOS only).
    pub validation_fraction: f64,
    /// Hidden nodes used by the input phase of the I-first strategies;
    /// `None` means `q_max`.
    pub input_first_q: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            q_max: 10,
            objective: Objective::Bic,
            strategy: Strategy::Hif,
            fit_config: FitConfig::default(),
            validation_fraction: 0.2,
            input_first_q: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_max == 0 {
            return Err(Error::InvalidConfig("q_max must be at least 1".into()));
        }
        if self.objective == Objective::Oos
            && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "validation fraction {} must lie strictly between 0 and 1",
                self.validation_fraction
            )));
        }
        if let Some(q) = self.input_first_q {
            if q == 0 || q > self.q_max {
                return Err(Error::InvalidConfig(format!("input-first q = {q} must lie in 1..=q_max")));
            }
        }
        self.fit_config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Hidden,
    Input,
    FineTune,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Hidden => "H",
            Phase::Input => "I",
            Phase::FineTune => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepStatus {
    Accepted,
    Rejected,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub phase: Phase,
    /// Decision point within the phase (0 is the phase's starting model).
    pub round: usize,
    pub arch: Architecture,
    pub objective: Option<f64>,
    pub diagnostics: Option<FitDiagnostics>,
    pub status: StepStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionTrace {
    pub steps: Vec<TraceStep>,
}

impl SelectionTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| s.status == StepStatus::Accepted)
    }

    pub fn phases(&self) -> Vec<Phase> {
        let mut out: Vec<Phase> = Vec::new();
        for s in &self.steps {
            if out.last() != Some(&s.phase) {
                out.push(s.phase);
            }
        }
        out
    }
}

/// A fitted candidate and its objective value.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub model: FittedModel,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub model: FittedModel,
    pub objective: f64,
    pub trace: SelectionTrace,
    /// Distinct architectures fitted during the run.
    pub fits: usize,
}

type Evaluated = Arc<Result<Candidate>>;

/// Seed of the multi-start stream for one architecture.
pub fn candidate_seed(base: u64, arch: &Architecture) -> u64 {
    let mut parts = Vec::with_capacity(arch.p() + 3);
    parts.push(seed::CANDIDATE);
    parts.push(arch.q() as u64);
    parts.push(arch.p() as u64);
    parts.extend(arch.inputs().iter().map(|&j| j as u64));
    seed::derive(base, &parts)
}

/// Validation size giving a validation set `fraction` times the size of the
/// remaining training set: `round(fraction * n / (1 + fraction))`.
pub fn validation_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 / (1.0 + fraction) + 0.5).floor() as usize
}

/// Stateful search over architectures for one dataset and configuration.
pub struct Selector {
    train: Dataset,
    validation: Option<Dataset>,
    config: SelectionConfig,
    cache: HashMap<Architecture, Evaluated>,
    trace: SelectionTrace,
    last_accepted: Option<(Architecture, f64)>,
}

impl Selector {
    /// For the OOS objective the data are partitioned (seeded by the fit
    /// seed) into training and validation rows here; all fits use training
    /// rows only.
    pub fn new(data: &Dataset, config: SelectionConfig) -> Result<Self> {
        config.validate()?;
        if data.p() == 0 {
            return Err(Error::InvalidConfig("no covariates to select from".into()));
        }
        let (train, validation) = match config.objective {
            Objective::Oos => {
                let n_val = validation_size(data.n(), config.validation_fraction);
                if n_val == 0 || n_val >= data.n() {
                    return Err(Error::InvalidSplit(format!(
                        "validation fraction {} of {} rows leaves an empty part",
                        config.validation_fraction,
                        data.n()
                    )));
                }
                let split_seed = seed::derive(config.fit_config.seed, &[seed::VALIDATION]);
                let (kept, held) = partition_indices(data.n(), n_val, split_seed);
                (data.select_rows(&kept), Some(data.select_rows(&held)))
            }
            _ => (data.clone(), None),
        };
        Ok(Self {
            train,
            validation,
            config,
            cache: HashMap::new(),
            trace: SelectionTrace::default(),
            last_accepted: None,
        })
    }

    pub fn config(&self) -> &SelectionConfig {
        &self.config
    }

    pub fn training_data(&self) -> &Dataset {
        &self.train
    }

    pub fn validation_data(&self) -> Option<&Dataset> {
        self.validation.as_ref()
    }

    pub fn trace(&self) -> &SelectionTrace {
        &self.trace
    }

    pub fn fits(&self) -> usize {
        self.cache.len()
    }

    fn score(&self, model: &FittedModel) -> Result<f64> {
        match self.config.objective {
            Objective::Bic => Ok(model.summary.bic),
            Objective::Aic => Ok(model.summary.aic),
            Objective::Oos => oos_mse(model, self.validation.as_ref().ok_or(Error::EmptyHoldout)?),
        }
    }

    fn fit_one(&self, arch: &Architecture) -> Result<Candidate> {
        let cfg = self
            .config
            .fit_config
            .with_seed(candidate_seed(self.config.fit_config.seed, arch));
        let model = fit(arch, &self.train, &cfg)?;
        let objective = self.score(&model)?;
        Ok(Candidate { model, objective })
    }

    /// Fits (or recalls) every architecture; results follow input order.
    pub fn evaluate(&mut self, archs: &[Architecture]) -> Vec<Evaluated> {
        let missing: Vec<&Architecture> = {
            let mut seen = std::collections::HashSet::new();
            archs
                .iter()
                .filter(|a| !self.cache.contains_key(*a) && seen.insert(*a))
                .collect()
        };
        let fresh: Vec<Evaluated> = {
            let this = &*self;
            missing.par_iter().map(|a| Arc::new(this.fit_one(a))).collect()
        };
        for (a, r) in missing.into_iter().zip(fresh) {
            self.cache.insert(a.clone(), r);
        }
        archs.iter().map(|a| Arc::clone(&self.cache[a])).collect()
    }

    /// Fit and objective of a single architecture, through the same cache
    /// and seeds the search uses. Nothing is added to the trace.
    pub fn candidate(&mut self, arch: &Architecture) -> Result<Candidate> {
        arch.check_inputs(self.train.p())?;
        if arch.q() > self.config.q_max {
            return Err(Error::InvalidArchitecture(format!(
                "q = {} exceeds q_max = {}",
                arch.q(),
                self.config.q_max
            )));
        }
        match self.evaluate(std::slice::from_ref(arch)).remove(0).as_ref() {
            Ok(c) => Ok(c.clone()),
            Err(e) => Err(replay(e)),
        }
    }

    fn record(&mut self, phase: Phase, round: usize, arch: &Architecture, result: &Evaluated, accepted: bool) {
        let (objective, diagnostics, status) = match result.as_ref() {
            Ok(c) => (
                Some(c.objective),
                Some(c.model.diagnostics),
                if accepted { StepStatus::Accepted } else { StepStatus::Rejected },
            ),
            Err(e) => (None, None, StepStatus::Failed(e.to_string())),
        };
        if accepted {
            if let Some(v) = objective {
                self.last_accepted = Some((arch.clone(), v));
            }
        }
        self.trace.steps.push(TraceStep {
            phase,
            round,
            arch: arch.clone(),
            objective,
            diagnostics,
            status,
        });
    }

    /// Objective of `arch`, recording it as the phase's starting model unless
    /// it is already the most recently accepted architecture.
    fn incumbent(&mut self, phase: Phase, arch: &Architecture) -> Result<f64> {
        if let Some((a, v)) = &self.last_accepted {
            if a == arch {
                return Ok(*v);
            }
        }
        let r = self.evaluate(std::slice::from_ref(arch)).remove(0);
        self.record(phase, 0, arch, &r, r.is_ok());
        match r.as_ref() {
            Ok(c) => Ok(c.objective),
            Err(_) => Err(Error::NoViableCandidate(phase_name(phase))),
        }
    }

    fn check_inputs(&self, inputs: &[usize]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("input set must not be empty".into()));
        }
        Architecture::new(inputs.iter().copied(), 1)?.check_inputs(self.train.p())
    }

    /// Fits `q = 1..=q_max` on `inputs` and returns the minimiser (ties go
    /// to the smaller `q`).
    pub fn hidden_phase(&mut self, inputs: &[usize]) -> Result<usize> {
        self.check_inputs(inputs)?;
        let archs = (1..=self.config.q_max)
            .map(|q| Architecture::new(inputs.iter().copied(), q))
            .collect::<Result<Vec<_>>>()?;
        let results = self.evaluate(&archs);
        let best = argmin(&results).ok_or(Error::NoViableCandidate("hidden-node"))?;

        // an incoming model with the same inputs is only replaced on strict improvement
        let keep = match &self.last_accepted {
            Some((a, v)) if a.inputs() == inputs => {
                let best_value = results[best].as_ref().as_ref().map(|c| c.objective).unwrap();
                (!(best_value < *v)).then(|| a.q())
            }
            _ => None,
        };
        for (i, (a, r)) in archs.iter().zip(&results).enumerate() {
            self.record(Phase::Hidden, 1, a, r, keep.is_none() && i == best);
        }
        Ok(keep.unwrap_or(archs[best].q()))
    }

    /// Backward elimination of inputs at fixed `q`.
    pub fn input_phase(&mut self, inputs: &[usize], q: usize) -> Result<Vec<usize>> {
        self.check_inputs(inputs)?;
        let mut current = Architecture::new(inputs.iter().copied(), q)?;
        let mut value = self.incumbent(Phase::Input, &current)?;
        let mut round = 1;
        while current.p() > 1 {
            let archs: Vec<Architecture> = current
                .inputs()
                .iter()
                .map(|&j| current.without_input(j))
                .collect();
            let results = self.evaluate(&archs);
            let best = argmin(&results).ok_or(Error::NoViableCandidate("input-node"))?;
            let best_value = objective_of(&results[best]).unwrap();
            let improves = best_value < value;
            for (i, (a, r)) in archs.iter().zip(&results).enumerate() {
                self.record(Phase::Input, round, a, r, improves && i == best);
            }
            if !improves {
                break;
            }
            current = archs[best].clone();
            value = best_value;
            round += 1;
        }
        Ok(current.inputs().to_vec())
    }

    /// Alternating single-step hidden and input moves from `start` until a
    /// full round accepts nothing.
    pub fn fine_tune(&mut self, start: &Architecture) -> Result<Architecture> {
        self.check_inputs(start.inputs())?;
        if start.q() > self.config.q_max {
            return Err(Error::InvalidArchitecture(format!(
                "starting q = {} exceeds q_max = {}",
                start.q(),
                self.config.q_max
            )));
        }
        let p_max = self.train.p();
        let mut current = start.clone();
        let mut value = self.incumbent(Phase::FineTune, &current)?;
        let mut round = 1;
        loop {
            let mut moved = false;

            // hidden move: q - 1 listed first so it wins ties
            let mut h_moves = Vec::new();
            if current.q() > 1 {
                h_moves.push(current.with_hidden(current.q() - 1)?);
            }
            if current.q() < self.config.q_max {
                h_moves.push(current.with_hidden(current.q() + 1)?);
            }
            if let Some((arch, v)) = self.try_moves(&h_moves, value, round) {
                current = arch;
                value = v;
                moved = true;
            }
            round += 1;

            // input move: removals (ascending index) then additions
            let mut i_moves = Vec::new();
            if current.p() > 1 {
                i_moves.extend(current.inputs().iter().map(|&j| current.without_input(j)));
            }
            i_moves.extend(
                (0..p_max)
                    .filter(|&j| !current.has_input(j))
                    .map(|j| current.with_input(j)),
            );
            if let Some((arch, v)) = self.try_moves(&i_moves, value, round) {
                current = arch;
                value = v;
                moved = true;
            }
            round += 1;

            if !moved {
                return Ok(current);
            }
        }
    }

    fn try_moves(&mut self, archs: &[Architecture], value: f64, round: usize) -> Option<(Architecture, f64)> {
        if archs.is_empty() {
            return None;
        }
        let results = self.evaluate(archs);
        let best = argmin(&results).filter(|&b| objective_of(&results[b]).unwrap() < value);
        for (i, (a, r)) in archs.iter().zip(&results).enumerate() {
            self.record(Phase::FineTune, round, a, r, Some(i) == best);
        }
        best.map(|b| (archs[b].clone(), objective_of(&results[b]).unwrap()))
    }

    /// Runs the configured strategy from the full model.
    pub fn run(mut self) -> Result<SelectionOutcome> {
        let all: Vec<usize> = (0..self.train.p()).collect();
        let q_max = self.config.q_max;
        let arch = match self.config.strategy {
            Strategy::Hif | Strategy::Hi => {
                let q = self.hidden_phase(&all)?;
                let inputs = self.input_phase(&all, q)?;
                let arch = Architecture::new(inputs, q)?;
                if self.config.strategy == Strategy::Hif {
                    self.fine_tune(&arch)?
                } else {
                    arch
                }
            }
            Strategy::Ihf | Strategy::Ih => {
                let inputs = self.input_phase(&all, self.config.input_first_q.unwrap_or(q_max))?;
                let q = self.hidden_phase(&inputs)?;
                let arch = Architecture::new(inputs, q)?;
                if self.config.strategy == Strategy::Ihf {
                    self.fine_tune(&arch)?
                } else {
                    arch
                }
            }
            Strategy::F => self.fine_tune(&Architecture::full(self.train.p(), q_max)?)?,
        };
        // refitting with the same configuration reproduces the cached fit exactly
        let chosen = self.evaluate(std::slice::from_ref(&arch)).remove(0);
        let candidate = match chosen.as_ref() {
            Ok(c) => c.clone(),
            Err(_) => return Err(Error::NoViableCandidate("final")),
        };
        Ok(SelectionOutcome {
            model: candidate.model,
            objective: candidate.objective,
            fits: self.cache.len(),
            trace: self.trace,
        })
    }
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Hidden => "hidden-node",
        Phase::Input => "input-node",
        Phase::FineTune => "fine-tuning",
    }
}

/// Rebuilds a cached fit error; only fitting and scoring errors are cached.
fn replay(e: &Error) -> Error {
    match e {
        Error::DegenerateFit => Error::DegenerateFit,
        Error::AllStartsFailed => Error::AllStartsFailed,
        Error::EmptyHoldout => Error::EmptyHoldout,
        &Error::UnderdeterminedFit { n, k } => Error::UnderdeterminedFit { n, k },
        &Error::LengthMismatch { expected, got } => Error::LengthMismatch { expected, got },
        Error::NonFinite(s) => Error::NonFinite(s.clone()),
        Error::InvalidArchitecture(s) => Error::InvalidArchitecture(s.clone()),
        other => Error::InvalidConfig(other.to_string()),
    }
}

fn objective_of(r: &Evaluated) -> Option<f64> {
    r.as_ref().as_ref().ok().map(|c| c.objective)
}

/// Index of the smallest objective; the earliest wins ties.
fn argmin(results: &[Evaluated]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(v) = objective_of(r) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Runs the configured strategy on `data`.
pub fn select(data: &Dataset, config: &SelectionConfig) -> Result<SelectionOutcome> {
    Selector::new(data, *config)?.run()
}

/// Stand-alone hidden-node phase.
pub fn hidden_phase(data: &Dataset, inputs: &[usize], config: &SelectionConfig) -> Result<usize> {
    Selector::new(data, *config)?.hidden_phase(inputs)
}

/// Stand-alone input-node phase at fixed `q`.
pub fn input_phase(data: &Dataset, inputs: &[usize], q: usize, config: &SelectionConfig) -> Result<Vec<usize>> {
    Selector::new(data, *config)?.input_phase(inputs, q)
}

/// Stand-alone fine-tuning from `start`.
pub fn fine_tune(data: &Dataset, start: &Architecture, config: &SelectionConfig) -> Result<Architecture> {
    Selector::new(data, *config)?.fine_tune(start)
}
