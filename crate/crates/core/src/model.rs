//! Single-hidden-layer network: architecture, parameter layout, forward map
//! and the residual sum of squares with its exact gradient.
//!
//! Parameters live in one flat vector, hidden-node major:
//!
//! ```text
//! [w_01, w_11 .. w_p1,  w_02, w_12 .. w_p2,  ...,  w_0q .. w_pq,  g_0,  g_1 .. g_q]
//! ```
//!
//! where `w_0k` is the bias of hidden node `k`, `w_jk` connects the `j`-th
//! active input to node `k`, `g_0` is the output bias and `g_k` the output
//! weight of node `k`. The bias multiplies an implicit constant 1; no constant
//! column is stored in the data.

use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Logistic,
}

impl Activation {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            // exp is only ever taken of a non-positive argument
            Activation::Logistic => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative expressed through the activation's output `h = eval(z)`.
    #[inline]
    pub fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Logistic => h * (1.0 - h),
        }
    }
}

/// Number of network parameters, `(p + 2) q + 1`.
pub fn param_count(p: usize, q: usize) -> Result<usize> {
    if q == 0 {
        return Err(Error::InvalidArchitecture(
            "a network needs at least one hidden node".into(),
        ));
    }
    Ok((p + 2) * q + 1)
}

/// Active inputs (sorted, 0-based covariate indices) plus hidden-node count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Architecture {
    inputs: Vec<usize>,
    hidden: usize,
}

impl Architecture {
    pub fn new(inputs: impl IntoIterator<Item = usize>, hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArchitecture(
                "a network needs at least one hidden node".into(),
            ));
        }
        let mut inputs: Vec<usize> = inputs.into_iter().collect();
        inputs.sort_unstable();
        let before = inputs.len();
        inputs.dedup();
        if inputs.len() != before {
            return Err(Error::InvalidArchitecture("duplicate input index".into()));
        }
        Ok(Self { inputs, hidden })
    }

    /// All `p_max` covariates feeding `hidden` nodes.
    pub fn full(p_max: usize, hidden: usize) -> Result<Self> {
        Self::new(0..p_max, hidden)
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    /// Number of active inputs.
    pub fn p(&self) -> usize {
        self.inputs.len()
    }

    /// Number of hidden nodes.
    pub fn q(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        (self.p() + 2) * self.hidden + 1
    }

    pub fn has_input(&self, j: usize) -> bool {
        self.inputs.binary_search(&j).is_ok()
    }

    pub fn with_hidden(&self, hidden: usize) -> Result<Self> {
        Self::new(self.inputs.iter().copied(), hidden)
    }

    pub fn without_input(&self, j: usize) -> Self {
        Self {
            inputs: self.inputs.iter().copied().filter(|&i| i != j).collect(),
            hidden: self.hidden,
        }
    }

    pub fn with_input(&self, j: usize) -> Self {
        let mut inputs = self.inputs.clone();
        if let Err(pos) = inputs.binary_search(&j) {
            inputs.insert(pos, j);
        }
        Self {
            inputs,
            hidden: self.hidden,
        }
    }

    /// Fails when an input index is not below `p_max`.
    pub fn check_inputs(&self, p_max: usize) -> Result<()> {
        match self.inputs.last() {
            Some(&j) if j >= p_max => Err(Error::InvalidArchitecture(format!(
                "input index {j} outside the {p_max} available covariates"
            ))),
            _ => Ok(()),
        }
    }

    /// Input list rendered with covariate names.
    pub fn describe(&self, names: &[String]) -> String {
        self.inputs
            .iter()
            .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("#{j}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inputs=[")?;
        for (i, j) in self.inputs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "] q={}", self.hidden)
    }
}

/// One hidden node: bias followed by one weight per active input.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenUnit {
    pub bias: f64,
    pub weights: Vec<f64>,
}

/// Structured view of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub hidden: Vec<HiddenUnit>,
    pub output_bias: f64,
    pub output_weights: Vec<f64>,
}

impl NetworkWeights {
    pub fn pack(&self) -> Result<ParamVector> {
        let q = self.hidden.len();
        if q == 0 || self.output_weights.len() != q {
            return Err(Error::InvalidArchitecture(format!(
                "{q} hidden units but {} output weights",
                self.output_weights.len()
            )));
        }
        let p = self.hidden[0].weights.len();
        if self.hidden.iter().any(|u| u.weights.len() != p) {
            return Err(Error::InvalidArchitecture(
                "hidden units disagree on input count".into(),
            ));
        }
        let mut theta = Vec::with_capacity((p + 2) * q + 1);
        for unit in &self.hidden {
            theta.push(unit.bias);
            theta.extend_from_slice(&unit.weights);
        }
        theta.push(self.output_bias);
        theta.extend_from_slice(&self.output_weights);
        Ok(ParamVector { theta, p, q })
    }
}

/// Flat parameter vector in the hidden-node-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    theta: Vec<f64>,
    p: usize,
    q: usize,
}

impl ParamVector {
    pub fn new(arch: &Architecture, theta: Vec<f64>) -> Result<Self> {
        let expected = arch.param_count();
        if theta.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: theta.len(),
            });
        }
        Ok(Self {
            theta,
            p: arch.p(),
            q: arch.q(),
        })
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            theta: vec![0.0; arch.param_count()],
            p: arch.p(),
            q: arch.q(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn stride(&self) -> usize {
        self.p + 1
    }

    /// Index of `w_0k` (`k` is 0-based).
    pub fn hidden_bias_index(&self, k: usize) -> usize {
        k * self.stride()
    }

    /// Index of the weight joining active input `j` (0-based position within
    /// the input mask) to hidden node `k`.
    pub fn input_weight_index(&self, k: usize, j: usize) -> usize {
        k * self.stride() + 1 + j
    }

    pub fn output_bias_index(&self) -> usize {
        self.q * self.stride()
    }

    /// Index of `g_k` for 0-based hidden node `k`.
    pub fn output_weight_index(&self, k: usize) -> usize {
        self.output_bias_index() + 1 + k
    }

    pub fn output_bias(&self) -> f64 {
        self.theta[self.output_bias_index()]
    }

    pub fn output_weight(&self, k: usize) -> f64 {
        self.theta[self.output_weight_index(k)]
    }

    pub fn unpack(&self) -> NetworkWeights {
        let s = self.stride();
        let hidden = (0..self.q)
            .map(|k| HiddenUnit {
                bias: self.theta[k * s],
                weights: self.theta[k * s + 1..(k + 1) * s].to_vec(),
            })
            .collect();
        let ob = self.output_bias_index();
        NetworkWeights {
            hidden,
            output_bias: self.theta[ob],
            output_weights: self.theta[ob + 1..].to_vec(),
        }
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        let expected = arch.param_count();
        if self.theta.len() != expected || self.p != arch.p() || self.q != arch.q() {
            return Err(Error::LengthMismatch {
                expected,
                got: self.theta.len(),
            });
        }
        Ok(())
    }
}

/// Network output for one full covariate row (indexed by covariate, not by
/// position within the mask).
pub fn forward(arch: &Architecture, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    theta.check(arch)?;
    if let Some(&j) = arch.inputs().last() {
        if j >= x.len() {
            return Err(Error::InvalidArchitecture(format!(
                "row has {} covariates, input {j} requested",
                x.len()
            )));
        }
    }
    if let Some(&j) = arch.inputs().iter().find(|&&j| !x[j].is_finite()) {
        return Err(Error::NonFinite(format!("covariate {j} = {}", x[j])));
    }
    let mut buf = Vec::with_capacity(arch.p());
    buf.extend(arch.inputs().iter().map(|&j| x[j]));
    Ok(eval_row(Activation::Logistic, theta.as_slice(), arch.p(), arch.q(), &buf))
}

#[inline]
fn eval_row(act: Activation, theta: &[f64], p: usize, q: usize, x: &[f64]) -> f64 {
    let s = p + 1;
    let ob = q * s;
    let mut out = theta[ob];
    for k in 0..q {
        let w = &theta[k * s..(k + 1) * s];
        let z = w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        out += theta[ob + 1 + k] * act.eval(z);
    }
    out
}

/// Predictions for every row of `data`.
pub fn predict_batch(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
    theta.check(arch)?;
    arch.check_inputs(data.p())?;
    let design = ActiveDesign::new(arch, data);
    Ok((0..design.n)
        .map(|i| eval_row(Activation::Logistic, theta.as_slice(), design.p, design.q, design.row(i)))
        .collect())
}

/// Residual sum of squares of the network on `data`.
pub fn rss(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    theta.check(arch)?;
    arch.check_inputs(data.p())?;
    let design = ActiveDesign::new(arch, data);
    let value = design.rss(theta.as_slice());
    finite(value)
}

/// Gradient of [`rss`] in the parameter layout.
pub fn rss_gradient(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
    theta.check(arch)?;
    arch.check_inputs(data.p())?;
    let design = ActiveDesign::new(arch, data);
    let mut grad = vec![0.0; theta.len()];
    let value = design.rss_and_gradient(theta.as_slice(), &mut grad);
    finite(value)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("rss gradient".into()));
    }
    Ok(grad)
}

fn finite(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("residual sum of squares = {value}")))
    }
}

/// Active covariate columns gathered into a compact row-major block, so the
/// inner loops run over contiguous memory.
#[derive(Debug, Clone)]
pub(crate) struct ActiveDesign<'a> {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    x: Vec<f64>,
    pub y: &'a [f64],
    act: Activation,
}

impl<'a> ActiveDesign<'a> {
    pub fn new(arch: &Architecture, data: &'a Dataset) -> Self {
        let p = arch.p();
        let mut x = Vec::with_capacity(data.n() * p);
        for row in data.rows() {
            x.extend(arch.inputs().iter().map(|&j| row[j]));
        }
        Self {
            n: data.n(),
            p,
            q: arch.q(),
            x,
            y: data.response(),
            act: Activation::Logistic,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rss(&self, theta: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let r = self.y[i] - eval_row(self.act, theta, self.p, self.q, self.row(i));
                r * r
            })
            .sum()
    }

    /// Writes the gradient into `grad` (overwritten) and returns the RSS.
    pub fn rss_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (p, q) = (self.p, self.q);
        let s = p + 1;
        let ob = q * s;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut hidden = vec![0.0; q];
        let mut total = 0.0;
        for i in 0..self.n {
            let x = self.row(i);
            let mut out = theta[ob];
            for (k, h) in hidden.iter_mut().enumerate() {
                let w = &theta[k * s..(k + 1) * s];
                let z = w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                *h = self.act.eval(z);
                out += theta[ob + 1 + k] * *h;
            }
            let r = self.y[i] - out;
            total += r * r;
            // d(r^2)/d(out) = -2r
            let d_out = -2.0 * r;
            grad[ob] += d_out;
            for (k, &h) in hidden.iter().enumerate() {
                grad[ob + 1 + k] += d_out * h;
                let delta = d_out * theta[ob + 1 + k] * self.act.derivative_from_output(h);
                let g = &mut grad[k * s..(k + 1) * s];
                g[0] += delta;
                for (gj, xj) in g[1..].iter_mut().zip(x) {
                    *gj += delta * xj;
                }
            }
        }
        total
    }
}
