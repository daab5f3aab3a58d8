use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{self, LeastSquares, LmConfig, Termination};

/// Target range of the logistic output after normalisation.
pub const TARGET_LO: f64 = 0.05;
pub const TARGET_HI: f64 = 0.95;

/// Feed-forward network with tanh hidden units and one logistic output.
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its weights
/// are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn random(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return invalid(format!("layer sizes must be positive and end in 1: {sizes:?}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push((0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sizes.len() >= 2
            && self.sizes.last() == Some(&1)
            && self.weights.len() == self.sizes.len() - 1
            && self.biases.len() == self.sizes.len() - 1
            && self.sizes.windows(2).zip(&self.weights).all(|(s, w)| w.len() == s[0] * s[1])
            && self.sizes.windows(2).zip(&self.biases).all(|(s, b)| b.len() == s[1]);
        if !ok {
            return Err(Error::Format(format!("inconsistent network layout {:?}", self.sizes)));
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn to_params(&self) -> DVector<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        DVector::from_vec(p)
    }

    pub fn set_params(&mut self, p: &DVector<f64>) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p.as_slice()[k..k + nw]);
            k += nw;
            b.copy_from_slice(&p.as_slice()[k..k + nb]);
            k += nb;
        }
    }

    /// Activations of every layer, input first; the last holds the output.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a = &acts[l];
            let w = &self.weights[l];
            let out: Vec<f64> = (0..n_out)
                .map(|j| {
                    let z = self.biases[l][j] + (0..n_in).map(|i| w[j * n_in + i] * a[i]).sum::<f64>();
                    if l + 1 == n_layers {
                        logistic(z)
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Output in (0, 1).
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_all(x).last().expect("at least one layer")[0]
    }

    /// Output and its gradient with respect to the flattened parameters.
    fn forward_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let acts = self.forward_all(x);
        let n_layers = self.weights.len();
        let y = acts[n_layers][0];
        // offsets of each layer's block in the flattened parameter vector
        let mut offsets = Vec::with_capacity(n_layers);
        let mut k = 0;
        for l in 0..n_layers {
            offsets.push(k);
            k += self.weights[l].len() + self.biases[l].len();
        }
        let mut delta = vec![y * (1.0 - y)];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a = &acts[l];
            let off = offsets[l];
            for j in 0..n_out {
                for i in 0..n_in {
                    grad[off + j * n_in + i] = delta[j] * a[i];
                }
                grad[off + n_in * n_out + j] = delta[j];
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|i| {
                        let s: f64 = (0..n_out).map(|j| w[j * n_in + i] * delta[j]).sum();
                        s * (1.0 - a[i] * a[i])
                    })
                    .collect();
            }
        }
        y
    }
}

/// Min-max scaling of inputs to [-1, 1] and of log-targets to
/// [`TARGET_LO`, `TARGET_HI`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    /// Bounds of `ln(target)` over the training set.
    pub log_target_min: f64,
    pub log_target_max: f64,
}

impl Normalizer {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let d = inputs.first().map_or(0, Vec::len);
        if d == 0 || inputs.iter().any(|r| r.len() != d) {
            return invalid("inputs must be non-empty rows of equal width");
        }
        if targets.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return invalid("targets must be positive and finite");
        }
        let mut input_min = vec![f64::INFINITY; d];
        let mut input_max = vec![f64::NEG_INFINITY; d];
        for r in inputs {
            for i in 0..d {
                input_min[i] = input_min[i].min(r[i]);
                input_max[i] = input_max[i].max(r[i]);
            }
        }
        let logs = targets.iter().map(|t| t.ln());
        let log_target_min = logs.clone().fold(f64::INFINITY, f64::min);
        let log_target_max = logs.fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            input_min,
            input_max,
            log_target_min,
            log_target_max,
        })
    }

    pub fn input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .map(|(v, (lo, hi))| if hi > lo { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 })
            .collect()
    }

    pub fn target(&self, t: f64) -> f64 {
        let span = self.log_target_max - self.log_target_min;
        if span > 0.0 {
            TARGET_LO + (TARGET_HI - TARGET_LO) * (t.ln() - self.log_target_min) / span
        } else {
            0.5
        }
    }

    /// Inverse of [`Normalizer::target`]; outputs outside the training
    /// band are clamped to it, so predictions stay within the training
    /// target range and strictly positive.
    pub fn denormalize(&self, y: f64) -> f64 {
        let span = self.log_target_max - self.log_target_min;
        if !(span > 0.0) {
            return self.log_target_min.exp();
        }
        let u = ((y - TARGET_LO) / (TARGET_HI - TARGET_LO)).clamp(0.0, 1.0);
        (self.log_target_min + u * span).exp()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    pub net: Mlp,
    pub norm: Normalizer,
}

impl MlpRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.norm.denormalize(self.net.forward(&self.norm.input(x)))
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        let d = self.net.n_inputs();
        if self.norm.input_min.len() != d || self.norm.input_max.len() != d {
            return Err(Error::Format("normaliser width does not match the network".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    /// Relative cost decrease below which an epoch counts as stagnant.
    pub rel_tol: f64,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10],
            max_epochs: 500,
            rel_tol: 1e-6,
            patience: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean squared error on normalised targets.
    pub mse: f64,
    pub termination: Termination,
}

struct MlpProblem<'a> {
    template: Mlp,
    inputs: &'a [Vec<f64>],
    targets: &'a [f64],
}

impl LeastSquares for MlpProblem<'_> {
    fn n_params(&self) -> usize {
        self.template.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.targets.len()
    }

    fn residuals(&self, p: &DVector<f64>, out: &mut DVector<f64>) {
        let mut net = self.template.clone();
        net.set_params(p);
        for (o, (x, t)) in out.iter_mut().zip(self.inputs.iter().zip(self.targets)) {
            *o = net.forward(x) - t;
        }
    }

    fn jacobian(&self, p: &DVector<f64>, jac: &mut DMatrix<f64>) {
        let mut net = self.template.clone();
        net.set_params(p);
        let mut g = vec![0.0; p.len()];
        for (r, x) in self.inputs.iter().enumerate() {
            net.forward_grad(x, &mut g);
            for (c, v) in g.iter().enumerate() {
                jac[(r, c)] = *v;
            }
        }
    }
}

/// Fit one regressor by Levenberg-Marquardt on the mean squared error of
/// normalised targets.
pub fn train_mlp(inputs: &[Vec<f64>], targets: &[f64], cfg: &TrainConfig, seed: u64) -> Result<(MlpRegressor, TrainReport)> {
    if inputs.len() != targets.len() {
        return invalid("inputs and targets differ in length");
    }
    if inputs.len() < 50 {
        return invalid(format!("need at least 50 samples to train, got {}", inputs.len()));
    }
    let norm = Normalizer::fit(inputs, targets)?;
    let xs: Vec<Vec<f64>> = inputs.iter().map(|x| norm.input(x)).collect();
    let ys: Vec<f64> = targets.iter().map(|t| norm.target(*t)).collect();
    let mut sizes = vec![norm.input_min.len()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let net = Mlp::random(&sizes, seed)?;
    let problem = MlpProblem {
        template: net.clone(),
        inputs: &xs,
        targets: &ys,
    };
    let lm = LmConfig {
        max_iter: cfg.max_epochs,
        rel_tol: cfg.rel_tol,
        patience: cfg.patience,
        mu_max: 1e12,
        ..LmConfig::default()
    };
    let report = optim::minimize(&problem, net.to_params(), &lm);
    let mut net = net;
    net.set_params(&report.params);
    let model = MlpRegressor { net, norm };
    Ok((
        model,
        TrainReport {
            epochs: report.iterations,
            mse: 2.0 * report.cost / ys.len() as f64,
            termination: report.termination,
        },
    ))
}
