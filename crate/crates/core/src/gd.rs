//! Full-batch gradient descent on finite-width networks.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, LeakyRelu};
use crate::error::{Error, Result};
use crate::network::{FiniteNetwork, Neuron, Source, GD_SOURCE};

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "mse" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            _ => Err(Error::InvalidConfig(format!("unknown loss '{s}' (expected squared or logistic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GDConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub target_loss: f64,
    pub max_epochs: u64,
    pub loss: LossKind,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for GDConfig {
    fn default() -> Self {
        Self {
            hidden: 1000,
            learning_rate: 0.01,
            init_std: 1e-3,
            target_loss: 1e-4,
            max_epochs: 10_000_000,
            loss: LossKind::Squared,
            seed: 0,
            alpha: 0.0,
        }
    }
}

impl GDConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be positive".into()));
        }
        positive("learning_rate", self.learning_rate)?;
        positive("init_std", self.init_std)?;
        positive("target_loss", self.target_loss)?;
        LeakyRelu::new(self.alpha)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TargetReached,
    EpochLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: FiniteNetwork,
    /// Loss before each gradient step, plus the final loss.
    pub trace: Vec<f64>,
    pub stop: StopReason,
    /// Gradient steps taken.
    pub epochs: u64,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }

    /// `epoch,loss` CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.trace.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

/// `log(1 + e^{-m})` without overflow.
fn logistic(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `d/df` of the per-sample loss at prediction `f` and label `y`.
fn loss_derivative(kind: LossKind, f: f64, y: f64) -> f64 {
    match kind {
        LossKind::Squared => 2.0 * (f - y),
        LossKind::Logistic => {
            let m = y * f;
            // -y / (1 + e^m), written to stay finite for large |m|
            if m > 0.0 {
                let e = (-m).exp();
                -y * e / (1.0 + e)
            } else {
                -y / (1.0 + m.exp())
            }
        }
    }
}

fn mean_loss(kind: LossKind, f: &[f64], y: &[f64]) -> f64 {
    let total: f64 = match kind {
        LossKind::Squared => f.iter().zip(y).map(|(f, y)| (f - y) * (f - y)).sum(),
        LossKind::Logistic => f.iter().zip(y).map(|(f, y)| logistic(y * f)).sum(),
    };
    total / f.len() as f64
}

/// Mean loss of `net` on `data`.
pub fn loss_value(net: &FiniteNetwork, data: &DataSet, loss: LossKind) -> Result<f64> {
    let f = net.predict_data(data)?;
    Ok(mean_loss(loss, &f, data.labels().as_slice()))
}

/// Exact gradient of the mean loss with respect to every parameter, returned
/// neuron by neuron as `(∂w, ∂b, ∂v)`. Uses slope 1 at a kink.
pub fn loss_gradient(net: &FiniteNetwork, data: &DataSet, loss: LossKind) -> Result<Vec<Neuron>> {
    if let Some(d) = net.dim() {
        if d != data.dim() {
            return Err(Error::DimensionMismatch { expected: d, got: data.dim() });
        }
    }
    let params = Params::from_network(net);
    let xs: Vec<&[f64]> = (0..data.len()).map(|i| data.point(i)).collect();
    let mut f = vec![0.0; data.len()];
    params.forward(&xs, net.alpha, &mut f);
    let mut r = vec![0.0; data.len()];
    residual_weights(loss, &f, data.labels().as_slice(), &mut r);
    let g = params.gradient(&xs, net.alpha, &r);
    let d = g.d;
    Ok((0..g.hidden()).map(|j| Neuron { w: g.w[j * d..(j + 1) * d].to_vec(), b: g.b[j], v: g.v[j] }).collect())
}

/// Parameters stored flat: `w` is `h × d` row-major.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    d: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    v: Vec<f64>,
}

impl Params {
    fn init(h: usize, d: usize, std: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| (0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<f64>>();
        let w = draw(h * d);
        let b = draw(h);
        let v = draw(h);
        Ok(Self { d, w, b, v })
    }

    fn hidden(&self) -> usize {
        self.v.len()
    }

    fn pre(&self, j: usize, x: &[f64]) -> f64 {
        let row = &self.w[j * self.d..(j + 1) * self.d];
        row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b[j]
    }

    fn forward(&self, xs: &[&[f64]], act: LeakyRelu, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.hidden() {
            let v = self.v[j];
            for (o, x) in out.iter_mut().zip(xs) {
                *o += v * act.apply(self.pre(j, x));
            }
        }
    }

    /// Gradient of the loss given `r[i] = dL/df(x_i)`, in the same layout.
    fn gradient(&self, xs: &[&[f64]], act: LeakyRelu, r: &[f64]) -> Params {
        let d = self.d;
        let h = self.hidden();
        let mut g = Params { d, w: vec![0.0; h * d], b: vec![0.0; h], v: vec![0.0; h] };
        for j in 0..h {
            let v = self.v[j];
            let gw = &mut g.w[j * d..(j + 1) * d];
            for (x, &ri) in xs.iter().zip(r) {
                let z = self.pre(j, x);
                g.v[j] += ri * act.apply(z);
                let back = ri * v * act.slope(z);
                g.b[j] += back;
                for (gk, xk) in gw.iter_mut().zip(x.iter()) {
                    *gk += back * xk;
                }
            }
        }
        g
    }

    fn step(&mut self, xs: &[&[f64]], act: LeakyRelu, r: &[f64], lr: f64) {
        let g = self.gradient(xs, act, r);
        for (p, g) in self.w.iter_mut().chain(&mut self.b).chain(&mut self.v).zip(g.w.iter().chain(&g.b).chain(&g.v)) {
            *p -= lr * g;
        }
    }

    fn from_network(net: &FiniteNetwork) -> Self {
        let d = net.dim().unwrap_or(0);
        Self {
            d,
            w: net.neurons.iter().flat_map(|n| n.w.iter().copied()).collect(),
            b: net.neurons.iter().map(|n| n.b).collect(),
            v: net.neurons.iter().map(|n| n.v).collect(),
        }
    }

    fn into_network(self, act: LeakyRelu, data_hash: String) -> FiniteNetwork {
        let d = self.d;
        let neurons = (0..self.hidden())
            .map(|j| Neuron { w: self.w[j * d..(j + 1) * d].to_vec(), b: self.b[j], v: self.v[j] })
            .collect();
        FiniteNetwork { alpha: act, neurons, source: Source { kind: GD_SOURCE.into(), data_hash } }
    }
}

fn residual_weights(kind: LossKind, f: &[f64], y: &[f64], r: &mut [f64]) {
    let n = f.len() as f64;
    for ((r, f), y) in r.iter_mut().zip(f).zip(y) {
        *r = loss_derivative(kind, *f, *y) / n;
    }
}

/// Trains an `h`-neuron network by full-batch gradient descent with a fixed
/// step size until the mean loss drops below the target.
pub fn train(data: &DataSet, config: &GDConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if config.loss == LossKind::Logistic {
        data.require_binary_labels()?;
    }
    let act = LeakyRelu::new(config.alpha)?;
    let mut params = Params::init(config.hidden, data.dim(), config.init_std, config.seed)?;
    let xs: Vec<&[f64]> = (0..data.len()).map(|i| data.point(i)).collect();
    let y = data.labels().as_slice();
    let mut f = vec![0.0; data.len()];
    let mut r = vec![0.0; data.len()];

    let mut trace = Vec::new();
    let mut epoch = 0u64;
    let stop = loop {
        params.forward(&xs, act, &mut f);
        let loss = mean_loss(config.loss, &f, y);
        trace.push(loss);
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(Error::Diverged { epoch, loss });
        }
        if loss < config.target_loss {
            break StopReason::TargetReached;
        }
        if epoch == config.max_epochs {
            break StopReason::EpochLimit;
        }
        residual_weights(config.loss, &f, y, &mut r);
        params.step(&xs, act, &r, config.learning_rate);
        epoch += 1;
    };
    Ok(TrainOutcome { network: params.into_network(act, data.digest()), trace, stop, epochs: epoch })
}
