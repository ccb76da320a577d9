//! Quality-value network `Q(state, action) ∈ (0,1)` and its replay memory.
//!
//! A plain fully connected network: tanh hidden layers, sigmoid output. Input
//! is the flattened `[E × S]` demand matrix followed by the `[S × E]` binary
//! placement encoding. Trained by mini-batch gradient descent on the mean
//! squared error between targets and predictions, with hand-written
//! backpropagation.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::ServiceRequest;
use crate::netmodel::{self, Placement};
use crate::scenario::{EdgeNode, TrainingConfig};
use crate::seed;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CriticError {
    #[error("input shape mismatch: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("loss over an empty batch")]
    EmptyBatch,
    #[error("average delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("replay holds {have} experiences, training needs {need}")]
    NotReady { have: usize, need: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Share of the tick's requests per (nearest edge zone, service), row-major by
/// edge. Sums to 1 when any vehicle is active, 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateObservation {
    pub num_edges: usize,
    pub num_services: usize,
    pub demand: Vec<f64>,
}

impl StateObservation {
    pub fn from_requests(requests: &[ServiceRequest], edges: &[EdgeNode], num_services: usize) -> Self {
        let mut demand = vec![0.0; edges.len() * num_services];
        for r in requests {
            let e = netmodel::nearest_edge(&r.location, edges) as usize - 1;
            demand[e * num_services + r.service_id as usize - 1] += 1.0;
        }
        if !requests.is_empty() {
            let n = requests.len() as f64;
            demand.iter_mut().for_each(|d| *d /= n);
        }
        Self {
            num_edges: edges.len(),
            num_services,
            demand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: StateObservation,
    /// `[S × E]` binary placement encoding.
    pub action: Vec<f64>,
    /// Regression target in (0,1].
    pub target: f64,
}

impl Experience {
    pub fn new(state: StateObservation, action: &Placement, target: f64) -> Self {
        let action = action.encode(state.num_edges);
        Self { state, action, target }
    }

    fn features(&self) -> Vec<f64> {
        let mut x = self.state.demand.clone();
        x.extend_from_slice(&self.action);
        x
    }
}

/// Bounded FIFO of experiences; the oldest is evicted when full.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buf: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buf.iter()
    }

    /// `n` distinct entries drawn uniformly; all of them if `n ≥ len`.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        let n = n.min(self.buf.len());
        rand::seq::index::sample(rng, self.buf.len(), n)
            .into_iter()
            .map(|i| &self.buf[i])
            .collect()
    }
}

/// Quality target for an observed mean delay: `exp(-delay / scale)`.
pub fn target_value(avg_delay: f64, quality_scale: f64) -> Result<f64, CriticError> {
    if !(avg_delay > 0.0) {
        return Err(CriticError::NonPositiveDelay(avg_delay));
    }
    Ok((-avg_delay / quality_scale).exp())
}

/// `(1/N) Σ (y_i − q_i)²`.
pub fn mse_loss(targets: &[f64], predictions: &[f64]) -> Result<f64, CriticError> {
    if targets.is_empty() {
        return Err(CriticError::EmptyBatch);
    }
    if targets.len() != predictions.len() {
        return Err(CriticError::Shape {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    let sum: f64 = targets.iter().zip(predictions).map(|(y, q)| (y - q) * (y - q)).sum();
    Ok(sum / targets.len() as f64)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `[n_out × n_in]`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.biases.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
        }));
    }

    fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Network parameters θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    input_dim: usize,
    layers: Vec<Dense>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    critic: Critic,
}

impl Critic {
    /// Xavier-uniform weights and zero biases, from `seed`.
    pub fn new(num_edges: usize, num_services: usize, hidden: &[usize], seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let input_dim = 2 * num_edges * num_services;
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.gen_range(-limit..=limit)).collect(),
                    biases: vec![0.0; n_out],
                }
            })
            .collect();
        Self { input_dim, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter vector length");
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), CriticError> {
        if x.len() != self.input_dim {
            return Err(CriticError::Shape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activations, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            l.forward(acts.last().unwrap(), &mut z);
            if i == last {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            } else {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, CriticError> {
        self.check(features)?;
        Ok(self.activations(features).last().unwrap()[0])
    }

    pub fn quality(&self, state: &StateObservation, action: &Placement) -> Result<f64, CriticError> {
        let mut x = state.demand.clone();
        x.extend(action.encode(state.num_edges));
        self.predict(&x)
    }

    pub fn loss(&self, batch: &[&Experience]) -> Result<f64, CriticError> {
        if batch.is_empty() {
            return Err(CriticError::EmptyBatch);
        }
        let targets: Vec<f64> = batch.iter().map(|e| e.target).collect();
        let preds = batch
            .iter()
            .map(|e| self.predict(&e.features()))
            .collect::<Result<Vec<_>, _>>()?;
        mse_loss(&targets, &preds)
    }

    /// Loss and its gradient with respect to [`Critic::params`] order.
    pub fn gradient(&self, batch: &[&Experience]) -> Result<(f64, Vec<f64>), CriticError> {
        if batch.is_empty() {
            return Err(CriticError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
            .collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for exp in batch {
            let x = exp.features();
            self.check(&x)?;
            let acts = self.activations(&x);
            let q = acts[last + 1][0];
            let err = exp.target - q;
            loss += err * err;
            // dL/dz at the output through the sigmoid
            let mut delta = vec![-2.0 * err / n * q * (1.0 - q)];
            for li in (0..=last).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.n_out {
                    gb[o] += delta[o];
                    let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += delta[o] * xi;
                    }
                }
                if li > 0 {
                    // back through the tanh of the previous layer
                    delta = (0..layer.n_in)
                        .map(|i| {
                            let s: f64 = (0..layer.n_out).map(|o| layer.weights[o * layer.n_in + i] * delta[o]).sum();
                            s * (1.0 - input[i] * input[i])
                        })
                        .collect();
                }
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        Ok((loss / n, flat))
    }

    /// One gradient-descent step on a uniformly sampled mini-batch. Returns
    /// the batch loss measured before the step.
    pub fn train_step<R: Rng>(
        &mut self,
        replay: &ReplayMemory,
        cfg: &TrainingConfig,
        rng: &mut R,
    ) -> Result<f64, CriticError> {
        if replay.len() < cfg.batch_size {
            return Err(CriticError::NotReady {
                have: replay.len(),
                need: cfg.batch_size,
            });
        }
        let batch = replay.sample(cfg.batch_size, rng);
        let (loss, grad) = self.gradient(&batch)?;
        if cfg.learning_rate != 0.0 {
            let mut p = self.params();
            for (pi, gi) in p.iter_mut().zip(&grad) {
                *pi -= cfg.learning_rate * gi;
            }
            self.set_params(&p);
        }
        Ok(loss)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Checkpoint {
            version: CHECKPOINT_VERSION,
            critic: self.clone(),
        })
        .expect("critic serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CriticError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| CriticError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(CriticError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        Ok(ck.critic)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CriticError> {
        let text = std::fs::read_to_string(path).map_err(|e| CriticError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn exp(target: f64, seed_value: u64) -> Experience {
        let mut rng = seed::rng(seed_value);
        let state = StateObservation {
            num_edges: 2,
            num_services: 2,
            demand: (0..4).map(|_| rng.gen_range(0.0..0.5)).collect(),
        };
        Experience {
            state,
            action: (0..4).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect(),
            target,
        }
    }

    #[test]
    fn mse_unit_values() {
        assert!((mse_loss(&[0.5], &[0.3]).unwrap() - 0.04).abs() <= 1e-12);
        assert_eq!(mse_loss(&[0.2, 0.7], &[0.2, 0.7]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[], &[]), Err(CriticError::EmptyBatch));
    }

    #[test]
    fn target_value_shape() {
        assert!((target_value(20.0, 20.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(target_value(1e-9, 20.0).unwrap() > 0.999_999);
        assert!(target_value(5.0, 20.0).unwrap() > target_value(6.0, 20.0).unwrap());
        assert!(target_value(0.0, 20.0).is_err());
        assert!(target_value(-1.0, 20.0).is_err());
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut c = Critic::new(2, 2, &[4], 1);
        let zeros = vec![0.0; c.num_params()];
        c.set_params(&zeros);
        assert_eq!(c.predict(&[0.3, 0.1, 0.2, 0.4, 1.0, 0.0, 1.0, 1.0]).unwrap(), 0.5);
        // bias on the output head alone
        let mut p = zeros;
        *p.last_mut().unwrap() = 1.0;
        c.set_params(&p);
        assert_eq!(c.predict(&[0.0; 8]).unwrap(), sigmoid(1.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let c = Critic::new(2, 2, &[4], 1);
        assert_eq!(c.predict(&[0.0; 5]), Err(CriticError::Shape { expected: 8, got: 5 }));
    }

    #[test]
    fn quality_is_deterministic_and_bounded() {
        let a = Critic::new(6, 8, &[64, 64], 42);
        let b = Critic::new(6, 8, &[64, 64], 42);
        let state = StateObservation {
            num_edges: 6,
            num_services: 8,
            demand: vec![1.0 / 48.0; 48],
        };
        let p = Placement::empty(8);
        let q = a.quality(&state, &p).unwrap();
        assert_eq!(q.to_bits(), b.quality(&state, &p).unwrap().to_bits());
        assert!(q > 0.0 && q < 1.0);
    }

    #[test]
    fn replay_ring_keeps_newest() {
        let mut r = ReplayMemory::new(3);
        for i in 0..4 {
            r.push(exp(i as f64 / 10.0, i));
        }
        let targets: Vec<f64> = r.iter().map(|e| e.target).collect();
        assert_eq!(targets, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn replay_sampling() {
        let mut r = ReplayMemory::new(10);
        r.push(exp(0.4, 1));
        let s = r.sample(1, &mut seed::rng(0));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].target, 0.4);
        for i in 0..9 {
            r.push(exp(i as f64 / 10.0, i));
        }
        let a: Vec<f64> = r.sample(4, &mut seed::rng(3)).iter().map(|e| e.target).collect();
        let b: Vec<f64> = r.sample(4, &mut seed::rng(3)).iter().map(|e| e.target).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn underfull_replay_is_not_ready() {
        let mut c = Critic::new(2, 2, &[4], 1);
        let mut r = ReplayMemory::new(8);
        r.push(exp(0.5, 1));
        let cfg = TrainingConfig {
            batch_size: 2,
            ..TrainingConfig::default()
        };
        assert_eq!(
            c.train_step(&r, &cfg, &mut seed::rng(0)),
            Err(CriticError::NotReady { have: 1, need: 2 })
        );
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut c = Critic::new(2, 2, &[4], 1);
        let before = c.params();
        let mut r = ReplayMemory::new(8);
        for i in 0..4 {
            r.push(exp(0.9, i));
        }
        let cfg = TrainingConfig {
            batch_size: 2,
            learning_rate: 0.0,
            ..TrainingConfig::default()
        };
        c.train_step(&r, &cfg, &mut seed::rng(0)).unwrap();
        assert_eq!(c.params(), before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = Critic::new(6, 8, &[16, 8], 3);
        let back = Critic::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let bad = c.to_json().replace("\"version\":1", "\"version\":9");
        assert!(Critic::from_json(&bad).is_err());
    }

    #[test]
    fn state_observation_sums_to_one() {
        let cfg = ScenarioConfig::baseline();
        let reqs: Vec<ServiceRequest> = (0..10)
            .map(|i| ServiceRequest {
                vehicle_id: i,
                service_id: i % 8 + 1,
                location: crate::geo::Point::new(i as f64 * 1_000.0, 3_000.0),
                time: 1,
            })
            .collect();
        let s = StateObservation::from_requests(&reqs, &cfg.edges, 8);
        assert!((s.demand.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let empty = StateObservation::from_requests(&[], &cfg.edges, 8);
        assert_eq!(empty.demand.iter().sum::<f64>(), 0.0);
    }
}
