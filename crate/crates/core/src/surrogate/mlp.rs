use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, SurrogateError, TrainConfig};

/// Dense layer, weights row-major `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Feed-forward ReLU network with one linear output, plus the input min-max
/// ranges and output standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateModel {
    pub layers: Vec<Layer>,
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub output_mean: f64,
    pub output_std: f64,
}

/// He-uniform weights (limit `√(6 / fan_in)`), zero biases, identity
/// normalization.
pub fn init_model(dims: &[usize], seed: u64) -> Result<SurrogateModel, SurrogateError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(SurrogateError::InvalidDims);
    }
    if dims[dims.len() - 1] != 1 {
        return Err(SurrogateError::InvalidDims);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / inputs as f64);
            Layer {
                inputs,
                outputs,
                weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
                biases: alloc::vec![0.0; outputs],
            }
        })
        .collect();
    Ok(SurrogateModel {
        layers,
        input_min: alloc::vec![0.0; dims[0]],
        input_max: alloc::vec![1.0; dims[0]],
        output_mean: 0.0,
        output_std: 1.0,
    })
}

/// Per-sample activations reused across forward/backward passes.
#[derive(Debug, Default)]
struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn for_model(model: &SurrogateModel) -> Self {
        let mut acts = alloc::vec![alloc::vec![0.0; model.input_dim()]];
        acts.extend(model.layers.iter().map(|l| alloc::vec![0.0; l.outputs]));
        let deltas = model.layers.iter().map(|l| alloc::vec![0.0; l.outputs]).collect();
        Self { acts, deltas }
    }
}

impl SurrogateModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = alloc::vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Sets the same min-max input range on every dimension.
    pub fn with_input_range(mut self, min: f64, max: f64) -> Self {
        self.input_min.iter_mut().for_each(|m| *m = min);
        self.input_max.iter_mut().for_each(|m| *m = max);
        self
    }

    pub fn normalize_input(&self, x: &[f64], out: &mut [f64]) {
        for (k, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            let span = self.input_max[k] - self.input_min[k];
            *o = if span > 0.0 { (v - self.input_min[k]) / span } else { 0.0 };
        }
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.output_mean) / self.output_std
    }

    pub fn destandardize(&self, z: f64) -> f64 {
        z * self.output_std + self.output_mean
    }

    /// Raw network output on an already normalized input, leaving the
    /// activations in `ws`.
    fn forward_into(&self, ws: &mut Workspace) -> f64 {
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z = row.iter().zip(input.iter()).fold(layer.biases[o], |acc, (w, x)| acc + w * x);
                out[o] = if l < last && z < 0.0 { 0.0 } else { z };
            }
        }
        ws.acts[last + 1][0]
    }

    /// Predicted fitness for raw (unnormalized) input features.
    pub fn forward(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        if x.len() != self.input_dim() {
            return Err(SurrogateError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut ws = Workspace::for_model(self);
        self.normalize_input(x, &mut ws.acts[0]);
        Ok(self.destandardize(self.forward_into(&mut ws)))
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), SurrogateError> {
        if params.len() != self.param_count() {
            return Err(SurrogateError::DimensionMismatch { expected: self.param_count(), got: params.len() });
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.biases.len());
            l.weights.copy_from_slice(w);
            l.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Mean squared error of the raw output against `targets` over a batch of
    /// normalized inputs, and its gradient in [`params`](Self::params) order.
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = alloc::vec![0.0; self.param_count()];
        let mut ws = Workspace::for_model(self);
        let idx: Vec<usize> = (0..inputs.len()).collect();
        let loss = self.accumulate_batch(&mut ws, inputs, targets, &idx, &mut grad);
        (loss, grad)
    }

    fn accumulate_batch(
        &self,
        ws: &mut Workspace,
        inputs: &[Vec<f64>],
        targets: &[f64],
        batch: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &s in batch {
            ws.acts[0].copy_from_slice(&inputs[s]);
            let out = self.forward_into(ws);
            let err = out - targets[s];
            loss += err * err * scale;
            self.backward(ws, 2.0 * err * scale, grad);
        }
        loss
    }

    fn backward(&self, ws: &mut Workspace, output_delta: f64, grad: &mut [f64]) {
        let last = self.layers.len() - 1;
        ws.deltas[last][0] = output_delta;
        let mut offset = self.param_count();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            offset -= layer.param_count();
            let (gw, gb) = grad[offset..offset + layer.param_count()].split_at_mut(layer.weights.len());
            let input = &ws.acts[l];
            let (lower, upper) = ws.deltas.split_at_mut(l);
            let delta = &upper[0];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let prev = &mut lower[l - 1];
                for (i, p) in prev.iter_mut().enumerate() {
                    // ReLU gate: inactive units pass no gradient
                    *p = if input[i] > 0.0 {
                        (0..layer.outputs).map(|o| layer.weights[o * layer.inputs + i] * delta[o]).sum()
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}

/// Per-epoch mean training loss on standardized targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Fits `model` to `data` by mini-batch Adam on the mean squared error of
/// standardized targets.
///
/// Output standardization is recomputed from the dataset; the input ranges
/// of `model` are kept. Rows are reshuffled every epoch from `cfg.seed` and
/// the last short batch is used.
pub fn train(
    model: &SurrogateModel,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(SurrogateModel, TrainReport), SurrogateError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    if data.dim() != model.input_dim() {
        return Err(SurrogateError::DimensionMismatch { expected: model.input_dim(), got: data.dim() });
    }
    let n = data.len();
    let mean = data.targets().iter().sum::<f64>() / n as f64;
    let var = data.targets().iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let std = libm::sqrt(var);
    if !(std > 0.0) {
        return Err(SurrogateError::DegenerateTargets);
    }

    let mut model = model.clone();
    model.output_mean = mean;
    model.output_std = std;

    let inputs: Vec<Vec<f64>> = data
        .plans()
        .iter()
        .map(|p| {
            let mut x = alloc::vec![0.0; model.input_dim()];
            model.normalize_input(&p.to_features(), &mut x);
            x
        })
        .collect();
    let targets: Vec<f64> = data.targets().iter().map(|&y| model.standardize(y)).collect();

    let mut params = model.params();
    let mut grad = alloc::vec![0.0; params.len()];
    let mut m = alloc::vec![0.0; params.len()];
    let mut v = alloc::vec![0.0; params.len()];
    let mut step = 0i32;
    let mut ws = Workspace::for_model(&model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = model.accumulate_batch(&mut ws, &inputs, &targets, batch, &mut grad);
            epoch_loss += loss * batch.len() as f64;

            step += 1;
            let bc1 = 1.0 - libm::pow(cfg.beta1, f64::from(step));
            let bc2 = 1.0 - libm::pow(cfg.beta2, f64::from(step));
            for k in 0..params.len() {
                let g = grad[k];
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                params[k] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
            }
            model.set_params(&params)?;
        }
        report.epoch_losses.push(epoch_loss / n as f64);
    }
    Ok((model, report))
}
