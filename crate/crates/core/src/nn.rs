//! Dense feed-forward networks with explicit reverse-mode gradients.
//!
//! Everything here is `f64`. A [`DenseNet`] is an ordered list of [`Dense`]
//! layers, each computing `y = activation(W x + b)` with `W` stored row-major
//! as `rows × cols` (`out × in`). [`DenseNet::forward`] keeps every
//! intermediate value so [`DenseNet::backward`] can run without recomputing.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// dy/dz given the pre-activation `z` and the output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let layer = Dense { rows, cols, weights, bias, activation };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(rows: usize, cols: usize, activation: Activation) -> Self {
        Dense { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows], activation }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let weights = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Dense { rows, cols, weights, bias: vec![0.0; rows], activation }
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::contract("layer dimensions must be positive"));
        }
        if self.weights.len() != self.rows * self.cols || self.bias.len() != self.rows {
            return Err(Error::contract(format!(
                "layer {}x{} has {} weights and {} biases",
                self.rows,
                self.cols,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if !self.weights.iter().chain(&self.bias).all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite layer parameter".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Row `r` of the weight matrix (the fan-in weights of output unit `r`).
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.cols)
                .zip(&self.bias)
                .map(|(row, b)| b + dot(row, x)),
        );
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every layer's input, pre-activation and output from one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `inputs[k]` is the input to layer `k`; `inputs[0]` is the network input.
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shaped exactly like the network that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in self.values_mut() {
            *v = 0.0;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::contract("gradient shapes differ"));
        }
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn same_shape(&self, other: &Gradients) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
            })
    }

    fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len()
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        for l in &layers {
            l.validate()?;
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].rows != pair[1].cols {
                return Err(Error::contract(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].rows,
                    k + 1,
                    pair[1].cols
                )));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Glorot-initialized network. `sizes` lists every width including input
    /// and output; `activations` has one entry per layer.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::contract("need one activation per layer and at least two sizes"));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::glorot(w[1], w[0], act, rng))
            .collect();
        DenseNet::from_layers(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut acts = Activations {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut input = x.to_vec();
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.rows);
            layer.affine(&input, &mut z);
            let y: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            acts.inputs.push(input);
            acts.pre.push(z);
            input = y.clone();
            acts.post.push(y);
        }
        Ok(acts)
    }

    /// Output only; no intermediate values are kept.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut next);
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn backward(&self, acts: &Activations, grad_out: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(acts, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's parameter gradients into `grads`.
    pub fn backward_into(&self, acts: &Activations, grad_out: &[f64], grads: &mut Gradients) -> Result<()> {
        let n = self.layers.len();
        if acts.pre.len() != n || acts.post.len() != n || acts.inputs.len() != n {
            return Err(Error::contract("activations come from a different network"));
        }
        if grad_out.len() != self.output_dim() {
            return Err(Error::contract(format!(
                "output gradient has {} values, network outputs {}",
                grad_out.len(),
                self.output_dim()
            )));
        }
        if !grads.matches(self) {
            return Err(Error::contract("gradient buffer shaped for a different network"));
        }

        let mut upstream = grad_out.to_vec();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let (pre, post, input) = (&acts.pre[k], &acts.post[k], &acts.inputs[k]);
            if pre.len() != layer.rows || input.len() != layer.cols {
                return Err(Error::contract("activation shapes do not match layer"));
            }
            let delta: Vec<f64> = upstream
                .iter()
                .zip(pre.iter().zip(post))
                .map(|(g, (&z, &y))| g * layer.activation.derivative(z, y))
                .collect();

            let g = &mut grads.layers[k];
            for ((grow, &d), gb) in g.weights.chunks_exact_mut(layer.cols).zip(&delta).zip(g.bias.iter_mut()) {
                *gb += d;
                if d != 0.0 {
                    for (gw, &xi) in grow.iter_mut().zip(input) {
                        *gw += d * xi;
                    }
                }
            }

            if k > 0 {
                let mut down = vec![0.0; layer.cols];
                for (row, &d) in layer.weights.chunks_exact(layer.cols).zip(&delta) {
                    if d != 0.0 {
                        for (acc, &w) in down.iter_mut().zip(row) {
                            *acc += w * d;
                        }
                    }
                }
                upstream = down;
            }
        }
        Ok(())
    }

    /// One optimizer step. Non-finite gradients are rejected and leave the
    /// network untouched.
    pub fn apply_update(&mut self, grads: &Gradients, opt: &mut Optimizer) -> Result<()> {
        if !grads.matches(self) {
            return Err(Error::contract("gradients shaped for a different network"));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient rejected".into()));
        }
        opt.step(self, grads);
        if !self.is_finite() {
            return Err(Error::Numeric("update produced non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint { layers: self.layers.clone() }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        DenseNet::from_layers(ckpt.layers)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        DenseNet::from_checkpoint(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        DenseNet::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk network layout: `{"layers": [{rows, cols, weights, bias, activation}]}`
/// with weights row-major. Floats are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMode {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    mode: OptimizerMode,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    moments: Option<(Gradients, Gradients)>,
}

impl Optimizer {
    pub fn new(mode: OptimizerMode, lr: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::config("lr", format!("must be finite and non-negative, got {lr}")));
        }
        Ok(Optimizer { mode, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 0, moments: None })
    }

    /// Replaces Adam's denominator offset (default 1e-8).
    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config("eps", format!("must be positive, got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Optimizer::new(OptimizerMode::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Optimizer::new(OptimizerMode::Adam, lr)
    }

    pub fn mode(&self) -> OptimizerMode {
        self.mode
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn step(&mut self, net: &mut DenseNet, grads: &Gradients) {
        self.steps += 1;
        match self.mode {
            OptimizerMode::Sgd => {
                for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
                    for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
                        *p -= self.lr * d;
                    }
                    for (p, d) in layer.bias.iter_mut().zip(&g.bias) {
                        *p -= self.lr * d;
                    }
                }
            }
            OptimizerMode::Adam => {
                let (m, v) = self
                    .moments
                    .get_or_insert_with(|| (Gradients::zeros_like(net), Gradients::zeros_like(net)));
                let t = self.steps as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
                for (k, layer) in net.layers.iter_mut().enumerate() {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let g = grads.layers[k].weights.iter().chain(&grads.layers[k].bias);
                    let (ml, vl) = (&mut m.layers[k], &mut v.layers[k]);
                    let mk = ml.weights.iter_mut().chain(ml.bias.iter_mut());
                    let vk = vl.weights.iter_mut().chain(vl.bias.iter_mut());
                    for (((p, &d), mi), vi) in params.zip(g).zip(mk).zip(vk) {
                        *mi = b1 * *mi + (1.0 - b1) * d;
                        *vi = b2 * *vi + (1.0 - b2) * d * d;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Binary cross-entropy on a single logit, fused with the sigmoid.
/// Returns `(loss, dloss/dlogit)`; the gradient is `sigmoid(logit) - label`.
pub fn bce_single_logit(logit: f64, label: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - label)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Shannon entropy (nats) of the categorical distribution `softmax(logits)`.
pub fn entropy(logits: &[f64]) -> f64 {
    let lp = log_softmax(logits);
    -lp.iter().map(|&l| l.exp() * l).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity3() -> DenseNet {
        let w = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        DenseNet::from_layers(vec![Dense::new(3, 3, w, vec![0.0; 3], Activation::Identity).unwrap()]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let out = identity3().forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out.output(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_sigmoid_net() {
        let net = DenseNet::from_layers(vec![Dense::new(1, 2, vec![0.0, 0.0], vec![0.5], Activation::Sigmoid).unwrap()])
            .unwrap();
        let y = net.predict(&[3.0, -7.0]).unwrap();
        assert!((y[0] - 0.622_459_331_201_854_6).abs() < 1e-12);
    }

    #[test]
    fn random_net_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::glorot(&[13, 16, 3], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
        let x: Vec<f64> = (0..13).map(|i| i as f64 / 13.0).collect();
        let y = net.forward(&x).unwrap();
        assert_eq!(y.output().len(), 3);
        assert!(y.output().iter().all(|v| v.is_finite()));
        assert_eq!(net.predict(&x).unwrap(), y.output());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = identity3();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Contract(_))));
        let acts = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(net.backward(&acts, &[1.0]), Err(Error::Contract(_))));
        let bad = Dense::new(2, 3, vec![0.0; 5], vec![0.0; 2], Activation::Tanh);
        assert!(bad.is_err());
        let l1 = Dense::zeros(4, 3, Activation::Tanh);
        let l2 = Dense::zeros(2, 5, Activation::Tanh);
        assert!(DenseNet::from_layers(vec![l1, l2]).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::glorot(&[4, 5, 2], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
        let acts = net.forward(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        let g = net.backward(&acts, &[0.0, 0.0]).unwrap();
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let w = vec![0.3, -0.1, 0.7, 0.2, 0.5, -0.4];
        let net = DenseNet::from_layers(vec![Dense::new(2, 3, w, vec![0.0; 2], Activation::Identity).unwrap()]).unwrap();
        let x = [1.0, 2.0, -3.0];
        let g = [0.5, -2.0];
        let grads = net.backward(&net.forward(&x).unwrap(), &g).unwrap();
        let expected: Vec<f64> = g.iter().flat_map(|gi| x.iter().map(move |xj| gi * xj)).collect();
        assert_eq!(grads.layers[0].weights, expected);
        assert_eq!(grads.layers[0].bias, g.to_vec());
    }

    fn scalar_net(p: f64) -> DenseNet {
        DenseNet::from_layers(vec![Dense::new(1, 1, vec![p], vec![0.0], Activation::Identity).unwrap()]).unwrap()
    }

    fn grad_of(g: f64) -> Gradients {
        Gradients { layers: vec![LayerGrad { weights: vec![g], bias: vec![0.0] }] }
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::sgd(0.1).unwrap();
        net.apply_update(&grad_of(0.5), &mut opt).unwrap();
        assert_eq!(net.layers()[0].weights()[0], 1.0 - 0.1 * 0.5);
        assert!((net.layers()[0].weights()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_and_zero_lr_are_identity() {
        for opt in [Optimizer::sgd(0.3).unwrap(), Optimizer::adam(0.3).unwrap()] {
            let mut net = scalar_net(1.25);
            let mut o = opt.clone();
            net.apply_update(&grad_of(0.0), &mut o).unwrap();
            assert_eq!(net.layers()[0].weights()[0], 1.25);
        }
        for mut opt in [Optimizer::sgd(0.0).unwrap(), Optimizer::adam(0.0).unwrap()] {
            let mut net = scalar_net(1.25);
            net.apply_update(&grad_of(3.0), &mut opt).unwrap();
            assert_eq!(net.layers()[0].weights()[0], 1.25);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(0.01).unwrap();
        net.apply_update(&grad_of(2.5), &mut opt).unwrap();
        let moved = 1.0 - net.layers()[0].weights()[0];
        assert!((moved - 0.01).abs() < 1e-9, "moved {moved}");
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let err = net.apply_update(&grad_of(f64::NAN), &mut opt).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(net.layers()[0].weights()[0], 1.0);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn bce_reference_values() {
        let ln2 = std::f64::consts::LN_2;
        let (l, g) = bce_single_logit(0.0, 1.0);
        assert!((l - ln2).abs() < 1e-12 && (g + 0.5).abs() < 1e-15);
        let (l, g) = bce_single_logit(0.0, 0.0);
        assert!((l - ln2).abs() < 1e-12 && (g - 0.5).abs() < 1e-15);
        let (l, g) = bce_single_logit(40.0, 1.0);
        assert!(l.is_finite() && l < 1e-15 && g.abs() < 1e-15);
        for z in [-50.0, -10.0, 10.0, 50.0] {
            for y in [0.0, 1.0] {
                let (l, g) = bce_single_logit(z, y);
                assert!(l.is_finite() && g.is_finite());
                assert_eq!(g, sigmoid(z) - y);
            }
        }
        // large wrong-way logit: loss ≈ |z|
        assert!((bce_single_logit(-50.0, 1.0).0 - 50.0).abs() < 1e-12);
    }

    #[test]
    fn log_softmax_reference_values() {
        let ln3 = 3f64.ln();
        for c in [0.0, 5.0, -123.4, 1e3] {
            let lp = log_softmax(&[c, c, c]);
            assert!(lp.iter().all(|&v| (v + ln3).abs() < 1e-12));
            assert!((entropy(&[c, c, c]) - ln3).abs() < 1e-12);
        }
        let p = softmax(&[10.0, 0.0, 0.0]);
        assert!(p[0] > 0.99);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::glorot(&[13, 16, 3], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
        let back = DenseNet::from_json(&net.to_json().unwrap()).unwrap();
        for (a, b) in net.layers().iter().zip(back.layers()) {
            assert!(a.weights().iter().zip(b.weights()).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(a.activation(), b.activation());
        }
        assert!(DenseNet::from_json(r#"{"layers":[{"rows":2,"cols":2,"weights":[1],"bias":[0,0],"activation":"tanh"}]}"#).is_err());
    }
}
