//! Feed-forward actor-critic network with tanh hidden layers, a masked
//! softmax policy head and a linear value head, plus exact gradients of
//! the A2C loss.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_actions: usize,
    /// Dropout rate after every hidden layer.
    pub hidden_dropout: f64,
    /// Dropout rate on the endpoint-embedding input columns.
    pub embedding_dropout: f64,
    /// Half-open column range of the endpoint embeddings in the input.
    pub embedding_columns: (usize, usize),
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.num_actions == 0
            || self.hidden.is_empty()
            || self.hidden.contains(&0)
        {
            return Err(Error::config(
                "network widths must be positive and at least one hidden layer is needed",
            ));
        }
        for p in [self.hidden_dropout, self.embedding_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("dropout rate {p} outside [0, 1)")));
            }
        }
        let (a, b) = self.embedding_columns;
        if a > b || b > self.input_dim {
            return Err(Error::config("embedding columns fall outside the input"));
        }
        Ok(())
    }
}

/// Fully connected layer, `y = x W^T + b` with `W` of shape `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((outputs, inputs), |_| rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_fn(outputs, |_| rng.gen_range(-bound..bound)),
        }
    }

    fn zeros_like(other: &Dense) -> Self {
        Self {
            weight: Array2::zeros(other.weight.raw_dim()),
            bias: Array1::zeros(other.bias.raw_dim()),
        }
    }

    fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight.t());
        z += &self.bias;
        z
    }
}

/// All trainable tensors, in a fixed order. Also used for gradients and
/// optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub trunk: Vec<Dense>,
    pub policy: Dense,
    pub value: Dense,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            trunk: self.trunk.iter().map(Dense::zeros_like).collect(),
            policy: Dense::zeros_like(&self.policy),
            value: Dense::zeros_like(&self.value),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk.iter().chain([&self.policy, &self.value])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.trunk
            .iter_mut()
            .chain([&mut self.policy, &mut self.value])
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Inverted-dropout masks (entries `0` or `1 / (1 - p)`) for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    /// Over the embedding columns only.
    pub embedding: Option<Array2<f64>>,
    pub hidden: Vec<Option<Array2<f64>>>,
}

/// One batch of A2C transitions.
#[derive(Clone, Debug)]
pub struct Batch {
    pub features: Array2<f64>,
    pub masks: Array2<bool>,
    pub actions: Vec<usize>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub value: f64,
    pub entropy: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Output of a forward pass.
pub struct Forward {
    /// Trunk inputs per layer (after dropout), last entry feeds the heads.
    inputs: Vec<Array2<f64>>,
    /// Post-tanh activations per hidden layer, before dropout.
    activations: Vec<Array2<f64>>,
    pub probs: Array2<f64>,
    pub values: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticNet {
    cfg: NetConfig,
    params: Params,
}

impl ActorCriticNet {
    pub fn new<R: Rng + ?Sized>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut trunk = Vec::with_capacity(cfg.hidden.len());
        let mut width = cfg.input_dim;
        for &h in &cfg.hidden {
            trunk.push(Dense::init(width, h, rng));
            width = h;
        }
        let policy = Dense::init(width, cfg.num_actions, rng);
        let value = Dense::init(width, 1, rng);
        let net = Self {
            cfg,
            params: Params {
                trunk,
                policy,
                value,
            },
        };
        log::info!("actor-critic network with {} parameters", net.num_params());
        Ok(net)
    }

    pub fn from_params(cfg: NetConfig, params: Params) -> Result<Self> {
        cfg.validate()?;
        let mut width = cfg.input_dim;
        let mut ok = params.trunk.len() == cfg.hidden.len();
        for (layer, &h) in params.trunk.iter().zip(&cfg.hidden) {
            ok &= layer.weight.dim() == (h, width) && layer.bias.len() == h;
            width = h;
        }
        ok &= params.policy.weight.dim() == (cfg.num_actions, width)
            && params.policy.bias.len() == cfg.num_actions;
        ok &= params.value.weight.dim() == (1, width) && params.value.bias.len() == 1;
        if !ok {
            return Err(Error::config(
                "parameter shapes do not match the network configuration",
            ));
        }
        Ok(Self { cfg, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn sample_dropout<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> DropoutMasks {
        let mask = |rows: usize, cols: usize, p: f64, rng: &mut R| {
            (p > 0.0 && cols > 0).then(|| {
                let keep = 1.0 / (1.0 - p);
                Array2::from_shape_fn(
                    (rows, cols),
                    |_| if rng.gen::<f64>() < p { 0.0 } else { keep },
                )
            })
        };
        let (a, b) = self.cfg.embedding_columns;
        DropoutMasks {
            embedding: mask(batch, b - a, self.cfg.embedding_dropout, rng),
            hidden: self
                .cfg
                .hidden
                .iter()
                .map(|&h| mask(batch, h, self.cfg.hidden_dropout, rng))
                .collect(),
        }
    }

    /// Batched forward pass. `dropout` is `None` at evaluation time.
    pub fn forward(
        &self,
        features: ArrayView2<f64>,
        masks: ArrayView2<bool>,
        dropout: Option<&DropoutMasks>,
    ) -> Result<Forward> {
        let (rows, cols) = features.dim();
        if cols != self.cfg.input_dim {
            return Err(Error::contract(format!(
                "feature width {cols} does not match network input {}",
                self.cfg.input_dim
            )));
        }
        if masks.dim() != (rows, self.cfg.num_actions) {
            return Err(Error::contract(format!(
                "action mask shape {:?} does not match ({rows}, {})",
                masks.dim(),
                self.cfg.num_actions
            )));
        }
        let mut x = features.to_owned();
        if let Some(m) = dropout.and_then(|d| d.embedding.as_ref()) {
            let (a, b) = self.cfg.embedding_columns;
            let mut block = x.slice_mut(s![.., a..b]);
            block *= m;
        }
        let mut inputs = Vec::with_capacity(self.cfg.hidden.len() + 1);
        let mut activations = Vec::with_capacity(self.cfg.hidden.len());
        for (l, layer) in self.params.trunk.iter().enumerate() {
            let mut h = layer.apply(&x.view());
            h.mapv_inplace(f64::tanh);
            let next = match dropout.and_then(|d| d.hidden.get(l).and_then(Option::as_ref)) {
                Some(m) => &h * m,
                None => h.clone(),
            };
            inputs.push(x);
            activations.push(h);
            x = next;
        }
        let logits = self.params.policy.apply(&x.view());
        let values = self.params.value.apply(&x.view()).column(0).to_owned();
        inputs.push(x);

        let mut probs = Array2::zeros(logits.raw_dim());
        for ((logit_row, mask_row), mut prob_row) in logits
            .outer_iter()
            .zip(masks.outer_iter())
            .zip(probs.outer_iter_mut())
        {
            let max = logit_row
                .iter()
                .zip(mask_row)
                .filter(|(_, &m)| m)
                .map(|(&z, _)| z)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::contract("every action is masked out"));
            }
            let mut total = 0.0;
            for ((p, &z), &m) in prob_row.iter_mut().zip(logit_row).zip(mask_row) {
                if m {
                    *p = (z - max).exp();
                    total += *p;
                }
            }
            prob_row /= total;
        }
        Ok(Forward {
            inputs,
            activations,
            probs,
            values,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::contract("empty batch"));
        }
        if batch.features.nrows() != n
            || batch.masks.nrows() != n
            || batch.returns.len() != n
            || batch.advantages.len() != n
        {
            return Err(Error::contract("batch fields have inconsistent lengths"));
        }
        for (i, &a) in batch.actions.iter().enumerate() {
            if a >= self.cfg.num_actions || !batch.masks[[i, a]] {
                return Err(Error::contract(format!(
                    "transition {i} took masked or invalid action {a}"
                )));
            }
        }
        Ok(())
    }

    fn loss_from(&self, fwd: &Forward, batch: &Batch, weights: LossWeights) -> LossBreakdown {
        let n = batch.len() as f64;
        let mut out = LossBreakdown::default();
        for (i, probs) in fwd.probs.outer_iter().enumerate() {
            out.policy -= batch.advantages[i] * probs[batch.actions[i]].ln();
            let err = batch.returns[i] - fwd.values[i];
            out.value += err * err;
            out.entropy += row_entropy(probs.iter().copied());
        }
        out.policy /= n;
        out.value /= n;
        out.entropy /= n;
        out.total = out.policy + weights.value * out.value - weights.entropy * out.entropy;
        out
    }

    /// `mean(-A log pi(a|s) + w_v (R - V)^2 - w_e H(pi(.|s)))`.
    pub fn loss(
        &self,
        batch: &Batch,
        weights: LossWeights,
        dropout: Option<&DropoutMasks>,
    ) -> Result<LossBreakdown> {
        self.check_batch(batch)?;
        let fwd = self.forward(batch.features.view(), batch.masks.view(), dropout)?;
        Ok(self.loss_from(&fwd, batch, weights))
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &Batch,
        weights: LossWeights,
        dropout: Option<&DropoutMasks>,
    ) -> Result<(LossBreakdown, Params)> {
        self.check_batch(batch)?;
        let fwd = self.forward(batch.features.view(), batch.masks.view(), dropout)?;
        let loss = self.loss_from(&fwd, batch, weights);
        let n = batch.len() as f64;

        // d loss / d logits
        let mut d_logits = Array2::zeros(fwd.probs.raw_dim());
        for (i, (probs, mut grad)) in fwd
            .probs
            .outer_iter()
            .zip(d_logits.outer_iter_mut())
            .enumerate()
        {
            let adv = batch.advantages[i];
            let h = row_entropy(probs.iter().copied());
            for (j, (&p, g)) in probs.iter().zip(grad.iter_mut()).enumerate() {
                if p > 0.0 {
                    let onehot = if j == batch.actions[i] { 1.0 } else { 0.0 };
                    *g = (adv * (p - onehot) + weights.entropy * p * (p.ln() + h)) / n;
                }
            }
        }
        let d_values: Array1<f64> = Zip::from(&fwd.values)
            .and(&Array1::from(batch.returns.clone()))
            .map_collect(|&v, &r| 2.0 * weights.value * (v - r) / n);

        let mut grads = self.params.zeros_like();
        let head_input = fwd.inputs.last().expect("head input");
        grads.policy.weight = standard(d_logits.t().dot(head_input));
        grads.policy.bias = d_logits.sum_axis(Axis(0));
        let d_values_col = d_values.view().insert_axis(Axis(1));
        grads.value.weight = standard(d_values_col.t().dot(head_input));
        grads.value.bias = Array1::from_elem(1, d_values.sum());

        let mut upstream =
            d_logits.dot(&self.params.policy.weight) + d_values_col.dot(&self.params.value.weight);
        for l in (0..self.params.trunk.len()).rev() {
            if let Some(m) = dropout.and_then(|d| d.hidden.get(l).and_then(Option::as_ref)) {
                upstream *= m;
            }
            Zip::from(&mut upstream)
                .and(&fwd.activations[l])
                .for_each(|g, &a| *g *= 1.0 - a * a);
            grads.trunk[l].weight = standard(upstream.t().dot(&fwd.inputs[l]));
            grads.trunk[l].bias = upstream.sum_axis(Axis(0));
            if l > 0 {
                upstream = upstream.dot(&self.params.trunk[l].weight);
            }
        }
        Ok((loss, grads))
    }
}

fn row_entropy(probs: impl Iterator<Item = f64>) -> f64 {
    -probs.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Index of the largest probability; the lowest index wins ties.
// matmul may hand back column-major results for degenerate shapes
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
