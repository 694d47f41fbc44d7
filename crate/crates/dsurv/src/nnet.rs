//! Feed-forward survival networks with two output heads.
//!
//! The **flexible** head densely connects the last hidden layer to one
//! output per interval; a sigmoid turns each log-odds into that interval's
//! conditional survival probability, so both the baseline hazard and the
//! covariate effect can vary freely with follow-up time.
//!
//! The **proportional-hazards** head funnels the network through a single
//! bias-free neuron whose value `s` acts as the linear predictor: the
//! conditional survival of interval `j` is `base_j ^ exp(s)` where `base_j`
//! is a per-interval baseline survival probability, stored as a trainable
//! logit. The covariate effect is then the same at every follow-up time.
//!
//! Gradients are computed by hand (chain rule through the head and the
//! clamped probabilities), optimization is minibatch RMSprop, and everything
//! is deterministic per seed.

use crate::error::{Error, Result};
use crate::likelihood::{clamp_prob, SurvivalCurve, EPS};
use crate::rng::CounterRng;
use crate::timegrid::{encode_dataset, EncodedTarget, SurvivalRecord, TimeGrid};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Rectifier,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    FlexibleHead,
    PropHazHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Flexible,
    ProportionalHazards,
}

/// Shape and activation of one layer in the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub use_bias: bool,
}

impl LayerSpec {
    /// Hidden dense layer with bias.
    pub fn dense(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            input_dim,
            output_dim,
            activation,
            use_bias: true,
        }
    }

    /// Bias-free linear layer; used to form the proportional-hazards
    /// linear predictor.
    pub fn linear_no_bias(input_dim: usize, output_dim: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            input_dim,
            output_dim,
            activation: Activation::Identity,
            use_bias: false,
        }
    }

    /// Output head with one sigmoid unit per interval.
    pub fn flexible_head(input_dim: usize, n_intervals: usize) -> Self {
        LayerSpec {
            kind: LayerKind::FlexibleHead,
            input_dim,
            output_dim: n_intervals,
            activation: Activation::Sigmoid,
            use_bias: true,
        }
    }

    /// Output head mapping the 1-dimensional linear predictor to per-interval
    /// conditional survival through the trainable baseline.
    pub fn prophaz_head(n_intervals: usize) -> Self {
        LayerSpec {
            kind: LayerKind::PropHazHead,
            input_dim: 1,
            output_dim: n_intervals,
            activation: Activation::Identity,
            use_bias: false,
        }
    }
}

/// Standard stack: dense rectifier hidden layers followed by the requested
/// head (for the proportional-hazards head, the bias-free scoring layer is
/// inserted automatically).
pub fn layer_stack(
    input_dim: usize,
    hidden: &[usize],
    head: HeadKind,
    n_intervals: usize,
) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut dim = input_dim;
    for &width in hidden {
        specs.push(LayerSpec::dense(dim, width, Activation::Rectifier));
        dim = width;
    }
    match head {
        HeadKind::Flexible => specs.push(LayerSpec::flexible_head(dim, n_intervals)),
        HeadKind::ProportionalHazards => {
            specs.push(LayerSpec::linear_no_bias(dim, 1));
            specs.push(LayerSpec::prophaz_head(n_intervals));
        }
    }
    specs
}

/// One dense layer's parameters. Weights are `input_dim x output_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Option<Array1<f64>>,
    pub activation: Activation,
}

/// All trainable state of a survival network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub specs: Vec<LayerSpec>,
    pub layers: Vec<DenseLayer>,
    /// Proportional-hazards head only: per-interval baseline survival
    /// logits; `sigmoid` of each is the baseline conditional survival.
    pub baseline_logits: Option<Array1<f64>>,
    pub grid: TimeGrid,
}

fn validate_specs(specs: &[LayerSpec], grid: &TimeGrid) -> Result<HeadKind> {
    let Some(last) = specs.last() else {
        return Err(Error::invalid("a model needs at least an output head"));
    };
    let head = match last.kind {
        LayerKind::FlexibleHead => HeadKind::Flexible,
        LayerKind::PropHazHead => HeadKind::ProportionalHazards,
        LayerKind::Dense => {
            return Err(Error::invalid("the last layer must be an output head"))
        }
    };
    for (i, spec) in specs.iter().enumerate() {
        if i + 1 < specs.len() && spec.kind != LayerKind::Dense {
            return Err(Error::invalid("output heads may only appear last"));
        }
        if spec.output_dim == 0 {
            return Err(Error::invalid(format!("layer {i} has zero output dimension")));
        }
        if i > 0 && specs[i - 1].output_dim != spec.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "layer {i} expects input {} but layer {} outputs {}",
                spec.input_dim,
                i - 1,
                specs[i - 1].output_dim
            )));
        }
    }
    match head {
        HeadKind::Flexible => {
            if last.output_dim != grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "flexible head outputs {} values but the grid has {} intervals",
                    last.output_dim,
                    grid.len()
                )));
            }
        }
        HeadKind::ProportionalHazards => {
            if last.input_dim != 1 {
                return Err(Error::invalid(
                    "the proportional-hazards head takes the 1-dimensional linear predictor",
                ));
            }
            if last.output_dim != grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "proportional-hazards head outputs {} values but the grid has {} intervals",
                    last.output_dim,
                    grid.len()
                )));
            }
        }
    }
    Ok(head)
}

impl ModelParams {
    /// Initialize a network: weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero, baseline logits zero.
    /// Draws come from the counter generator seeded with `seed`, consumed
    /// layer by layer in row-major order.
    pub fn init(specs: Vec<LayerSpec>, grid: TimeGrid, seed: u64) -> Result<Self> {
        let mut rng = CounterRng::new(seed);
        Self::init_with_rng(specs, grid, &mut rng)
    }

    pub(crate) fn init_with_rng(
        specs: Vec<LayerSpec>,
        grid: TimeGrid,
        rng: &mut CounterRng,
    ) -> Result<Self> {
        let head = validate_specs(&specs, &grid)?;
        let mut layers = Vec::new();
        for spec in &specs {
            if spec.kind == LayerKind::PropHazHead {
                continue;
            }
            let bound = (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt();
            let mut weights = Array2::zeros((spec.input_dim, spec.output_dim));
            for w in weights.iter_mut() {
                *w = rng.uniform_symmetric(bound);
            }
            let bias = spec.use_bias.then(|| Array1::zeros(spec.output_dim));
            layers.push(DenseLayer {
                weights,
                bias,
                activation: spec.activation,
            });
        }
        let baseline_logits = match head {
            HeadKind::Flexible => None,
            HeadKind::ProportionalHazards => Some(Array1::zeros(grid.len())),
        };
        Ok(ModelParams {
            specs,
            layers,
            baseline_logits,
            grid,
        })
    }

    /// Reassemble a model from stored pieces, re-validating the stack.
    pub(crate) fn from_parts(
        specs: Vec<LayerSpec>,
        layers: Vec<DenseLayer>,
        baseline_logits: Option<Array1<f64>>,
        grid: TimeGrid,
    ) -> Result<Self> {
        let head = validate_specs(&specs, &grid)?;
        match (head, &baseline_logits) {
            (HeadKind::ProportionalHazards, Some(g)) if g.len() == grid.len() => {}
            (HeadKind::Flexible, None) => {}
            _ => {
                return Err(Error::invalid(
                    "baseline logits must be present exactly for the proportional-hazards head",
                ))
            }
        }
        Ok(ModelParams {
            specs,
            layers,
            baseline_logits,
            grid,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn head(&self) -> HeadKind {
        match self.specs.last().map(|s| s.kind) {
            Some(LayerKind::PropHazHead) => HeadKind::ProportionalHazards,
            _ => HeadKind::Flexible,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.specs.first().map_or(0, |s| s.input_dim)
    }

    pub fn baseline_logits(&self) -> Option<&Array1<f64>> {
        self.baseline_logits.as_ref()
    }

    /// Seed the proportional-hazards baseline at the product-limit hazards
    /// of the encoded training targets: `logit(1 - d_j / r_j)` per interval.
    pub(crate) fn set_baseline_from_targets(&mut self, targets: &[EncodedTarget]) {
        let Some(logits) = self.baseline_logits.as_mut() else {
            return;
        };
        for j in 0..logits.len() {
            let d: f64 = targets.iter().map(|t| t.surv_f[j]).sum();
            let r: f64 = targets.iter().map(|t| t.surv_s[j] + t.surv_f[j]).sum();
            // Intervals with no one at risk or no failures get a finite logit.
            let hazard = if r > 0.0 { (d / r).clamp(1e-3, 1.0 - 1e-3) } else { 0.5 };
            logits[j] = ((1.0 - hazard) / hazard).ln();
        }
    }
}

pub(crate) struct ForwardCache {
    /// Post-activation values; `activations[0]` is the input batch.
    activations: Vec<Array2<f64>>,
    /// Conditional survival before clamping, batch x intervals.
    cond_raw: Array2<f64>,
    /// Clamped conditional survival.
    pub(crate) cond: Array2<f64>,
    /// Proportional-hazards head only: `exp(score)` per row.
    rho: Option<Array1<f64>>,
}

pub(crate) fn forward_cache(params: &ModelParams, covariates: &Array2<f64>) -> Result<ForwardCache> {
    if covariates.ncols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "covariate dimension {} does not match model input {}",
            covariates.ncols(),
            params.input_dim()
        )));
    }
    if covariates.nrows() == 0 {
        return Err(Error::invalid("forward pass needs at least one row"));
    }
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    activations.push(covariates.clone());
    for layer in &params.layers {
        let mut z = activations.last().unwrap().dot(&layer.weights);
        if let Some(bias) = &layer.bias {
            z += bias;
        }
        z.mapv_inplace(|v| layer.activation.apply(v));
        activations.push(z);
    }
    let (cond_raw, rho) = match params.head() {
        HeadKind::Flexible => (activations.last().unwrap().clone(), None),
        HeadKind::ProportionalHazards => {
            let score = activations.last().unwrap();
            let base = params
                .baseline_logits
                .as_ref()
                .expect("proportional-hazards head keeps baseline logits");
            let base_surv = base.mapv(|g| 1.0 / (1.0 + (-g).exp()));
            let rho = score.column(0).mapv(|s| s.exp());
            let mut cond = Array2::zeros((covariates.nrows(), base.len()));
            for (r, &rho_r) in rho.iter().enumerate() {
                for (j, &b) in base_surv.iter().enumerate() {
                    cond[[r, j]] = b.powf(rho_r);
                }
            }
            (cond, Some(rho))
        }
    };
    let cond = cond_raw.mapv(clamp_prob);
    Ok(ForwardCache {
        activations,
        cond_raw,
        cond,
        rho,
    })
}

/// Forward pass: one survival curve per covariate row.
pub fn forward(params: &ModelParams, covariates: &Array2<f64>) -> Result<Vec<SurvivalCurve>> {
    let cache = forward_cache(params, covariates)?;
    Ok(curves_from_cond(&cache.cond))
}

/// Alias of [`forward`]; trained parameters are immutable, so prediction is
/// safe to run concurrently from multiple threads.
pub fn predict(params: &ModelParams, covariates: &Array2<f64>) -> Result<Vec<SurvivalCurve>> {
    forward(params, covariates)
}

pub(crate) fn curves_from_cond(cond: &Array2<f64>) -> Vec<SurvivalCurve> {
    cond.rows()
        .into_iter()
        .map(|row| {
            let cond_surv: Array1<f64> = row.to_owned();
            let mut running = 1.0;
            let cum_surv = cond_surv.mapv(|c| {
                running *= c;
                running
            });
            SurvivalCurve { cond_surv, cum_surv }
        })
        .collect()
}

/// Gradients with the same shapes as the parameters they refer to.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<LayerGrads>,
    pub baseline_logits: Option<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

/// Losses and gradients from one backward pass.
pub struct BackwardPass {
    /// Mean negative log-likelihood of the batch.
    pub data_loss: f64,
    /// `data_loss` plus the L2 penalty `λ/2 · Σ w²` over kernel weights.
    pub objective: f64,
    pub grads: ModelGrads,
}

/// Mean negative log-likelihood over the batch plus L2 on kernel weights,
/// differentiated with respect to every parameter.
///
/// The penalty touches kernel weights only, never biases or baseline
/// logits. Probabilities pinned at the clamp boundaries pass no gradient.
pub fn backward(
    params: &ModelParams,
    covariates: &Array2<f64>,
    targets: &[EncodedTarget],
    l2_strength: f64,
) -> Result<BackwardPass> {
    let batch = covariates.nrows();
    if targets.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} covariate rows vs {} targets",
            batch,
            targets.len()
        )));
    }
    let n = params.grid.len();
    if targets.iter().any(|t| t.len() != n) {
        return Err(Error::ShapeMismatch(
            "target length does not match the grid".into(),
        ));
    }
    let cache = forward_cache(params, covariates)?;

    // Loss and its gradient with respect to the clamped probabilities,
    // gated to zero wherever the raw value sat outside the clamp range.
    let mut data_loss = 0.0;
    let mut d_cond = Array2::zeros((batch, n));
    let inv_batch = 1.0 / batch as f64;
    for (r, target) in targets.iter().enumerate() {
        for j in 0..n {
            let c = cache.cond[[r, j]];
            let s = target.surv_s[j];
            let f = target.surv_f[j];
            data_loss -= (1.0 + s * (c - 1.0)).ln() + (1.0 - f * c).ln();
            let raw = cache.cond_raw[[r, j]];
            if raw > EPS && raw < 1.0 - EPS {
                d_cond[[r, j]] = (-s / (1.0 + s * (c - 1.0)) + f / (1.0 - f * c)) * inv_batch;
            }
        }
    }
    data_loss *= inv_batch;

    // Head backward: gradient flowing into the last dense layer's output.
    let mut baseline_grad = None;
    let d_last = match params.head() {
        // cond_raw is the raw output of the last dense layer, whose sigmoid
        // derivative the dense loop below applies.
        HeadKind::Flexible => d_cond,
        HeadKind::ProportionalHazards => {
            let rho = cache.rho.as_ref().unwrap();
            let base = params.baseline_logits.as_ref().unwrap();
            let base_surv = base.mapv(|g| 1.0 / (1.0 + (-g).exp()));
            let mut d_gamma = Array1::zeros(n);
            let mut d_score = Array2::zeros((batch, 1));
            for r in 0..batch {
                let rho_r = rho[r];
                let mut score_sum = 0.0;
                for j in 0..n {
                    let g = d_cond[[r, j]];
                    if g == 0.0 {
                        continue;
                    }
                    let c = cache.cond_raw[[r, j]];
                    // c = base^rho: dc/dscore = c ln(base) rho,
                    // dc/dgamma = rho c (1 - base).
                    score_sum += g * c * base_surv[j].ln() * rho_r;
                    d_gamma[j] += g * rho_r * c * (1.0 - base_surv[j]);
                }
                d_score[[r, 0]] = score_sum;
            }
            baseline_grad = Some(d_gamma);
            d_score
        }
    };

    // Dense backprop.
    let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(params.layers.len());
    let mut d_out = d_last;
    for (l, layer) in params.layers.iter().enumerate().rev() {
        let a_out = &cache.activations[l + 1];
        let mut d_z = d_out;
        for (r, mut row) in d_z.rows_mut().into_iter().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v *= layer.activation.derivative_from_output(a_out[[r, j]]);
            }
        }
        let a_in = &cache.activations[l];
        let mut d_w = a_in.t().dot(&d_z);
        if l2_strength > 0.0 {
            d_w += &(l2_strength * &layer.weights);
        }
        let d_b = layer.bias.as_ref().map(|_| d_z.sum_axis(Axis(0)));
        layer_grads.push(LayerGrads {
            weights: d_w,
            bias: d_b,
        });
        d_out = d_z.dot(&layer.weights.t());
    }
    layer_grads.reverse();

    let penalty = if l2_strength > 0.0 {
        0.5 * l2_strength
            * params
                .layers
                .iter()
                .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
                .sum::<f64>()
    } else {
        0.0
    };

    Ok(BackwardPass {
        data_loss,
        objective: data_loss + penalty,
        grads: ModelGrads {
            layers: layer_grads,
            baseline_logits: baseline_grad,
        },
    })
}

/// Training hyperparameters. Defaults: learning rate 1e-3, decay 0.9,
/// epsilon 1e-8, batch 256, 1000 epochs, no regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub l2_strength: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 256,
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            l2_strength: 0.0,
            rng_seed: 0,
        }
    }
}

/// Default regularization strengths scanned by cross-validation.
pub const DEFAULT_L2_CANDIDATES: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(Error::invalid("RMSprop decay must lie in (0, 1)"));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return Err(Error::invalid("RMSprop epsilon must be positive"));
        }
        if self.l2_strength < 0.0 {
            return Err(Error::invalid("L2 strength must be nonnegative"));
        }
        Ok(())
    }
}

/// Running average of squared gradients, one cache per parameter tensor.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    layers: Vec<LayerGrads>,
    baseline_logits: Option<Array1<f64>>,
}

impl RmsPropState {
    pub fn new(params: &ModelParams) -> Self {
        RmsPropState {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: l.bias.as_ref().map(|b| Array1::zeros(b.len())),
                })
                .collect(),
            baseline_logits: params.baseline_logits.as_ref().map(|g| Array1::zeros(g.len())),
        }
    }
}

#[inline]
fn rmsprop_update(param: &mut f64, grad: f64, cache: &mut f64, config: &TrainConfig) {
    *cache = config.rmsprop_decay * *cache + (1.0 - config.rmsprop_decay) * grad * grad;
    *param -= config.learning_rate * grad / (cache.sqrt() + config.rmsprop_epsilon);
}

/// One RMSprop step: `cache <- ρ·cache + (1-ρ)·g²`, then
/// `param <- param - lr·g / (sqrt(cache) + ε)`, elementwise.
pub fn rmsprop_step(
    params: &mut ModelParams,
    grads: &ModelGrads,
    state: &mut RmsPropState,
    config: &TrainConfig,
) -> Result<()> {
    if grads.layers.len() != params.layers.len() {
        return Err(Error::ShapeMismatch(
            "gradient layer count does not match the model".into(),
        ));
    }
    for ((layer, grad), cache) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.layers)
    {
        if layer.weights.raw_dim() != grad.weights.raw_dim() {
            return Err(Error::ShapeMismatch("weight gradient shape mismatch".into()));
        }
        for ((w, &g), c) in layer
            .weights
            .iter_mut()
            .zip(grad.weights.iter())
            .zip(cache.weights.iter_mut())
        {
            rmsprop_update(w, g, c, config);
        }
        if let (Some(bias), Some(g_bias), Some(c_bias)) =
            (layer.bias.as_mut(), grad.bias.as_ref(), cache.bias.as_mut())
        {
            for ((b, &g), c) in bias.iter_mut().zip(g_bias.iter()).zip(c_bias.iter_mut()) {
                rmsprop_update(b, g, c, config);
            }
        }
    }
    if let (Some(gamma), Some(g_gamma), Some(c_gamma)) = (
        params.baseline_logits.as_mut(),
        grads.baseline_logits.as_ref(),
        state.baseline_logits.as_mut(),
    ) {
        for ((p, &g), c) in gamma.iter_mut().zip(g_gamma.iter()).zip(c_gamma.iter_mut()) {
            rmsprop_update(p, g, c, config);
        }
    }
    Ok(())
}

/// A trained model plus its per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// Mean negative log-likelihood per subject at the start of each epoch's
    /// pass over the data (before that epoch's updates are complete).
    pub trace: Vec<f64>,
}

fn covariate_matrix(records: &[SurvivalRecord]) -> Result<Array2<f64>> {
    let dim = records[0].covariates.len();
    if records.iter().any(|r| r.covariates.len() != dim) {
        return Err(Error::invalid(
            "covariate dimension must be constant across the dataset",
        ));
    }
    let mut x = Array2::zeros((records.len(), dim));
    for (i, record) in records.iter().enumerate() {
        for (j, &v) in record.covariates.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok(x)
}

/// Minibatch RMSprop training of the negative log-likelihood.
///
/// Deterministic per `config.rng_seed`: the same seed drives both weight
/// initialization and epoch shuffling. The final partial minibatch of each
/// epoch is used, not dropped. A non-finite loss aborts with the epoch that
/// produced it.
pub fn train(
    records: &[SurvivalRecord],
    grid: &TimeGrid,
    specs: &[LayerSpec],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::invalid("training needs a nonempty dataset"));
    }
    let covariates = covariate_matrix(records)?;
    let (targets, _) = encode_dataset(records, grid)?;

    let mut rng = CounterRng::new(config.rng_seed);
    let mut params = ModelParams::init_with_rng(specs.to_vec(), grid.clone(), &mut rng)?;
    params.set_baseline_from_targets(&targets);
    let mut state = RmsPropState::new(&params);

    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = covariates.select(Axis(0), chunk);
            let batch_targets: Vec<EncodedTarget> =
                chunk.iter().map(|&i| targets[i].clone()).collect();
            let pass = backward(&params, &x, &batch_targets, config.l2_strength)?;
            if !pass.objective.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += pass.data_loss * chunk.len() as f64;
            rmsprop_step(&mut params, &pass.grads, &mut state, config)?;
        }
        trace.push(epoch_loss / n as f64);
    }

    Ok(TrainOutput { params, trace })
}

/// Cross-validation outcome: the winning strength and the per-candidate
/// mean held-out log-likelihood.
#[derive(Debug, Clone)]
pub struct L2Selection {
    pub chosen: f64,
    pub scores: Vec<(f64, f64)>,
}

/// Pick the L2 strength maximizing mean held-out log-likelihood over a
/// seeded k-fold partition. Ties keep the earliest candidate.
pub fn select_l2(
    records: &[SurvivalRecord],
    grid: &TimeGrid,
    specs: &[LayerSpec],
    config: &TrainConfig,
    candidate_lambdas: &[f64],
    folds: usize,
) -> Result<L2Selection> {
    if candidate_lambdas.is_empty() {
        return Err(Error::invalid("need at least one candidate strength"));
    }
    if folds < 2 {
        return Err(Error::invalid("cross validation needs at least 2 folds"));
    }
    if records.len() < folds {
        return Err(Error::invalid(format!(
            "dataset of {} is smaller than {} folds",
            records.len(),
            folds
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    // Fold assignment uses its own stream so it never perturbs training.
    CounterRng::new(config.rng_seed ^ 0x5F0E_1D2C_3B4A_5968).shuffle(&mut order);
    let fold_of: Vec<usize> = {
        let mut f = vec![0; records.len()];
        for (pos, &idx) in order.iter().enumerate() {
            f[idx] = pos % folds;
        }
        f
    };

    let mut scores = Vec::with_capacity(candidate_lambdas.len());
    for &lambda in candidate_lambdas {
        let mut cfg = config.clone();
        cfg.l2_strength = lambda;
        let mut total = 0.0;
        for fold in 0..folds {
            let train_records: Vec<SurvivalRecord> = records
                .iter()
                .zip(&fold_of)
                .filter(|(_, &f)| f != fold)
                .map(|(r, _)| r.clone())
                .collect();
            let held_out: Vec<SurvivalRecord> = records
                .iter()
                .zip(&fold_of)
                .filter(|(_, &f)| f == fold)
                .map(|(r, _)| r.clone())
                .collect();
            let fitted = train(&train_records, grid, specs, &cfg)?;
            total += heldout_loglik(&fitted.params, &held_out)?;
        }
        scores.push((lambda, total / folds as f64));
    }
    let chosen = scores
        .iter()
        .fold((f64::NEG_INFINITY, 0.0), |best, &(lambda, score)| {
            if score > best.0 {
                (score, lambda)
            } else {
                best
            }
        })
        .1;
    Ok(L2Selection { chosen, scores })
}

/// Total log-likelihood of a record set under a trained model.
pub fn heldout_loglik(params: &ModelParams, records: &[SurvivalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("held-out set is empty"));
    }
    let x = covariate_matrix(records)?;
    let (targets, _) = encode_dataset(records, params.grid())?;
    let cache = forward_cache(params, &x)?;
    let mut total = 0.0;
    for (r, target) in targets.iter().enumerate() {
        for j in 0..params.grid.len() {
            let c = cache.cond[[r, j]];
            total += (1.0 + target.surv_s[j] * (c - 1.0)).ln();
            total += (1.0 - target.surv_f[j] * c).ln();
        }
    }
    Ok(total)
}
