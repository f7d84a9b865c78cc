//! Stacked LSTM trained by backpropagation through time, written against the
//! GEMM primitives in [`super::gemm`] — no autograd, no framework.
//!
//! Cell equations (gate order `i, f, g, o` in every packed `4U` buffer):
//!
//! ```text
//! z    = W_ih x_t + W_hh h_{t-1} + bias          (packed, 4U rows)
//! i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o)
//! g    = act(z_g)                                 (configured activation)
//! c_t  = f * c_{t-1} + i * g
//! h_t  = o * act(c_t)
//! ```
//!
//! The configured activation (`relu` by default, `tanh` retained for
//! comparison) is applied both to the candidate `g` and to the cell output,
//! while the gates stay sigmoid — squashing the gates with relu would destroy
//! the gating semantics.
//!
//! Sequence buffers are `[rows × (window · batch)]` row-major with column
//! index `t·B + b`, so the input transform of a whole sequence is one GEMM
//! and per-step recurrent products are strided column-block views into the
//! same buffer. The weight gradients batch over time the same way, e.g.
//! `dW_hh = dZ[:, B..] · H[:, ..(T-1)B]ᵀ` in a single call.
//!
//! Everything is generic over [`Scalar`]: `f32` for production training,
//! `f64` when the analytic gradients are audited against finite differences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::Normalization;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Candidate/cell-output activation. Gates are always sigmoid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::ZERO {
                    x
                } else {
                    S::ZERO
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative evaluated from the *post*-activation value. Valid for both
    /// supported activations: `relu(x) > 0 ⇔ x > 0`, and `tanh' = 1 − tanh²`.
    #[inline]
    fn deriv_from_post<S: Scalar>(self, post: S) -> S {
        match self {
            Activation::Relu => {
                if post > S::ZERO {
                    S::ONE
                } else {
                    S::ZERO
                }
            }
            Activation::Tanh => S::ONE - post * post,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
}

/// Optimizer settings; only Adam is supported and the defaults are its
/// canonical constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// LSTM training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmConfig {
    pub layers: usize,
    pub units_per_layer: usize,
    pub activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    /// Hours of history fed to the network per prediction.
    pub input_window: usize,
    /// Hours predicted per forward pass.
    pub horizon: usize,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: 2,
            units_per_layer: 150,
            activation: Activation::Relu,
            batch_size: 24,
            epochs: 120,
            optimizer: OptimizerConfig::default(),
            input_window: 24,
            horizon: 1,
            seed: 0,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("lstm config: {what}")));
        if self.layers < 1 {
            return bad("layers must be >= 1");
        }
        if self.units_per_layer < 1 {
            return bad("units_per_layer must be >= 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.input_window < 1 {
            return bad("input_window must be >= 1");
        }
        if self.horizon < 1 {
            return bad("horizon must be >= 1");
        }
        let o = &self.optimizer;
        if !(o.learning_rate.is_finite() && o.learning_rate > 0.0) {
            return bad("learning_rate must be positive and finite");
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(o.epsilon.is_finite() && o.epsilon > 0.0) {
            return bad("epsilon must be positive and finite");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// One recurrent layer. `w_ih` is `[4U × in_dim]`, `w_hh` is `[4U × U]`,
/// `bias` is `[4U]`, all row-major with gate blocks `i, f, g, o`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer<S> {
    pub in_dim: usize,
    pub units: usize,
    pub w_ih: Vec<S>,
    pub w_hh: Vec<S>,
    pub bias: Vec<S>,
}

/// Final dense readout from the last hidden state: `w` is
/// `[horizon × in_dim]`, `b` is `[horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<S> {
    pub in_dim: usize,
    pub horizon: usize,
    pub w: Vec<S>,
    pub b: Vec<S>,
}

/// Full parameter set of a stacked LSTM; doubles as the gradient container
/// (gradients have exactly the shapes of the parameters they differentiate).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<S> {
    pub layers: Vec<LstmLayer<S>>,
    pub dense: DenseLayer<S>,
}

/// Name and shape of one parameter tensor, aligned with
/// [`LstmParams::tensors`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl<S: Scalar> LstmParams<S> {
    /// Glorot-uniform initialization (Keras fan conventions: the packed gate
    /// dimension counts as fan-out), zero biases except the forget-gate block
    /// which starts at 1 so early training does not flush the cell state.
    ///
    /// Draw order is fixed — per layer `w_ih` then `w_hh` row-major, then the
    /// dense kernel — so identical seeds give identical weights.
    pub fn init(config: &LstmConfig, rng: &mut ChaCha8Rng) -> Self {
        let u = config.units_per_layer;
        let mut layers = Vec::with_capacity(config.layers);
        for li in 0..config.layers {
            let in_dim = if li == 0 { 1 } else { u };
            let mut layer = LstmLayer {
                in_dim,
                units: u,
                w_ih: vec![S::ZERO; 4 * u * in_dim],
                w_hh: vec![S::ZERO; 4 * u * u],
                bias: vec![S::ZERO; 4 * u],
            };
            fill_glorot(&mut layer.w_ih, in_dim, 4 * u, rng);
            fill_glorot(&mut layer.w_hh, u, 4 * u, rng);
            for f in layer.bias[u..2 * u].iter_mut() {
                *f = S::ONE;
            }
            layers.push(layer);
        }
        let mut dense = DenseLayer {
            in_dim: u,
            horizon: config.horizon,
            w: vec![S::ZERO; config.horizon * u],
            b: vec![S::ZERO; config.horizon],
        };
        fill_glorot(&mut dense.w, u, config.horizon, rng);
        LstmParams { layers, dense }
    }

    /// Same shapes, every element zero. Used for gradients and Adam moments.
    pub fn zeros_like(&self) -> Self {
        LstmParams {
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayer {
                    in_dim: l.in_dim,
                    units: l.units,
                    w_ih: vec![S::ZERO; l.w_ih.len()],
                    w_hh: vec![S::ZERO; l.w_hh.len()],
                    bias: vec![S::ZERO; l.bias.len()],
                })
                .collect(),
            dense: DenseLayer {
                in_dim: self.dense.in_dim,
                horizon: self.dense.horizon,
                w: vec![S::ZERO; self.dense.w.len()],
                b: vec![S::ZERO; self.dense.b.len()],
            },
        }
    }

    pub fn check_consistent(&self) -> Result<()> {
        let err = |what: String| Err(Error::Contract(format!("lstm parameters: {what}")));
        if self.layers.is_empty() {
            return err("no recurrent layers".into());
        }
        let mut prev_out = self.layers[0].in_dim;
        for (li, l) in self.layers.iter().enumerate() {
            if l.units == 0 {
                return err(format!("layer {li} has zero units"));
            }
            if l.in_dim != prev_out {
                return err(format!(
                    "layer {li} expects {} inputs but receives {prev_out}",
                    l.in_dim
                ));
            }
            if l.w_ih.len() != 4 * l.units * l.in_dim
                || l.w_hh.len() != 4 * l.units * l.units
                || l.bias.len() != 4 * l.units
            {
                return err(format!("layer {li} tensor lengths disagree with dims"));
            }
            prev_out = l.units;
        }
        let d = &self.dense;
        if d.in_dim != prev_out {
            return err(format!(
                "dense expects {} inputs but receives {prev_out}",
                d.in_dim
            ));
        }
        if d.horizon == 0 || d.w.len() != d.horizon * d.in_dim || d.b.len() != d.horizon {
            return err("dense tensor lengths disagree with dims".into());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Parameter tensors in a fixed order (layers bottom-up: `w_ih`, `w_hh`,
    /// `bias`; then dense `w`, `b`).
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.w_ih);
            out.push(&l.w_hh);
            out.push(&l.bias);
        }
        out.push(&self.dense.w);
        out.push(&self.dense.b);
        out
    }

    /// Mutable view aligned with [`Self::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.w_ih);
            out.push(&mut l.w_hh);
            out.push(&mut l.bias);
        }
        out.push(&mut self.dense.w);
        out.push(&mut self.dense.b);
        out
    }

    /// Names and shapes aligned with [`Self::tensors`].
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for (li, l) in self.layers.iter().enumerate() {
            out.push(TensorSpec {
                name: format!("layer{li}.w_ih"),
                shape: vec![4 * l.units, l.in_dim],
            });
            out.push(TensorSpec {
                name: format!("layer{li}.w_hh"),
                shape: vec![4 * l.units, l.units],
            });
            out.push(TensorSpec { name: format!("layer{li}.bias"), shape: vec![4 * l.units] });
        }
        out.push(TensorSpec {
            name: "dense.w".into(),
            shape: vec![self.dense.horizon, self.dense.in_dim],
        });
        out.push(TensorSpec { name: "dense.b".into(), shape: vec![self.dense.horizon] });
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

fn fill_glorot<S: Scalar>(w: &mut [S], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in w.iter_mut() {
        *x = S::from_f64((2.0 * rng.gen::<f64>() - 1.0) * limit);
    }
}


// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

/// A mini-batch of sliding windows. `inputs` is `[in_dim × (window · batch)]`
/// row-major with column index `t·batch + b`; `targets` is
/// `[horizon × batch]`.
#[derive(Clone, Debug)]
pub struct LstmBatch<S> {
    pub inputs: Vec<S>,
    pub targets: Vec<S>,
    pub window: usize,
    pub batch: usize,
}

impl<S: Scalar> LstmBatch<S> {
    fn check_against(&self, params: &LstmParams<S>) -> Result<()> {
        let in_dim = params.layers[0].in_dim;
        if self.window == 0 || self.batch == 0 {
            return Err(Error::Contract("lstm batch: empty window or batch".into()));
        }
        if self.inputs.len() != in_dim * self.window * self.batch {
            return Err(Error::Contract(format!(
                "lstm batch: {} inputs, expected {} ({} per step x {} steps x {} sequences)",
                self.inputs.len(),
                in_dim * self.window * self.batch,
                in_dim,
                self.window,
                self.batch
            )));
        }
        if self.targets.len() != params.dense.horizon * self.batch {
            return Err(Error::Contract(format!(
                "lstm batch: {} targets, expected {}",
                self.targets.len(),
                params.dense.horizon * self.batch
            )));
        }
        Ok(())
    }
}

/// Gather sliding windows `starts[b] .. +window` (inputs) and the following
/// `horizon` points (targets) from a scalar series.
pub fn make_batch<S: Scalar>(
    xs: &[S],
    starts: &[usize],
    window: usize,
    horizon: usize,
) -> LstmBatch<S> {
    let b = starts.len();
    let mut inputs = vec![S::ZERO; window * b];
    let mut targets = vec![S::ZERO; horizon * b];
    for (bb, &st) in starts.iter().enumerate() {
        debug_assert!(st + window + horizon <= xs.len());
        for t in 0..window {
            inputs[t * b + bb] = xs[st + t];
        }
        for hh in 0..horizon {
            targets[hh * b + bb] = xs[st + window + hh];
        }
    }
    LstmBatch { inputs, targets, window, batch: b }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Post-activation sequence buffers of one layer, each `[U × (T·B)]`.
struct LayerCache<S> {
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
    c: Vec<S>,
    hc: Vec<S>,
    h: Vec<S>,
}

fn layer_forward<S: Scalar>(
    layer: &LstmLayer<S>,
    activation: Activation,
    input: &[S],
    t_steps: usize,
    b: usize,
) -> LayerCache<S> {
    let u = layer.units;
    let g4 = 4 * u;
    let tb = t_steps * b;

    // Input transform for the whole sequence in one product.
    let mut z = vec![S::ZERO; g4 * tb];
    S::gemm(false, false, g4, tb, layer.in_dim, 1.0, &layer.w_ih, layer.in_dim, input, tb, 0.0, &mut z, tb);

    let mut cache = LayerCache {
        i: vec![S::ZERO; u * tb],
        f: vec![S::ZERO; u * tb],
        g: vec![S::ZERO; u * tb],
        o: vec![S::ZERO; u * tb],
        c: vec![S::ZERO; u * tb],
        hc: vec![S::ZERO; u * tb],
        h: vec![S::ZERO; u * tb],
    };

    for t in 0..t_steps {
        if t > 0 {
            // z[:, t-block] += W_hh · h_{t-1}
            S::gemm(
                false, false, g4, b, u, 1.0, &layer.w_hh, u, &cache.h[(t - 1) * b..], tb, 1.0,
                &mut z[t * b..], tb,
            );
        }
        for uu in 0..u {
            for bb in 0..b {
                let col = t * b + bb;
                let zi = z[uu * tb + col] + layer.bias[uu];
                let zf = z[(u + uu) * tb + col] + layer.bias[u + uu];
                let zg = z[(2 * u + uu) * tb + col] + layer.bias[2 * u + uu];
                let zo = z[(3 * u + uu) * tb + col] + layer.bias[3 * u + uu];
                let iv = zi.sigmoid();
                let fv = zf.sigmoid();
                let gv = activation.apply(zg);
                let ov = zo.sigmoid();
                let idx = uu * tb + col;
                let c_prev = if t > 0 { cache.c[idx - b] } else { S::ZERO };
                let cv = fv * c_prev + iv * gv;
                let hcv = activation.apply(cv);
                cache.i[idx] = iv;
                cache.f[idx] = fv;
                cache.g[idx] = gv;
                cache.o[idx] = ov;
                cache.c[idx] = cv;
                cache.hc[idx] = hcv;
                cache.h[idx] = ov * hcv;
            }
        }
    }
    cache
}

fn forward_cached<S: Scalar>(
    params: &LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
) -> Result<(Vec<S>, Vec<LayerCache<S>>)> {
    params.check_consistent()?;
    batch.check_against(params)?;
    let t_steps = batch.window;
    let b = batch.batch;
    let tb = t_steps * b;

    let mut caches: Vec<LayerCache<S>> = Vec::with_capacity(params.layers.len());
    for (li, layer) in params.layers.iter().enumerate() {
        let cache = {
            let input: &[S] = if li == 0 { &batch.inputs } else { &caches[li - 1].h };
            layer_forward(layer, activation, input, t_steps, b)
        };
        caches.push(cache);
    }

    // Dense readout from the last hidden state of the top layer.
    let d = &params.dense;
    let top_h = &caches[caches.len() - 1].h;
    let mut y = vec![S::ZERO; d.horizon * b];
    S::gemm(
        false, false, d.horizon, b, d.in_dim, 1.0, &d.w, d.in_dim, &top_h[(t_steps - 1) * b..],
        tb, 0.0, &mut y, b,
    );
    for hh in 0..d.horizon {
        for bb in 0..b {
            y[hh * b + bb] = y[hh * b + bb] + d.b[hh];
        }
    }
    Ok((y, caches))
}

/// Run the network on a batch; returns `[horizon × batch]` predictions in the
/// normalized domain.
pub fn lstm_forward<S: Scalar>(
    params: &LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
) -> Result<Vec<S>> {
    Ok(forward_cached(params, activation, batch)?.0)
}

/// Batch mean squared error of predictions vs targets.
pub fn mse<S: Scalar>(y: &[S], targets: &[S]) -> f64 {
    assert_eq!(y.len(), targets.len());
    let n = y.len().max(1) as f64;
    y.iter()
        .zip(targets)
        .map(|(a, t)| {
            let d = a.to_f64() - t.to_f64();
            d * d
        })
        .sum::<f64>()
        / n
}

/// Forward pass + loss, no gradient work. The probe the finite-difference
/// oracle evaluates.
pub fn lstm_loss<S: Scalar>(
    params: &LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
) -> Result<f64> {
    let y = lstm_forward(params, activation, batch)?;
    Ok(mse(&y, &batch.targets))
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Full BPTT: batch MSE and its gradient w.r.t. every parameter.
pub fn lstm_loss_and_gradients<S: Scalar>(
    params: &LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
) -> Result<(f64, LstmParams<S>)> {
    let (y, caches) = forward_cached(params, activation, batch)?;
    let loss = mse(&y, &batch.targets);

    let t_steps = batch.window;
    let b = batch.batch;
    let tb = t_steps * b;
    let nl = params.layers.len();
    let mut grads = params.zeros_like();

    // Dense layer: dL/dy, then its kernel/bias/input gradients.
    let d = &params.dense;
    let scale = S::from_f64(2.0 / y.len() as f64);
    let mut dy = vec![S::ZERO; y.len()];
    for k in 0..y.len() {
        dy[k] = scale * (y[k] - batch.targets[k]);
    }
    let top_h = &caches[nl - 1].h;
    S::gemm(
        false, true, d.horizon, d.in_dim, b, 1.0, &dy, b, &top_h[(t_steps - 1) * b..], tb, 1.0,
        &mut grads.dense.w, d.in_dim,
    );
    for hh in 0..d.horizon {
        for bb in 0..b {
            grads.dense.b[hh] = grads.dense.b[hh] + dy[hh * b + bb];
        }
    }
    // Upstream signal entering the top layer: zero everywhere except the last
    // timestep, which receives the dense layer's input gradient.
    let u_top = params.layers[nl - 1].units;
    let mut dh_above = vec![S::ZERO; u_top * tb];
    S::gemm(
        true, false, d.in_dim, b, d.horizon, 1.0, &d.w, d.in_dim, &dy, b, 0.0,
        &mut dh_above[(t_steps - 1) * b..], tb,
    );

    for li in (0..nl).rev() {
        let layer = &params.layers[li];
        let cache = &caches[li];
        let u = layer.units;
        let g4 = 4 * u;

        let mut dz = vec![S::ZERO; g4 * tb];
        let mut dh_carry = vec![S::ZERO; u * b]; // recurrent dL/dh from t+1
        let mut dc_carry = vec![S::ZERO; u * b]; // dL/dc from t+1

        for t in (0..t_steps).rev() {
            for uu in 0..u {
                for bb in 0..b {
                    let col = t * b + bb;
                    let idx = uu * tb + col;
                    let sidx = uu * b + bb;

                    let dh = dh_above[idx] + dh_carry[sidx];
                    let iv = cache.i[idx];
                    let fv = cache.f[idx];
                    let gv = cache.g[idx];
                    let ov = cache.o[idx];
                    let hcv = cache.hc[idx];

                    let dzo = dh * hcv * ov * (S::ONE - ov);
                    let dc =
                        dh * ov * activation.deriv_from_post(hcv) + dc_carry[sidx];
                    let dzi = dc * gv * iv * (S::ONE - iv);
                    let dzg = dc * iv * activation.deriv_from_post(gv);
                    let dzf = if t > 0 {
                        dc * cache.c[idx - b] * fv * (S::ONE - fv)
                    } else {
                        S::ZERO // c_{-1} = 0: the forget path carries nothing
                    };
                    dc_carry[sidx] = dc * fv;

                    dz[uu * tb + col] = dzi;
                    dz[(u + uu) * tb + col] = dzf;
                    dz[(2 * u + uu) * tb + col] = dzg;
                    dz[(3 * u + uu) * tb + col] = dzo;
                }
            }
            if t > 0 {
                // dh_{t-1} += W_hhᵀ · dz_t (recurrent path)
                S::gemm(
                    true, false, u, b, g4, 1.0, &layer.w_hh, u, &dz[t * b..], tb, 0.0,
                    &mut dh_carry, b,
                );
            }
        }

        let lg = &mut grads.layers[li];
        for r in 0..g4 {
            let mut s = S::ZERO;
            for col in 0..tb {
                s = s + dz[r * tb + col];
            }
            lg.bias[r] = s;
        }
        let input: &[S] = if li == 0 { &batch.inputs } else { &caches[li - 1].h };
        S::gemm(
            false, true, g4, layer.in_dim, tb, 1.0, &dz, tb, input, tb, 1.0, &mut lg.w_ih,
            layer.in_dim,
        );
        if t_steps > 1 {
            // dW_hh batches over all timesteps at once: dz from t=1.. against
            // hidden states shifted one step back.
            S::gemm(
                false, true, g4, u, (t_steps - 1) * b, 1.0, &dz[b..], tb, &cache.h, tb, 1.0,
                &mut lg.w_hh, u,
            );
        }
        if li > 0 {
            let below = params.layers[li - 1].units;
            dh_above = vec![S::ZERO; below * tb];
            S::gemm(
                true, false, layer.in_dim, tb, g4, 1.0, &layer.w_ih, layer.in_dim, &dz, tb, 0.0,
                &mut dh_above, tb,
            );
        }
    }

    Ok((loss, grads))
}

/// Gradient of batch MSE w.r.t. every parameter (spec surface; loss
/// discarded).
pub fn lstm_gradients<S: Scalar>(
    params: &LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
) -> Result<LstmParams<S>> {
    Ok(lstm_loss_and_gradients(params, activation, batch)?.1)
}

/// Compare analytic gradients against central finite differences
/// (`(L(θ+h) − L(θ−h)) / 2h`) over every parameter; returns the maximum
/// guarded relative error. Run with `S = f64` — f32 rounding would swamp the
/// comparison.
pub fn finite_difference_max_rel_err<S: Scalar>(
    params: &mut LstmParams<S>,
    activation: Activation,
    batch: &LstmBatch<S>,
    step: f64,
) -> Result<f64> {
    let (_, grads) = lstm_loss_and_gradients(params, activation, batch)?;
    let flat_grads: Vec<f64> = grads.tensors().iter().flat_map(|t| t.iter().map(|x| x.to_f64())).collect();

    let mut max_rel = 0.0f64;
    let mut flat_idx = 0usize;
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].len();
        for ei in 0..len {
            let orig = params.tensors()[ti][ei];
            let probe = |params: &mut LstmParams<S>, v: f64| -> Result<f64> {
                params.tensors_mut()[ti][ei] = S::from_f64(v);
                lstm_loss(params, activation, batch)
            };
            let x = orig.to_f64();
            let lp = probe(params, x + step)?;
            let lm = probe(params, x - step)?;
            params.tensors_mut()[ti][ei] = orig;

            let numeric = (lp - lm) / (2.0 * step);
            let analytic = flat_grads[flat_idx];
            let denom = numeric.abs().max(analytic.abs()).max(1e-4);
            max_rel = max_rel.max((numeric - analytic).abs() / denom);
            flat_idx += 1;
        }
    }
    Ok(max_rel)
}

// ---------------------------------------------------------------------------
// Adam + training loop
// ---------------------------------------------------------------------------

struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: u32,
    m: LstmParams<f32>,
    v: LstmParams<f32>,
}

impl Adam {
    fn new(params: &LstmParams<f32>, opt: &OptimizerConfig) -> Self {
        Adam {
            lr: opt.learning_rate,
            b1: opt.beta1,
            b2: opt.beta2,
            eps: opt.epsilon,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    fn step(&mut self, params: &mut LstmParams<f32>, grads: &LstmParams<f32>) {
        self.t += 1;
        let bc1 = 1.0 - self.b1.powi(self.t as i32);
        let bc2 = 1.0 - self.b2.powi(self.t as i32);
        let (b1, b2) = (self.b1, self.b2);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for k in 0..p.len() {
                let gk = g[k] as f64;
                let mk = b1 * m[k] as f64 + (1.0 - b1) * gk;
                let vk = b2 * v[k] as f64 + (1.0 - b2) * gk * gk;
                m[k] = mk as f32;
                v[k] = vk as f32;
                let update = self.lr * (mk / bc1) / ((vk / bc2).sqrt() + self.eps);
                p[k] = (p[k] as f64 - update) as f32;
            }
        }
    }
}

/// Deterministic Fisher–Yates, pinned here rather than relying on
/// `SliceRandom` so shuffle order can never drift with a dependency upgrade.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// Trained weights plus the series normalization they assume.
#[derive(Clone, Debug)]
pub struct TrainedLstm {
    pub params: LstmParams<f32>,
    pub normalization: Normalization,
    /// Mean training loss over the final epoch (normalized domain).
    pub final_epoch_loss: f64,
}

/// Train on sliding windows of the min-max-normalized series.
///
/// Mini-batches are drawn by shuffling window start indices each epoch with a
/// ChaCha8 stream seeded from `config.seed`; together with single-threaded
/// GEMM this makes training bit-deterministic.
pub fn train_values(values: &[f64], config: &LstmConfig) -> Result<TrainedLstm> {
    config.validate()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("training series contains non-finite values".into()));
    }
    let need = config.input_window + config.horizon + 1;
    if values.len() < need {
        return Err(Error::Training(format!(
            "training series has {} points, need at least {} (input_window + horizon + 1)",
            values.len(),
            need
        )));
    }

    let normalization = Normalization::fit(values);
    let xs: Vec<f32> = values.iter().map(|v| normalization.normalize(*v) as f32).collect();
    let n_windows = values.len() - config.input_window - config.horizon + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::<f32>::init(config, &mut rng);
    let mut adam = Adam::new(&params, &config.optimizer);
    let mut order: Vec<usize> = (0..n_windows).collect();

    let mut final_epoch_loss = 0.0;
    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = make_batch(&xs, chunk, config.input_window, config.horizon);
            let (loss, grads) = lstm_loss_and_gradients(&params, config.activation, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut params, &grads);
            loss_sum += loss * chunk.len() as f64;
        }
        final_epoch_loss = loss_sum / n_windows as f64;
    }
    if !params.all_finite() {
        return Err(Error::Divergence { epoch: config.epochs - 1 });
    }
    Ok(TrainedLstm { params, normalization, final_epoch_loss })
}

/// One-shot prediction from a raw (denormalized) window; returns `horizon`
/// values clamped to ≥ 0.
pub fn predict(
    params: &LstmParams<f32>,
    activation: Activation,
    normalization: &Normalization,
    input_window: usize,
    window: &[f64],
) -> Result<Vec<f64>> {
    if window.len() != input_window {
        return Err(Error::Contract(format!(
            "lstm predict: window has {} values, model expects {}",
            window.len(),
            input_window
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("lstm predict: window contains non-finite values".into()));
    }
    let xs: Vec<f32> = window.iter().map(|v| normalization.normalize(*v) as f32).collect();
    let batch = LstmBatch {
        inputs: xs,
        targets: vec![0.0f32; params.dense.horizon],
        window: input_window,
        batch: 1,
    };
    let y = lstm_forward(params, activation, &batch)?;
    Ok(y.iter().map(|v| normalization.denormalize(v.to_f64()).max(0.0)).collect())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
