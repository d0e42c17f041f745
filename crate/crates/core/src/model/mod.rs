//! The multi-view transformer.
//!
//! Three views of one sample are encoded separately:
//!
//! * sensor-as-channel: a stack of dilated convolutions over time, finished by
//!   `tanh(x) * sigmoid(x)`;
//! * time-as-token: a one-layer transformer encoder over the `L` time steps;
//! * sensor-as-token: a one-layer transformer encoder over the `N_s` sensors.
//!
//! Their `L x E`, `L x E` and `N_s x E` outputs are stacked into one token
//! matrix, mixed by self-attention across all tokens, normalized, passed
//! through a feed-forward block and split back into the three views. This
//! repeats for `blocks` layers. In [`Variant::V4`] the observation masks are
//! encoded by the *layer-1* view encoders (no extra weights), gated by
//! `tanh * sigmoid` and added to each view's final output. The final tokens
//! are mean-pooled and classified by one affine layer.

mod checkpoint;
mod config;
mod layout;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{ModelConfig, Switches, Variant, COMPONENT_ROWS};

use crate::autodiff::{OpKind, Tape, Var};
use crate::data::IrtsSample;
use crate::error::{Error, Result};
use crate::params::{Binding, ParamStore};
use crate::rng::{derive_seed, rng_from, stream};
use crate::tensor::Tensor;
use layout::{Attention, EncoderLayer, Layout, Linear, TcEncoder, TokenEncoder};

/// A configured model and its weights.
#[derive(Clone, Debug)]
pub struct MvFormer {
    config: ModelConfig,
    layout: Layout,
    params: ParamStore,
}

impl MvFormer {
    /// Fresh model with fan-in uniform weights drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = rng_from(derive_seed(seed, stream::INIT));
        let layout = Layout::build(&config, &mut params, &mut rng);
        Ok(MvFormer { config, layout, params })
    }

    /// Rebuild around existing weights; shapes must match the config.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = MvFormer::new(config, 0)?;
        if model.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "config expects {} parameter tensors, got {}",
                model.params.len(),
                params.len()
            )));
        }
        for ((_, name, want), (_, got_name, got)) in model.params.iter().zip(params.iter()) {
            if name != got_name || want.shape() != got.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{got_name}` {:?} does not match expected `{name}` {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Scalar weight count.
    pub fn num_trainable(&self) -> usize {
        self.params.num_scalars()
    }

    /// Class logits for one sample.
    pub fn logits(&self, sample: &IrtsSample) -> Result<Vec<f64>> {
        let mut s = Session::new(self);
        let out = s.forward(sample)?;
        Ok(s.tape.value(out).data().to_vec())
    }

    /// Softmax of [`MvFormer::logits`].
    pub fn predict_proba(&self, sample: &IrtsSample) -> Result<Vec<f64>> {
        Ok(predict_proba(&self.logits(sample)?))
    }

    /// Forward pass with every intermediate state recorded.
    pub fn trace(&self, sample: &IrtsSample) -> Result<Trace> {
        let mut s = Session::new(self).recording();
        let out = s.forward(sample)?;
        let mut trace = s.trace.take().expect("recording session");
        trace.logits = s.tape.value(out).data().to_vec();
        Ok(trace)
    }
}

/// Numerically stable softmax.
pub fn predict_proba(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    crate::autodiff::softmax_vec(&mut p);
    p
}

/// Value snapshot of the three views and their stacked form.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedState {
    pub e_c: Option<Tensor>,
    pub e_t: Option<Tensor>,
    pub e_s: Option<Tensor>,
    pub fused: Tensor,
}

/// Gated mask embeddings per view.
#[derive(Clone, Debug, PartialEq)]
pub struct GateState {
    pub g_c: Option<Tensor>,
    pub g_t: Option<Tensor>,
    pub g_s: Option<Tensor>,
}

#[derive(Clone, Debug)]
pub struct BlockTrace {
    /// Stacked view encodings entering the fusion attention.
    pub input: FusedState,
    /// One `tokens x tokens` row-stochastic matrix per head.
    pub attention: Vec<Tensor>,
    /// Fusion output, split back into views.
    pub output: FusedState,
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub blocks: Vec<BlockTrace>,
    pub gate: Option<GateState>,
    /// Final tokens after gate addition.
    pub final_tokens: Option<Tensor>,
    pub pooled: Option<Tensor>,
    pub logits: Vec<f64>,
}

/// Tape handles for the three views and their stacked form.
#[derive(Clone, Copy, Debug)]
pub struct FusedVars {
    pub e_c: Option<Var>,
    pub e_t: Option<Var>,
    pub e_s: Option<Var>,
    pub fused: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub g_c: Option<Var>,
    pub g_t: Option<Var>,
    pub g_s: Option<Var>,
}

/// Model inputs for one sample after variant dispatch.
#[derive(Clone, Debug)]
pub struct ViewInputs {
    /// `L x (N_s * f)`.
    pub time: Tensor,
    /// `N_s x (L * f)`.
    pub sensor: Tensor,
    /// `(N_s * f) x L`.
    pub channels: Tensor,
    /// `L x N_s` observation mask.
    pub mask: Tensor,
}

/// Build the per-view inputs for `sample` under `config.variant`.
pub fn view_inputs(config: &ModelConfig, sample: &IrtsSample) -> Result<ViewInputs> {
    if sample.len() != config.seq_len || sample.sensors() != config.n_sensors {
        return Err(Error::Dimension(format!(
            "sample {} is {}x{}, model expects {}x{}",
            sample.id(),
            sample.len(),
            sample.sensors(),
            config.seq_len,
            config.n_sensors
        )));
    }
    let mask = sample.time_mask();
    let values = match config.variant {
        Variant::V2 => mask.clone(),
        _ => sample.values_filled(),
    };
    let (time, sensor, channels) = if config.variant == Variant::V3 {
        let time = hcat(&values, &mask)?;
        let (vt, mt) = (values.transpose()?, mask.transpose()?);
        let sensor = hcat(&vt, &mt)?;
        let mut ch = vt.data().to_vec();
        ch.extend_from_slice(mt.data());
        let channels = Tensor::new(&[2 * config.n_sensors, config.seq_len], ch)?;
        (time, sensor, channels)
    } else {
        let t = values.transpose()?;
        (values, t.clone(), t)
    };
    Ok(ViewInputs { time, sensor, channels, mask })
}

fn hcat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, p) = a.dims2()?;
    let (m2, q) = b.dims2()?;
    if m != m2 {
        return Err(Error::Dimension(format!("hcat of {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut data = Vec::with_capacity(m * (p + q));
    for i in 0..m {
        data.extend_from_slice(a.row(i));
        data.extend_from_slice(b.row(i));
    }
    Tensor::new(&[m, p + q], data)
}

/// Sinusoidal position table, `len x dim`.
pub fn positional_encoding(len: usize, dim: usize) -> Tensor {
    let mut data = vec![0.0; len * dim];
    for t in 0..len {
        for j in 0..dim {
            let rate = 10000f64.powf((2 * (j / 2)) as f64 / dim as f64);
            let angle = t as f64 / rate;
            data[t * dim + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(&[len, dim], data).expect("pe shape")
}

/// One forward (and optionally backward) pass over a fresh tape.
pub struct Session<'m> {
    model: &'m MvFormer,
    pub tape: Tape,
    bind: Binding,
    dropout_rng: Option<ChaCha8Rng>,
    trace: Option<Trace>,
}

impl<'m> Session<'m> {
    /// Inference session: dropout off.
    pub fn new(model: &'m MvFormer) -> Self {
        Session::with_tape(model, Tape::new())
    }

    /// Session on a caller-supplied tape (for example one with an injected
    /// backward fault).
    pub fn with_tape(model: &'m MvFormer, tape: Tape) -> Self {
        Session::with_params(model, &model.params, tape)
    }

    /// Session that runs `model`'s architecture on substitute weights of the
    /// same layout.
    pub fn with_params(model: &'m MvFormer, params: &ParamStore, mut tape: Tape) -> Self {
        debug_assert_eq!(params.len(), model.params.len());
        let bind = params.bind(&mut tape);
        Session { model, tape, bind, dropout_rng: None, trace: None }
    }

    /// Training session: dropout active when the configured rate is positive.
    pub fn training(model: &'m MvFormer, rng: ChaCha8Rng) -> Self {
        let mut s = Session::new(model);
        if model.config.dropout > 0.0 {
            s.dropout_rng = Some(rng);
        }
        s
    }

    pub fn recording(mut self) -> Self {
        self.trace = Some(Trace::default());
        self
    }

    pub fn binding(&self) -> &Binding {
        &self.bind
    }

    pub fn fault(&self) -> Option<OpKind> {
        self.tape.fault()
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    fn cfg(&self) -> &'m ModelConfig {
        &self.model.config
    }

    fn layout(&self) -> &'m Layout {
        &self.model.layout
    }

    fn linear(&mut self, x: Var, l: &Linear) -> Result<Var> {
        let y = self.tape.matmul(x, self.bind.var(l.w))?;
        self.tape.add_row(y, self.bind.var(l.b))
    }

    fn dropout(&mut self, x: Var) -> Result<Var> {
        let rate = self.cfg().dropout;
        let Some(rng) = self.dropout_rng.as_mut() else { return Ok(x) };
        let keep = 1.0 - rate;
        let shape = self.tape.shape(x).to_vec();
        let n = shape.iter().product();
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let m = self.tape.constant(Tensor::new(&shape, mask)?);
        self.tape.mul(x, m)
    }

    /// Multi-head scaled dot-product self-attention. Returns the output and
    /// the per-head attention matrices.
    fn attention(&mut self, x: Var, a: &Attention) -> Result<(Var, Vec<Var>)> {
        let e = self.cfg().embed_dim;
        let heads = self.cfg().heads;
        let dk = e / heads;
        let q = self.linear(x, &a.q)?;
        let k = self.linear(x, &a.k)?;
        let v = self.linear(x, &a.v)?;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        let mut weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * dk, dk)?;
            let kh = self.tape.slice_cols(k, h * dk, dk)?;
            let vh = self.tape.slice_cols(v, h * dk, dk)?;
            let kt = self.tape.transpose(kh)?;
            let logits = self.tape.matmul(qh, kt)?;
            let logits = self.tape.scale(logits, scale);
            let w = self.tape.softmax_rows(logits)?;
            outs.push(self.tape.matmul(w, vh)?);
            weights.push(w);
        }
        let cat = if heads == 1 { outs[0] } else { self.tape.concat_cols(&outs)? };
        Ok((self.linear(cat, &a.o)?, weights))
    }

    /// Post-norm transformer layer: attention, residual, norm, feed-forward,
    /// residual, norm.
    fn encoder_layer(&mut self, x: Var, l: &EncoderLayer) -> Result<(Var, Vec<Var>)> {
        let eps = self.cfg().ln_eps;
        let (att, weights) = self.attention(x, &l.attn)?;
        let att = self.dropout(att)?;
        let h = self.tape.add(x, att)?;
        let h = self.tape.layer_norm(h, self.bind.var(l.norm1.gain), self.bind.var(l.norm1.bias), eps)?;
        let up = self.linear(h, &l.ffn.up)?;
        let up = self.tape.relu(up);
        let f = self.linear(up, &l.ffn.down)?;
        let f = self.dropout(f)?;
        let h2 = self.tape.add(h, f)?;
        let out = self.tape.layer_norm(h2, self.bind.var(l.norm2.gain), self.bind.var(l.norm2.bias), eps)?;
        Ok((out, weights))
    }

    fn block(&self, layer: usize) -> Result<&'m layout::Block> {
        self.layout()
            .blocks
            .get(layer.wrapping_sub(1))
            .ok_or_else(|| Error::Dimension(format!("layer {layer} outside 1..={}", self.cfg().blocks)))
    }

    fn token_encoder(&mut self, x: Var, enc: &TokenEncoder, in_width: usize, positional: bool) -> Result<Var> {
        let (_, w) = self.tape.value(x).dims2()?;
        if w != in_width {
            return Err(Error::Dimension(format!("token encoder expects width {in_width}, got {w}")));
        }
        let mut h = x;
        if let Some(input) = &enc.input {
            h = self.linear(h, input)?;
            if positional {
                let (rows, e) = self.tape.value(h).dims2()?;
                let pe = self.tape.constant(positional_encoding(rows, e));
                h = self.tape.add(h, pe)?;
            }
        }
        Ok(self.encoder_layer(h, &enc.layer)?.0)
    }

    /// Time-as-token encoder of layer `layer` (1-based): `L x w -> L x E`.
    /// Sinusoidal positions are added after the layer-1 projection when
    /// `positional` is set.
    pub fn encode_time_tokens(&mut self, x: Var, layer: usize, positional: bool) -> Result<Var> {
        let enc = self.block(layer)?.time.as_ref().ok_or_else(|| Error::Config("time view is disabled".into()))?;
        let width = enc.in_width;
        self.token_encoder(x, enc, width, positional)
    }

    /// Sensor-as-token encoder: `N_s x w -> N_s x E`. No positional signal.
    pub fn encode_sensor_tokens(&mut self, x: Var, layer: usize) -> Result<Var> {
        let enc = self.block(layer)?.sensor.as_ref().ok_or_else(|| Error::Config("sensor view is disabled".into()))?;
        let width = enc.in_width;
        self.token_encoder(x, enc, width, false)
    }

    /// Sensor-as-channel encoder: `C x L -> L x E` through the dilated
    /// convolution stack and the gated activation.
    pub fn tc_block(&mut self, x: Var, layer: usize) -> Result<Var> {
        let enc: &TcEncoder =
            self.block(layer)?.tc.as_ref().ok_or_else(|| Error::Config("tc view is disabled".into()))?;
        let (c, len) = self.tape.value(x).dims2()?;
        if len < 1 {
            return Err(Error::Dimension("tc block over an empty sequence".into()));
        }
        if c != enc.in_channels {
            return Err(Error::Dimension(format!("tc block expects {} channels, got {c}", enc.in_channels)));
        }
        let mut h = x;
        for (conv, &d) in enc.convs.iter().zip(&self.cfg().dilations) {
            h = self.tape.dilated_conv1d(h, self.bind.var(conv.kernel), Some(self.bind.var(conv.bias)), d)?;
        }
        let g = self.tape.gated_activation(h);
        self.tape.transpose(g)
    }

    /// Stack the enabled views in (tc, time, sensor) order.
    pub fn stack_views(&mut self, e_c: Option<Var>, e_t: Option<Var>, e_s: Option<Var>) -> Result<FusedVars> {
        let parts: Vec<Var> = [e_c, e_t, e_s].into_iter().flatten().collect();
        let fused = self.tape.concat_rows(&parts)?;
        Ok(FusedVars { e_c, e_t, e_s, fused })
    }

    /// Cross-view fusion of layer `layer`: self-attention over all stacked
    /// tokens, residual, norm, feed-forward, residual, norm, then split back
    /// into the views.
    pub fn fuse_block(&mut self, state: &FusedVars, layer: usize) -> Result<FusedVars> {
        let fusion = &self.block(layer)?.fusion;
        let (out, weights) = self.encoder_layer(state.fused, fusion)?;
        let sizes = self.cfg().split_sizes();
        let mut parts = self.tape.split_rows(out, &sizes)?.into_iter();
        let sw = self.cfg().switches;
        let mut next = |on: bool| if on { parts.next() } else { None };
        let result = FusedVars { e_c: next(sw.tc), e_t: next(sw.time), e_s: next(sw.sensor), fused: out };
        if self.trace.is_some() {
            let input = self.snapshot(state);
            let output = self.snapshot(&result);
            let attention = weights.iter().map(|w| self.tape.value(*w).clone()).collect();
            self.trace.as_mut().unwrap().blocks.push(BlockTrace { input, attention, output });
        }
        Ok(result)
    }

    fn snapshot(&self, s: &FusedVars) -> FusedState {
        let v = |x: Option<Var>| x.map(|x| self.tape.value(x).clone());
        FusedState { e_c: v(s.e_c), e_t: v(s.e_t), e_s: v(s.e_s), fused: self.tape.value(s.fused).clone() }
    }

    /// Encode `m_t` (`L x N_s`) with the layer-1 view encoders and gate the
    /// result with `tanh(e) * sigmoid(e + gate_bias)`.
    pub fn irregularity_gate(&mut self, m_t: Var) -> Result<GateVars> {
        let sw = self.cfg().switches;
        let bias = self.cfg().gate_bias;
        let m_s = self.tape.transpose(m_t)?;
        let mut g = GateVars { g_c: None, g_t: None, g_s: None };
        if sw.tc {
            let e = self.tc_block(m_s, 1)?;
            g.g_c = Some(self.tape.gate(e, bias));
        }
        if sw.time {
            let e = self.encode_time_tokens(m_t, 1, false)?;
            g.g_t = Some(self.tape.gate(e, bias));
        }
        if sw.sensor {
            let e = self.encode_sensor_tokens(m_s, 1)?;
            g.g_s = Some(self.tape.gate(e, bias));
        }
        if self.trace.is_some() {
            let v = |x: Option<Var>| x.map(|x| self.tape.value(x).clone());
            let state = GateState { g_c: v(g.g_c), g_t: v(g.g_t), g_s: v(g.g_s) };
            self.trace.as_mut().unwrap().gate = Some(state);
        }
        Ok(g)
    }

    /// Logits (`1 x num_classes`) for one sample.
    pub fn forward(&mut self, sample: &IrtsSample) -> Result<Var> {
        let cfg = self.cfg();
        let inputs = view_inputs(cfg, sample)?;
        let sw = cfg.switches;

        let mut e_c = None;
        let mut e_t = None;
        let mut e_s = None;
        if sw.tc {
            let x = self.tape.constant(inputs.channels.clone());
            e_c = Some(self.tc_block(x, 1)?);
        }
        if sw.time {
            let x = self.tape.constant(inputs.time.clone());
            e_t = Some(self.encode_time_tokens(x, 1, true)?);
        }
        if sw.sensor {
            let x = self.tape.constant(inputs.sensor.clone());
            e_s = Some(self.encode_sensor_tokens(x, 1)?);
        }
        let mut state = self.stack_views(e_c, e_t, e_s)?;
        state = self.fuse_block(&state, 1)?;
        for layer in 2..=cfg.blocks {
            let c = match state.e_c {
                Some(v) => {
                    let ch = self.tape.transpose(v)?;
                    Some(self.tc_block(ch, layer)?)
                }
                None => None,
            };
            let t = match state.e_t {
                Some(v) => Some(self.encode_time_tokens(v, layer, false)?),
                None => None,
            };
            let s = match state.e_s {
                Some(v) => Some(self.encode_sensor_tokens(v, layer)?),
                None => None,
            };
            let stacked = self.stack_views(c, t, s)?;
            state = self.fuse_block(&stacked, layer)?;
        }

        let (mut c, mut t, mut s) = (state.e_c, state.e_t, state.e_s);
        if cfg.gated() {
            let mask = self.tape.constant(inputs.mask.clone());
            let g = self.irregularity_gate(mask)?;
            for (view, gate) in [(&mut c, g.g_c), (&mut t, g.g_t), (&mut s, g.g_s)] {
                if let (Some(v), Some(gv)) = (view.as_mut(), gate) {
                    *v = self.tape.add(*v, gv)?;
                }
            }
        }
        let parts: Vec<Var> = [c, t, s].into_iter().flatten().collect();
        let tokens = self.tape.concat_rows(&parts)?;
        let pooled = self.tape.mean_rows(tokens)?;
        let logits = self.linear(pooled, &self.layout().head)?;
        if let Some(trace) = self.trace.as_mut() {
            trace.final_tokens = Some(self.tape.value(tokens).clone());
            trace.pooled = Some(self.tape.value(pooled).clone());
        }
        Ok(logits)
    }

    /// Weighted cross-entropy of one sample.
    pub fn loss(&mut self, sample: &IrtsSample, weight: f64) -> Result<Var> {
        let logits = self.forward(sample)?;
        self.tape.cross_entropy(logits, sample.label(), weight)
    }

    /// Mean weighted cross-entropy over a batch.
    pub fn batch_loss(&mut self, samples: &[&IrtsSample], class_weights: &[f64]) -> Result<Var> {
        if samples.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let mut terms = Vec::with_capacity(samples.len());
        for s in samples {
            let w = class_weights.get(s.label()).copied().unwrap_or(1.0);
            terms.push(self.loss(s, w)?);
        }
        let stacked = self.tape.concat_rows(&terms)?;
        let total = self.tape.sum(stacked);
        Ok(self.tape.scale(total, 1.0 / samples.len() as f64))
    }

    /// Run backward from `loss` and return per-parameter gradients in store
    /// order.
    pub fn gradients(&mut self, loss: Var) -> Result<Vec<Tensor>> {
        let grads = self.tape.backward(loss)?;
        Ok(self.bind.collect(&grads))
    }
}
