use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{expect_shapes, fit, read_weights, round_to_f32, write_weights, zeros_like, Loss, Param, TrainSpec};
use crate::dataset::{sequence_input, LSTM_MAX_LEN};
use crate::error::{Error, Result};
use crate::model::{Trace, Waveform};

const KIND: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmConfig {
    pub hidden: usize,
    pub encoder_layers: usize,
    /// Feed the encoder the waveform back to front.
    pub reverse: bool,
    pub loss: Loss,
}

impl LstmConfig {
    /// Full-trace preset: 256 units.
    pub fn trace() -> Self {
        LstmConfig { hidden: 256, encoder_layers: 2, reverse: true, loss: Loss::L1 }
    }

    /// End-of-life preset: 25 units.
    pub fn eol() -> Self {
        LstmConfig { hidden: 25, ..Self::trace() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "lstm-trace" => Ok(Self::trace()),
            "lstm-eol" => Ok(Self::eol()),
            other => Err(Error::invalid(format!("unknown LSTM preset '{other}'"))),
        }
    }
}

/// Per-step activations kept for backpropagation.
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Gate activations `[i, f, g, o]`, each `hidden` long.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn layer_forward(p: &[Param], xs: &[Vec<f64>], h0: Vec<f64>, c0: Vec<f64>) -> Vec<Step> {
    let (w, u, b) = (&p[0], &p[1], &p[2]);
    let n = h0.len();
    let mut steps: Vec<Step> = Vec::with_capacity(xs.len());
    let (mut h, mut c) = (h0, c0);
    for x in xs {
        let mut z = b.data.clone();
        w.matvec_add(x, &mut z);
        u.matvec_add(&h, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * n..3 * n).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c_new = vec![0.0; n];
        let mut tanh_c = vec![0.0; n];
        let mut h_new = vec![0.0; n];
        for k in 0..n {
            c_new[k] = z[n + k] * c[k] + z[k] * z[2 * n + k];
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = z[3 * n + k] * tanh_c[k];
        }
        steps.push(Step {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            c_prev: std::mem::replace(&mut c, c_new.clone()),
            gates: z,
            tanh_c,
            h: h_new,
            c: c_new,
        });
    }
    steps
}

/// Backpropagation through time for one layer. `dh_out[t]` is the loss
/// gradient reaching `h_t` from above; `(dh_last, dc_last)` flows into the
/// final state. Returns input gradients and the gradient of the initial state.
fn layer_backward(
    p: &[Param],
    steps: &[Step],
    dh_out: Option<&[Vec<f64>]>,
    dh_last: Vec<f64>,
    dc_last: Vec<f64>,
    g: &mut [Param],
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = dh_last.len();
    let in_dim = p[0].cols();
    let mut dxs = vec![vec![0.0; in_dim]; steps.len()];
    let (mut dh_next, mut dc_next) = (dh_last, dc_last);
    let mut dz = vec![0.0; 4 * n];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        for k in 0..n {
            let dh = dh_next[k] + dh_out.map_or(0.0, |d| d[t][k]);
            let (i, f, gg, o) = (s.gates[k], s.gates[n + k], s.gates[2 * n + k], s.gates[3 * n + k]);
            let tc = s.tanh_c[k];
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[n + k] = dc * s.c_prev[k] * f * (1.0 - f);
            dz[2 * n + k] = dc * i * (1.0 - gg * gg);
            dz[3 * n + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        g[0].outer_add(&dz, &s.x);
        g[1].outer_add(&dz, &s.h_prev);
        for (gb, d) in g[2].data.iter_mut().zip(&dz) {
            *gb += d;
        }
        p[0].matvec_t_add(&dz, &mut dxs[t]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p[1].matvec_t_add(&dz, &mut dh_next);
    }
    (dxs, dh_next, dc_next)
}

/// Encoder-decoder LSTM: stacked encoder layers summarize the waveform, the
/// decoder unrolls from the top encoder state with the normalized step
/// position as input, and a linear head emits one ΔVth per step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmSeq2Seq {
    cfg: LstmConfig,
    y_scale: f64,
    params: Vec<Param>,
    pub loss_history: Vec<f64>,
}

fn positions(len: usize) -> Vec<Vec<f64>> {
    let denom = len.saturating_sub(1).max(1) as f64;
    (0..len).map(|t| vec![t as f64 / denom]).collect()
}

impl LstmSeq2Seq {
    pub fn new(cfg: LstmConfig, seed: u64) -> Result<Self> {
        if cfg.hidden == 0 || cfg.encoder_layers == 0 {
            return Err(Error::invalid("LSTM needs at least one unit and one encoder layer"));
        }
        let h = cfg.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut layer = |in_dim: usize, params: &mut Vec<Param>| {
            params.push(Param::uniform(&[4 * h, in_dim], bound, &mut rng));
            params.push(Param::uniform(&[4 * h, h], bound, &mut rng));
            let mut b = Param::zeros(&[4 * h]);
            b.data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
            params.push(b);
        };
        for l in 0..cfg.encoder_layers {
            layer(if l == 0 { 1 } else { h }, &mut params);
        }
        layer(1, &mut params);
        params.push(Param::uniform(&[1, h], bound, &mut rng));
        params.push(Param::zeros(&[1]));
        Ok(LstmSeq2Seq { cfg, y_scale: 1.0, params, loss_history: Vec::new() })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn set_target_scale(&mut self, s: f64) {
        self.y_scale = s;
    }

    fn shapes(cfg: &LstmConfig) -> Vec<Vec<usize>> {
        let h = cfg.hidden;
        let mut v = Vec::new();
        for l in 0..=cfg.encoder_layers {
            let in_dim = if l == 0 || l == cfg.encoder_layers { 1 } else { h };
            v.extend([vec![4 * h, in_dim], vec![4 * h, h], vec![4 * h]]);
        }
        v.extend([vec![1, h], vec![1]]);
        v
    }

    /// Decoder steps and scaled outputs for a normalized input sequence.
    fn forward(cfg: &LstmConfig, params: &[Param], input: &[f64]) -> (Vec<Vec<Step>>, Vec<f64>) {
        let h = cfg.hidden;
        let mut layers = Vec::with_capacity(cfg.encoder_layers + 1);
        let mut xs: Vec<Vec<f64>> = input.iter().map(|&v| vec![v]).collect();
        for l in 0..cfg.encoder_layers {
            let steps = layer_forward(&params[3 * l..3 * l + 3], &xs, vec![0.0; h], vec![0.0; h]);
            xs = steps.iter().map(|s| s.h.clone()).collect();
            layers.push(steps);
        }
        let top = layers.last().and_then(|s| s.last());
        let (h0, c0) = top.map_or((vec![0.0; h], vec![0.0; h]), |s| (s.h.clone(), s.c.clone()));
        let d = 3 * cfg.encoder_layers;
        let dec = layer_forward(&params[d..d + 3], &positions(input.len()), h0, c0);
        let (hw, hb) = (&params[d + 3], &params[d + 4]);
        let out = dec.iter().map(|s| hb.data[0] + hw.data.iter().zip(&s.h).map(|(a, b)| a * b).sum::<f64>()).collect();
        layers.push(dec);
        (layers, out)
    }

    /// Mean per-step loss of one sequence against a scaled target; gradient added into `g`.
    fn backprop(cfg: &LstmConfig, params: &[Param], input: &[f64], target: &[f64], g: &mut [Param]) -> f64 {
        let h = cfg.hidden;
        let (layers, out) = Self::forward(cfg, params, input);
        let len = out.len() as f64;
        let d = 3 * cfg.encoder_layers;
        let mut total = 0.0;
        let dec = &layers[cfg.encoder_layers];
        let mut dh_dec = vec![vec![0.0; h]; out.len()];
        for t in 0..out.len() {
            let (l, dl) = cfg.loss.eval(out[t] - target[t]);
            total += l;
            let dy = dl / len;
            g[d + 4].data[0] += dy;
            for k in 0..h {
                g[d + 3].data[k] += dy * dec[t].h[k];
                dh_dec[t][k] = dy * params[d + 3].data[k];
            }
        }
        let (_, mut dh, mut dc) = layer_backward(&params[d..d + 3], dec, Some(&dh_dec), vec![0.0; h], vec![0.0; h], &mut g[d..d + 3]);
        let mut dh_out: Option<Vec<Vec<f64>>> = None;
        for l in (0..cfg.encoder_layers).rev() {
            let (dxs, _, _) = layer_backward(
                &params[3 * l..3 * l + 3],
                &layers[l],
                dh_out.as_deref(),
                std::mem::take(&mut dh),
                std::mem::take(&mut dc),
                &mut g[3 * l..3 * l + 3],
            );
            dh = vec![0.0; h];
            dc = vec![0.0; h];
            dh_out = Some(dxs);
        }
        total / len
    }

    /// Mean loss over sequences (targets in mV) and its gradient.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<Param>) {
        let mut g = zeros_like(&self.params);
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let t: Vec<f64> = y.iter().map(|v| v / self.y_scale).collect();
            total += Self::backprop(&self.cfg, &self.params, x, &t, &mut g);
        }
        let s = 1.0 / inputs.len() as f64;
        g.iter_mut().for_each(|p| p.data.iter_mut().for_each(|v| *v *= s));
        (total * s, g)
    }

    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        self.loss_and_grad(inputs, targets).0
    }

    /// Output sequence in mV for an already normalized (and, if configured, reversed) input.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        Self::forward(&self.cfg, &self.params, input).1.into_iter().map(|v| v * self.y_scale).collect()
    }

    pub fn predict_trace(&self, w: &Waveform, vdd: f64) -> Trace {
        Trace::new(w.transistor_id.clone(), self.predict(&sequence_input(w, vdd, self.cfg.reverse)))
    }

    /// Final predicted ΔVth of a waveform.
    pub fn predict_last(&self, w: &Waveform, vdd: f64) -> f64 {
        self.predict_trace(w, vdd).last()
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let c = &self.cfg;
        let words = [c.hidden as f64, c.encoder_layers as f64, f64::from(u8::from(c.reverse)), c.loss.code(), self.y_scale];
        write_weights(out, KIND, &words, &self.params)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (words, params) = read_weights(input, KIND)?;
        let [hidden, layers, reverse, loss, y_scale] = words[..] else {
            return Err(Error::schema("LSTM header needs 5 configuration words"));
        };
        let cfg = LstmConfig {
            hidden: hidden as usize,
            encoder_layers: layers as usize,
            reverse: reverse != 0.0,
            loss: Loss::from_code(loss)?,
        };
        expect_shapes(&params, &Self::shapes(&cfg))?;
        Ok(LstmSeq2Seq { cfg, y_scale, params, loss_history: Vec::new() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Trains on equal-length `(input, target)` sequences; inputs are expected
/// already normalized and oriented per `cfg.reverse`.
pub fn train_lstm(inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: LstmConfig, spec: &TrainSpec) -> Result<LstmSeq2Seq> {
    let len = inputs.first().ok_or_else(|| Error::Training("empty dataset".into()))?.len();
    if inputs.len() != targets.len() {
        return Err(Error::invalid(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    if len == 0 {
        return Err(Error::EmptyWaveform);
    }
    for (k, (x, y)) in inputs.iter().zip(targets).enumerate() {
        if x.len() != len || y.len() != len {
            return Err(Error::LengthMismatch {
                id: format!("sequence {k}"),
                detail: format!("input {} / target {}, batch uses {len}", x.len(), y.len()),
            });
        }
    }
    if inputs.iter().chain(targets).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM training data".into()));
    }
    if len > LSTM_MAX_LEN {
        log::warn!("training LSTM on {len}-step sequences; accuracy degrades beyond {LSTM_MAX_LEN}");
    }
    let mut m = LstmSeq2Seq::new(cfg, spec.rng_seed)?;
    let peak = targets.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    m.y_scale = if peak > 0.0 { peak } else { 1.0 };
    let scaled: Vec<Vec<f64>> = targets.iter().map(|t| t.iter().map(|v| v / m.y_scale).collect()).collect();
    m.loss_history = fit(&mut m.params, inputs.len(), spec, "lstm", |p, i, g| {
        LstmSeq2Seq::backprop(&cfg, p, &inputs[i], &scaled[i], g)
    })?;
    round_to_f32(&mut m.params);
    Ok(m)
}
