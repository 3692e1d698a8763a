//! Small dense neural networks trained from scratch: an MLP regressor and an
//! LSTM encoder-decoder. Everything runs in f64; weights are rounded to f32
//! once training finishes so the stored file reproduces the model exactly.
//!
//! Weight file layout (little-endian):
//!
//! ```text
//! "AGNN"           magic
//! u32              format version (1)
//! u32              model kind: 0 = MLP, 1 = LSTM seq2seq
//! u32 k, f64 × k   model configuration words
//! u32 n            tensor count
//! n × (u32 rank, u32 × rank dims)
//! f32 × Σ sizes    tensor data, in table order, row-major
//! ```

mod lstm;
mod mlp;

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lstm::{train_lstm, LstmConfig, LstmSeq2Seq};
pub use mlp::{train_mlp, MlpModel, MLP_HIDDEN};

const MAGIC: &[u8; 4] = b"AGNN";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    Mse,
    L1,
}

impl Loss {
    /// Per-element value and derivative with respect to the prediction.
    fn eval(self, err: f64) -> (f64, f64) {
        match self {
            Loss::Mse => (err * err, 2.0 * err),
            Loss::L1 => (err.abs(), err.signum()),
        }
    }

    fn code(self) -> f64 {
        match self {
            Loss::Mse => 0.0,
            Loss::L1 => 1.0,
        }
    }

    fn from_code(c: f64) -> Result<Self> {
        match c as u32 {
            0 => Ok(Loss::Mse),
            1 => Ok(Loss::L1),
            _ => Err(Error::schema(format!("unknown loss code {c}"))),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Loss::Mse),
            "l1" => Ok(Loss::L1),
            _ => Err(Error::invalid(format!("unknown loss '{s}' (mse or l1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip.
    pub clip: f64,
    pub rng_seed: u64,
}

impl TrainSpec {
    pub fn mlp() -> Self {
        TrainSpec { epochs: 200, batch_size: 32, learning_rate: 1e-3, clip: 1.0, rng_seed: 0 }
    }

    pub fn lstm() -> Self {
        TrainSpec { epochs: 500, ..Self::mlp() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite() && self.clip > 0.0) {
            return Err(Error::invalid("learning rate and clip must be positive"));
        }
        Ok(())
    }
}

/// Dense parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        Param { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        Param { shape: shape.to_vec(), data: (0..n).map(|_| rng.gen_range(-bound..bound)).collect() }
    }

    fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    /// `out += self · x` for a 2-D tensor.
    fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        let cols = self.cols();
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(cols)) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += selfᵀ · d`.
    fn matvec_t_add(&self, d: &[f64], out: &mut [f64]) {
        let cols = self.cols();
        for (&dr, row) in d.iter().zip(self.data.chunks_exact(cols)) {
            if dr != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += dr * a;
                }
            }
        }
    }

    /// `self += d ⊗ x`.
    fn outer_add(&mut self, d: &[f64], x: &[f64]) {
        let cols = self.cols();
        for (&dr, row) in d.iter().zip(self.data.chunks_exact_mut(cols)) {
            if dr != 0.0 {
                for (w, xv) in row.iter_mut().zip(x) {
                    *w += dr * xv;
                }
            }
        }
    }
}

fn zeros_like(params: &[Param]) -> Vec<Param> {
    params.iter().map(|p| Param::zeros(&p.shape)).collect()
}

fn round_to_f32(params: &mut [Param]) {
    for p in params {
        p.data.iter_mut().for_each(|x| *x = f64::from(*x as f32));
    }
}

fn clip_global(grads: &mut [Param], max_norm: f64) {
    let norm = grads.iter().flat_map(|g| &g.data).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|x| *x *= s));
    }
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Param>,
    v: Vec<Param>,
}

impl Adam {
    fn new(params: &[Param], lr: f64) -> Self {
        Adam { lr, t: 0, m: zeros_like(params), v: zeros_like(params) }
    }

    fn step(&mut self, params: &mut [Param], grads: &[Param]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = B1 * m.data[k] + (1.0 - B1) * gk;
                v.data[k] = B2 * v.data[k] + (1.0 - B2) * gk * gk;
                p.data[k] -= self.lr * (m.data[k] / c1) / ((v.data[k] / c2).sqrt() + 1e-8);
            }
        }
    }
}

/// Mini-batch loop shared by both networks. `sample` adds one sample's
/// gradient into the buffer and returns its loss.
fn fit(
    params: &mut Vec<Param>,
    n: usize,
    spec: &TrainSpec,
    name: &str,
    mut sample: impl FnMut(&[Param], usize, &mut [Param]) -> f64,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    spec.validate()?;
    log::info!(
        "{name}: epochs={} batch={} lr={} clip={} seed={}",
        spec.epochs,
        spec.batch_size,
        spec.learning_rate,
        spec.clip,
        spec.rng_seed
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.rng_seed ^ 0x5eed);
    let mut adam = Adam::new(params, spec.learning_rate);
    let mut grads = zeros_like(params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(spec.batch_size) {
            grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|x| *x = 0.0));
            for &i in batch {
                total += sample(params, i, &mut grads);
            }
            let s = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|x| *x *= s));
            clip_global(&mut grads, spec.clip);
            adam.step(params, &grads);
        }
        let loss = total / n as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("{name}: loss became {loss} at epoch {epoch}")));
        }
        log::debug!("{name} epoch {epoch}: loss {loss:.6e}");
        history.push(loss);
    }
    Ok(history)
}

pub(crate) fn write_weights<W: Write>(mut out: W, kind: u32, config: &[f64], params: &[Param]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, kind, config.len() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for c in config {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for p in params {
        for &x in &p.data {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_weights<R: Read>(mut input: R, kind: u32) -> Result<(Vec<f64>, Vec<Param>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::schema("not a neural weight file"));
    }
    let version = read_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(Error::schema(format!("unsupported weight format version {version}")));
    }
    let found = read_u32(&mut input)?;
    if found != kind {
        return Err(Error::schema(format!("weight file holds model kind {found}, expected {kind}")));
    }
    let k = read_u32(&mut input)? as usize;
    let mut config = Vec::with_capacity(k);
    for _ in 0..k {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        config.push(f64::from_le_bytes(b));
    }
    let n = read_u32(&mut input)? as usize;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = read_u32(&mut input)? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::schema(format!("tensor rank {rank} out of range")));
        }
        shapes.push((0..rank).map(|_| read_u32(&mut input).map(|d| d as usize)).collect::<Result<Vec<_>>>()?);
    }
    let mut params = Vec::with_capacity(n);
    for shape in shapes {
        let len: usize = shape.iter().product();
        let mut b = vec![0u8; len * 4];
        input.read_exact(&mut b)?;
        let data = b.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
        params.push(Param { shape, data });
    }
    Ok((config, params))
}

pub(crate) fn expect_shapes(params: &[Param], want: &[Vec<usize>]) -> Result<()> {
    let got: Vec<&Vec<usize>> = params.iter().map(|p| &p.shape).collect();
    if got.len() != want.len() || got.iter().zip(want).any(|(a, b)| *a != b) {
        return Err(Error::schema(format!("tensor shapes {got:?} do not match {want:?}")));
    }
    Ok(())
}

/// Relative error used by the gradient checks.
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}
