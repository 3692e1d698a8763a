use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{expect_shapes, fit, read_weights, round_to_f32, write_weights, zeros_like, Loss, Param, TrainSpec};
use crate::error::{Error, Result};

pub const MLP_HIDDEN: usize = 128;
const KIND: u32 = 0;

/// `l → hidden (ReLU) → 1` regressor on standardized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    n_in: usize,
    hidden: usize,
    loss: Loss,
    y_mean: f64,
    y_scale: f64,
    params: Vec<Param>,
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    pub fn new(n_in: usize, hidden: usize, loss: Loss, seed: u64) -> Result<Self> {
        if n_in == 0 || hidden == 0 {
            return Err(Error::invalid("MLP layer sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b1 = (6.0 / n_in as f64).sqrt();
        let params = vec![
            Param::uniform(&[hidden, n_in], b1, &mut rng),
            Param::zeros(&[hidden]),
            // zero output layer: the untrained net predicts the target mean
            Param::zeros(&[1, hidden]),
            Param::zeros(&[1]),
        ];
        Ok(MlpModel { n_in, hidden, loss, y_mean: 0.0, y_scale: 1.0, params, loss_history: Vec::new() })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn forward_raw(params: &[Param], x: &[f64]) -> (Vec<f64>, f64) {
        let mut z = params[1].data.clone();
        params[0].matvec_add(x, &mut z);
        let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let out = params[3].data[0] + params[2].data.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
        (z, out)
    }

    /// Loss of one sample on standardized target `t`; gradient added into `g`.
    fn backprop(params: &[Param], loss: Loss, x: &[f64], t: f64, g: &mut [Param]) -> f64 {
        let (z, out) = Self::forward_raw(params, x);
        let (l, dout) = loss.eval(out - t);
        g[3].data[0] += dout;
        let mut dz = vec![0.0; z.len()];
        for (k, &zk) in z.iter().enumerate() {
            if zk > 0.0 {
                g[2].data[k] += dout * zk;
                dz[k] = dout * params[2].data[k];
            }
        }
        for (gb, d) in g[1].data.iter_mut().zip(&dz) {
            *gb += d;
        }
        g[0].outer_add(&dz, x);
        l
    }

    /// Mean loss over `(x, y)` (targets in mV) and its gradient.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<Param>) {
        let mut g = zeros_like(&self.params);
        let mut total = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            total += Self::backprop(&self.params, self.loss, xi, (yi - self.y_mean) / self.y_scale, &mut g);
        }
        let s = 1.0 / x.len() as f64;
        g.iter_mut().for_each(|p| p.data.iter_mut().for_each(|v| *v *= s));
        (total * s, g)
    }

    pub fn loss(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        self.loss_and_grad(x, y).0
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        Self::forward_raw(&self.params, x).1 * self.y_scale + self.y_mean
    }

    fn config(&self) -> Vec<f64> {
        vec![self.n_in as f64, self.hidden as f64, self.loss.code(), self.y_mean, self.y_scale]
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        write_weights(out, KIND, &self.config(), &self.params)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (cfg, params) = read_weights(input, KIND)?;
        let [n_in, hidden, loss, y_mean, y_scale] = cfg[..] else {
            return Err(Error::schema("MLP header needs 5 configuration words"));
        };
        let (n_in, hidden) = (n_in as usize, hidden as usize);
        expect_shapes(&params, &[vec![hidden, n_in], vec![hidden], vec![1, hidden], vec![1]])?;
        Ok(MlpModel { n_in, hidden, loss: Loss::from_code(loss)?, y_mean, y_scale, params, loss_history: Vec::new() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Trains a 128-unit MLP on fixed-length feature rows.
pub fn train_mlp(x: &[Vec<f64>], y: &[f64], loss: Loss, spec: &TrainSpec) -> Result<MlpModel> {
    train_mlp_hidden(x, y, MLP_HIDDEN, loss, spec)
}

pub(crate) fn train_mlp_hidden(x: &[Vec<f64>], y: &[f64], hidden: usize, loss: Loss, spec: &TrainSpec) -> Result<MlpModel> {
    let n_in = x.first().ok_or_else(|| Error::Training("empty dataset".into()))?.len();
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if let Some(r) = x.iter().position(|r| r.len() != n_in) {
        return Err(Error::invalid(format!("row {r} has {} features, expected {n_in}", x[r].len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MLP training data".into()));
    }
    let mut m = MlpModel::new(n_in, hidden, loss, spec.rng_seed)?;
    let n = y.len() as f64;
    m.y_mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - m.y_mean).powi(2)).sum::<f64>() / n).sqrt();
    m.y_scale = if sd > 0.0 { sd } else { 1.0 };
    let (mean, scale) = (m.y_mean, m.y_scale);
    let targets: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
    m.loss_history = fit(&mut m.params, x.len(), spec, "mlp", |p, i, g| MlpModel::backprop(p, loss, &x[i], targets[i], g))?;
    round_to_f32(&mut m.params);
    Ok(m)
}
