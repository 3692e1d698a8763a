//! RBF support-vector models: one-vs-one multiclass classifier and ε-SVR.
//!
//! Model file layout:
//!
//! ```text
//! "AGSVM1\n"                 7-byte magic
//! u64 LE                     length of the JSON header in bytes
//! JSON header                kind, parameters, machines, context
//! f64 LE × n_sv × n_features support vectors, row-major
//! ```

mod smo;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use smo::Solution;
use smo::{solve, QMatrix};

const MAGIC: &[u8; 7] = b"AGSVM1\n";

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Tube half-width for regression, in target units.
    pub epsilon: f64,
    pub tol: f64,
    /// Solver iteration cap; 0 selects `max(1_000_000, 100·n)`.
    pub max_iter: usize,
}

impl SvmParams {
    /// Regression defaults: γ = 0.001, C = 100, ε = 0.1.
    pub fn svr() -> Self {
        SvmParams { c: 100.0, gamma: 1e-3, epsilon: 0.1, tol: 1e-3, max_iter: 0 }
    }

    /// Classification defaults.
    pub fn svc() -> Self {
        SvmParams { c: 100.0, gamma: 0.1, epsilon: 0.0, tol: 1e-3, max_iter: 0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.c) && ok(self.gamma) && ok(self.tol)) || !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("bad SVM parameters {self:?}")));
        }
        Ok(())
    }

    fn iter_cap(&self, n: usize) -> usize {
        if self.max_iter > 0 {
            self.max_iter
        } else {
            (100 * n).max(1_000_000)
        }
    }
}

fn check_data(x: &[Vec<f64>], targets: usize) -> Result<usize> {
    let first = x.first().ok_or_else(|| Error::Training("empty dataset".into()))?;
    if x.len() != targets {
        return Err(Error::invalid(format!("{} feature rows but {targets} targets", x.len())));
    }
    let d = first.len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!("row {i} has {} features, expected {d}", row.len())));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {v} in row {i}")));
        }
    }
    Ok(d)
}

/// One binary problem of the one-vs-one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// Winner when the decision value is positive.
    pub class_a: usize,
    pub class_b: usize,
    /// Indices into the model's support-vector table.
    pub sv: Vec<u32>,
    pub coef: Vec<f64>,
    pub rho: f64,
    #[serde(skip)]
    pub solution: Option<Solution>,
}

impl PartialEq for Solution {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.rho == other.rho
    }
}

/// Support vectors shared by all machines of a model.
#[derive(Debug, Clone, Default, PartialEq)]
struct SupportTable {
    n_features: usize,
    rows: Vec<f64>,
    by_source: BTreeMap<usize, u32>,
}

impl SupportTable {
    fn intern(&mut self, source: usize, row: &[f64]) -> u32 {
        let next = self.len() as u32;
        *self.by_source.entry(source).or_insert_with(|| {
            self.rows.extend_from_slice(row);
            next
        })
    }

    fn len(&self) -> usize {
        if self.n_features == 0 {
            0
        } else {
            self.rows.len() / self.n_features
        }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n_features..(k + 1) * self.n_features]
    }

    fn kernel_row(&self, gamma: f64, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| rbf(gamma, self.row(k), x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    params: SvmParams,
    n_features: usize,
    n_sv: usize,
    classes: Vec<usize>,
    machines: Vec<BinaryMachine>,
    context: serde_json::Value,
}

fn write_model<W: Write>(mut out: W, header: &Header, table: &SupportTable) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut body = Vec::with_capacity(table.rows.len() * 8);
    for v in &table.rows {
        body.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&body)?;
    Ok(())
}

fn read_model<R: Read>(mut input: R, kind: &str) -> Result<(Header, SupportTable)> {
    let mut magic = [0u8; 7];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::schema("not an SVM model file"));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.kind != kind {
        return Err(Error::schema(format!("expected a {kind} model, found {}", header.kind)));
    }
    let mut body = vec![0u8; header.n_sv * header.n_features * 8];
    input.read_exact(&mut body)?;
    let rows: Vec<f64> = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    for m in &header.machines {
        if m.sv.len() != m.coef.len() || m.sv.iter().any(|&k| k as usize >= header.n_sv) {
            return Err(Error::schema("support-vector index out of range"));
        }
    }
    let table = SupportTable { n_features: header.n_features, rows, by_source: BTreeMap::new() };
    Ok((header, table))
}

/// Multiclass RBF classifier, one-vs-one with majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    params: SvmParams,
    classes: Vec<usize>,
    machines: Vec<BinaryMachine>,
    support: SupportTable,
    /// Free-form metadata stored alongside the model (feature layout etc.).
    pub context: serde_json::Value,
}

pub fn train_svm(x: &[Vec<f64>], labels: &[usize], params: SvmParams) -> Result<SvmModel> {
    params.validate()?;
    let d = check_data(x, labels.len())?;
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut support = SupportTable { n_features: d, ..Default::default() };
    let mut machines = Vec::new();

    for (ia, &a) in classes.iter().enumerate() {
        for &b in &classes[ia + 1..] {
            let idx: Vec<usize> = (0..x.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let q = QMatrix::from_fn(idx.len(), |i, j| y[i] * y[j] * rbf(params.gamma, &x[idx[i]], &x[idx[j]]));
            let p = vec![-1.0; idx.len()];
            let sol = solve(&q, &p, &y, params.c, params.tol, params.iter_cap(idx.len()));
            let mut sv = Vec::new();
            let mut coef = Vec::new();
            for (k, &alpha) in sol.alpha.iter().enumerate() {
                if alpha > 0.0 {
                    sv.push(support.intern(idx[k], &x[idx[k]]));
                    coef.push(y[k] * alpha);
                }
            }
            machines.push(BinaryMachine { class_a: a, class_b: b, sv, coef, rho: sol.rho, solution: Some(sol) });
        }
    }
    log::debug!("svm: {} classes, {} machines, {} support vectors", classes.len(), machines.len(), support.len());
    Ok(SvmModel { params, classes, machines, support, context: serde_json::Value::Null })
}

impl SvmModel {
    pub fn params(&self) -> &SvmParams {
        &self.params
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn machines(&self) -> &[BinaryMachine] {
        &self.machines
    }

    pub fn n_features(&self) -> usize {
        self.support.n_features
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn support_vector(&self, k: usize) -> &[f64] {
        self.support.row(k)
    }

    /// Decision value of every binary machine, in machine order.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let k = self.support.kernel_row(self.params.gamma, x);
        self.machines
            .iter()
            .map(|m| m.sv.iter().zip(&m.coef).map(|(&s, c)| c * k[s as usize]).sum::<f64>() - m.rho)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        if self.classes.len() == 1 {
            return self.classes[0];
        }
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for (m, dv) in self.machines.iter().zip(self.decision_values(x)) {
            *votes.entry(if dv > 0.0 { m.class_a } else { m.class_b }).or_default() += 1;
        }
        let mut best = (self.classes[0], 0);
        for (&class, &n) in &votes {
            if n > best.1 {
                best = (class, n);
            }
        }
        best.0
    }

    pub fn accuracy(&self, x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = x.iter().zip(labels).filter(|(r, &l)| self.predict(r) == l).count();
        hits as f64 / x.len().max(1) as f64
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let header = Header {
            kind: "svc".into(),
            params: self.params,
            n_features: self.support.n_features,
            n_sv: self.support.len(),
            classes: self.classes.clone(),
            machines: self.machines.clone(),
            context: self.context.clone(),
        };
        write_model(out, &header, &self.support)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (h, support) = read_model(input, "svc")?;
        Ok(SvmModel { params: h.params, classes: h.classes, machines: h.machines, support, context: h.context })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// ε-insensitive RBF regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    params: SvmParams,
    machine: BinaryMachine,
    support: SupportTable,
    pub context: serde_json::Value,
}

pub fn train_svr(x: &[Vec<f64>], targets: &[f64], params: SvmParams) -> Result<SvrModel> {
    params.validate()?;
    let d = check_data(x, targets.len())?;
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::NonFinite(format!("target {t}")));
    }
    let n = x.len();
    let kernel = QMatrix::from_fn(n, |i, j| rbf(params.gamma, &x[i], &x[j]));
    let sign = |i: usize| if i < n { 1.0 } else { -1.0 };
    let q = QMatrix::from_fn(2 * n, |i, j| sign(i) * sign(j) * kernel.row(i % n)[j % n]);
    let p: Vec<f64> = (0..2 * n)
        .map(|i| if i < n { params.epsilon - targets[i] } else { params.epsilon + targets[i - n] })
        .collect();
    let y: Vec<f64> = (0..2 * n).map(sign).collect();
    let sol = solve(&q, &p, &y, params.c, params.tol, params.iter_cap(2 * n));

    let mut support = SupportTable { n_features: d, ..Default::default() };
    let mut sv = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        let beta = sol.alpha[i] - sol.alpha[i + n];
        if beta != 0.0 {
            sv.push(support.intern(i, &x[i]));
            coef.push(beta);
        }
    }
    let machine = BinaryMachine { class_a: 0, class_b: 0, sv, coef, rho: sol.rho, solution: Some(sol) };
    Ok(SvrModel { params, machine, support, context: serde_json::Value::Null })
}

impl SvrModel {
    pub fn params(&self) -> &SvmParams {
        &self.params
    }

    /// Dual solution of the `2n`-variable problem (`α⁺` then `α⁻`), when trained in-process.
    pub fn solution(&self) -> Option<&Solution> {
        self.machine.solution.as_ref()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.machine.coef
    }

    pub fn bias(&self) -> f64 {
        -self.machine.rho
    }

    pub fn n_features(&self) -> usize {
        self.support.n_features
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn support_vector(&self, k: usize) -> &[f64] {
        self.support.row(k)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let k = self.support.kernel_row(self.params.gamma, x);
        self.machine.sv.iter().zip(&self.machine.coef).map(|(&s, c)| c * k[s as usize]).sum::<f64>()
            - self.machine.rho
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let header = Header {
            kind: "svr".into(),
            params: self.params,
            n_features: self.support.n_features,
            n_sv: self.support.len(),
            classes: Vec::new(),
            machines: vec![self.machine.clone()],
            context: self.context.clone(),
        };
        write_model(out, &header, &self.support)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (mut h, support) = read_model(input, "svr")?;
        let machine = h.machines.pop().filter(|_| h.machines.is_empty()).ok_or_else(|| Error::schema("SVR needs exactly one machine"))?;
        Ok(SvrModel { params: h.params, machine, support, context: h.context })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Candidate values for a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { c: vec![1.0, 10.0, 100.0], gamma: vec![1e-3, 1e-2, 1e-1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// `(C, γ, held-out score)` for every cell, in grid order.
    pub cells: Vec<(f64, f64, f64)>,
    pub best: SvmParams,
    pub best_score: f64,
}

/// Seeded 70/30 index split for held-out scoring.
fn holdout(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid("grid search needs at least two samples"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * 0.7).round() as usize).clamp(1, n - 1);
    let valid = idx.split_off(n_train);
    Ok((idx, valid))
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn run_grid(base: SvmParams, grid: &Grid, mut score: impl FnMut(SvmParams) -> Result<f64>) -> Result<GridResult> {
    let mut cells = Vec::new();
    let mut best = None;
    for &c in &grid.c {
        for &gamma in &grid.gamma {
            let p = SvmParams { c, gamma, ..base };
            let s = score(p)?;
            log::info!("grid C={c} gamma={gamma}: {s:.6}");
            cells.push((c, gamma, s));
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((p, s));
            }
        }
    }
    let (best, best_score) = best.ok_or_else(|| Error::invalid("empty grid"))?;
    Ok(GridResult { cells, best, best_score })
}

/// Grid search for the regressor, scored by held-out r².
pub fn grid_search_svr(x: &[Vec<f64>], y: &[f64], base: SvmParams, grid: &Grid, seed: u64) -> Result<GridResult> {
    let (tr, va) = holdout(x.len(), seed)?;
    let (xt, yt, xv, yv) = (pick(x, &tr), pick(y, &tr), pick(x, &va), pick(y, &va));
    run_grid(base, grid, |p| {
        let m = train_svr(&xt, &yt, p)?;
        let pred: Vec<f64> = xv.iter().map(|r| m.predict(r)).collect();
        Ok(r2(&pred, &yv))
    })
}

/// Grid search for the classifier, scored by held-out accuracy.
pub fn grid_search_svm(x: &[Vec<f64>], y: &[usize], base: SvmParams, grid: &Grid, seed: u64) -> Result<GridResult> {
    let (tr, va) = holdout(x.len(), seed)?;
    let (xt, yt, xv, yv) = (pick(x, &tr), pick(y, &tr), pick(x, &va), pick(y, &va));
    run_grid(base, grid, |p| Ok(train_svm(&xt, &yt, p)?.accuracy(&xv, &yv)))
}

fn r2(pred: &[f64], truth: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 3;
            let cx = class as f64;
            x.push(vec![cx + rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)]);
            y.push(class * 5);
        }
        (x, y)
    }

    /// Worst violation of the dual KKT conditions from scratch.
    fn kkt_residual(x: &[Vec<f64>], y: &[f64], sol: &Solution, p: &SvmParams) -> f64 {
        let n = x.len();
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * rbf(p.gamma, &x[i], &x[j]) * sol.alpha[j]).sum::<f64>() - 1.0)
            .collect();
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..n {
            let v = -y[i] * grad[i];
            let can_up = (y[i] > 0.0 && sol.alpha[i] < p.c) || (y[i] < 0.0 && sol.alpha[i] > 0.0);
            let can_down = (y[i] > 0.0 && sol.alpha[i] > 0.0) || (y[i] < 0.0 && sol.alpha[i] < p.c);
            if can_up {
                up = up.max(v);
            }
            if can_down {
                low = low.min(v);
            }
        }
        (up - low).max(0.0)
    }

    #[test]
    fn rbf_basics() {
        let a = [0.2, -1.0, 3.0];
        let b = [1.0, 0.5, 2.0];
        assert_eq!(rbf(0.5, &a, &a), 1.0);
        assert_eq!(rbf(0.5, &a, &b), rbf(0.5, &b, &a));
        assert!((rbf(0.5, &a, &b) - (-0.5f64 * (0.64 + 2.25 + 1.0)).exp()).abs() < 1e-15);
    }

    #[test]
    fn separable_two_class() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { -1.0 } else { 1.0 }, i as f64 * 0.01]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let m = train_svm(&x, &y, SvmParams::svc()).unwrap();
        assert_eq!(m.accuracy(&x, &y), 1.0);
    }

    #[test]
    fn kkt_and_feasibility_tight() {
        let (x, labels) = blobs(60, 4);
        let p = SvmParams { tol: 1e-7, c: 10.0, gamma: 0.5, ..SvmParams::svc() };
        let m = train_svm(&x, &labels, p).unwrap();
        assert_eq!(m.machines().len(), 3);
        for mach in m.machines() {
            let idx: Vec<usize> =
                (0..x.len()).filter(|&i| labels[i] == mach.class_a || labels[i] == mach.class_b).collect();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == mach.class_a { 1.0 } else { -1.0 }).collect();
            let sol = mach.solution.as_ref().unwrap();
            assert!(sol.converged);
            let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
            assert!(eq.abs() <= 1e-6, "{eq}");
            assert!(sol.alpha.iter().all(|&a| (0.0..=p.c).contains(&a)));
            assert!(kkt_residual(&sub, &y, sol, &p) <= 1e-6);
        }
    }

    #[test]
    fn conflicting_duplicates_terminate() {
        let x = vec![vec![0.5, 0.5]; 10];
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let m = train_svm(&x, &y, SvmParams { max_iter: 10_000, ..SvmParams::svc() }).unwrap();
        let sol = m.machines()[0].solution.as_ref().unwrap();
        assert!(sol.iterations <= 10_000);
        assert!(m.predict(&[0.5, 0.5]) <= 1);
    }

    #[test]
    fn ovo_tie_goes_to_lowest_class() {
        // three classes at one point: every machine sees a symmetric problem
        let x = vec![vec![0.0]; 3];
        let m = train_svm(&x, &[2, 0, 1], SvmParams::svc()).unwrap();
        let votes: Vec<f64> = m.decision_values(&[0.0]);
        assert_eq!(votes.len(), 3);
        let p = m.predict(&[0.0]);
        assert!(p <= 2);
        let single = train_svm(&[vec![1.0]], &[7], SvmParams::svc()).unwrap();
        assert_eq!(single.predict(&[0.0]), 7);
    }

    #[test]
    fn svr_tracks_identity_within_tube() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let p = SvmParams { c: 100.0, gamma: 1.0, epsilon: 0.01, ..SvmParams::svr() };
        let m = train_svr(&x, &y, p).unwrap();
        let worst = x.iter().map(|r| (m.predict(r) - r[0]).abs()).fold(0.0, f64::max);
        assert!(worst <= p.epsilon + 0.05, "{worst}");
        let sol = m.solution().unwrap();
        assert!(sol.alpha.iter().all(|&a| (0.0..=p.c).contains(&a)));
        assert!(m.coefficients().iter().all(|c| c.abs() <= p.c));
        let n = x.len();
        let eq: f64 = sol.alpha[..n].iter().sum::<f64>() - sol.alpha[n..].iter().sum::<f64>();
        assert!(eq.abs() < 1e-6);
    }

    #[test]
    fn non_finite_features_rejected() {
        assert!(train_svm(&[vec![f64::NAN]], &[0], SvmParams::svc()).is_err());
        assert!(train_svr(&[vec![1.0], vec![f64::INFINITY]], &[0.0, 1.0], SvmParams::svr()).is_err());
        assert!(train_svr(&[vec![1.0]], &[f64::NAN], SvmParams::svr()).is_err());
    }

    #[test]
    fn decision_matches_brute_force() {
        let (x, labels) = blobs(45, 8);
        let m = train_svm(&x, &labels, SvmParams { gamma: 0.7, ..SvmParams::svc() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q = vec![rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..1.0)];
            let fast = m.decision_values(&q);
            for (mach, f) in m.machines().iter().zip(fast) {
                let mut slow = -mach.rho;
                for (k, &s) in mach.sv.iter().enumerate() {
                    let sv = m.support_vector(s as usize);
                    let d2: f64 = sv.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
                    slow += mach.coef[k] * (-0.7 * d2).exp();
                }
                assert!((slow - f).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn model_files_round_trip() {
        let (x, labels) = blobs(30, 1);
        let mut m = train_svm(&x, &labels, SvmParams::svc()).unwrap();
        m.context = serde_json::json!({"h": 8});
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..7], b"AGSVM1\n");
        let back = SvmModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.context["h"], 8);
        for r in &x {
            assert_eq!(back.predict(r), m.predict(r));
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(SvrModel::read_from(buf.as_slice()).is_err());

        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0).collect();
        let r = train_svr(&x, &y, SvmParams::svr()).unwrap();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let back = SvrModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.predict(&x[3]), r.predict(&x[3]));
    }

    #[test]
    fn grid_includes_default_cell_and_picks_max() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 / 39.0), ((i * 7) % 13) as f64 / 13.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 5.0 * r[0] + r[1]).collect();
        let res = grid_search_svr(&x, &y, SvmParams::svr(), &Grid::default(), 0).unwrap();
        assert_eq!(res.cells.len(), 9);
        assert!(res.cells.iter().any(|&(c, g, _)| c == 100.0 && g == 1e-3));
        assert!(res.cells.iter().all(|&(_, _, s)| s <= res.best_score));

        let one = Grid { c: vec![10.0], gamma: vec![1e-2] };
        let res = grid_search_svr(&x, &y, SvmParams::svr(), &one, 0).unwrap();
        assert_eq!((res.best.c, res.best.gamma), (10.0, 1e-2));

        let (bx, by) = blobs(30, 3);
        let res = grid_search_svm(&bx, &by, SvmParams::svc(), &Grid::default(), 1).unwrap();
        assert!(res.best_score > 0.9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn box_and_equality_hold(seed in 0u64..1000, c in 0.1f64..50.0) {
            let (x, labels) = blobs(24, seed);
            let m = train_svm(&x, &labels, SvmParams { c, gamma: 1.0, ..SvmParams::svc() }).unwrap();
            for mach in m.machines() {
                let sol = mach.solution.as_ref().unwrap();
                prop_assert!(sol.alpha.iter().all(|&a| a >= 0.0 && a <= c));
                prop_assert!(mach.coef.iter().all(|k| k.abs() <= c));
            }
        }
    }
}
