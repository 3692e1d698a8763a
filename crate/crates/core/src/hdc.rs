//! Hyperdimensional computing classifier (MAP-B bipolar vectors, cosine similarity,
//! OnlineHD-style retraining).
//!
//! Every feature value is mapped to an item hypervector, bound to a per-position
//! hypervector by elementwise multiplication, bundled by summation and
//! binarized by sign (a zero sum becomes `+1`). Classes are quantized ΔVth
//! levels; each class owns a real-valued accumulator vector.
//!
//! Model file layout (little-endian):
//!
//! | offset | type | field |
//! |-------:|------|-------|
//! | 0  | `[u8; 4]` | magic `AGHD` |
//! | 4  | u32 | format version (1) |
//! | 8  | u32 | dimension D |
//! | 12 | u32 | class count |
//! | 16 | u64 | item-memory seed |
//! | 24 | u32 | task: 0 = history window, 1 = end-of-life |
//! | 28 | u32 | history `h` or waveform length |
//! | 32 | u32 | voltage levels |
//! | 36 | u32 | encoding (0 = position binding) |
//! | 40 | u32 | ordinal item kind (0 = random, 1 = level) |
//! | 44 | u32 | retraining epochs |
//! | 48 | f64 | learn rate |
//! | 56 | f64 | vdd |
//! | 64 | f64 | quantizer min (mV) |
//! | 72 | f64 | quantizer max (mV) |
//! | 80 | f64 | bias multiplier |
//! | 88 | f32 × classes × D | class vectors, class-major |

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{EolSample, HistorySample};
use crate::error::{Error, Result};
use crate::model::QuantizerSpec;

/// Corner levels 0 and vdd plus eight evenly spaced intermediate levels.
pub const VOLTAGE_LEVELS: usize = 10;

const MAGIC: &[u8; 4] = b"AGHD";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 88;

/// Discrete value mapped to an item hypervector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Voltage(u16),
    Dvt(u16),
    Position(u16),
}

impl Symbol {
    fn tag(self) -> (u64, u64) {
        match self {
            Symbol::Voltage(v) => (1, u64::from(v)),
            Symbol::Dvt(v) => (2, u64::from(v)),
            Symbol::Position(v) => (3, u64::from(v)),
        }
    }
}

/// How ordinal symbols (voltage and ΔVth levels) get their item vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ItemKind {
    /// Independent random vectors; every level is quasi-orthogonal to every other.
    Random,
    /// Level vectors: neighbouring levels share most components, the two
    /// extremes differ in half of them.
    Level,
}

/// Bipolar hypervector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypervector(pub Vec<i8>);

impl Hypervector {
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        Hypervector((0..dim).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Hypervector) -> i64 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| i64::from(a) * i64::from(b)).sum()
    }

    pub fn cosine(&self, other: &Hypervector) -> f64 {
        self.dot(other) as f64 / self.dim() as f64
    }
}

fn mix(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded symbol → hypervector map. A symbol's vector depends only on the
/// seed and the symbol, so retrieval order never changes the result.
#[derive(Debug, Clone)]
pub struct ItemMemory {
    dim: usize,
    seed: u64,
    ordinal: ItemKind,
    voltage_levels: usize,
    dvt_levels: usize,
    cache: HashMap<Symbol, Hypervector>,
}

impl ItemMemory {
    pub fn new(dim: usize, seed: u64, ordinal: ItemKind, voltage_levels: usize, dvt_levels: usize) -> Self {
        ItemMemory { dim, seed, ordinal, voltage_levels, dvt_levels, cache: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn generate(&self, sym: Symbol) -> Hypervector {
        let (kind, value) = sym.tag();
        let levels = match sym {
            Symbol::Voltage(_) => Some(self.voltage_levels),
            Symbol::Dvt(_) => Some(self.dvt_levels),
            Symbol::Position(_) => None,
        };
        match (self.ordinal, levels) {
            (ItemKind::Level, Some(n)) if n > 1 => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, kind << 32));
                let mut v = Hypervector::random(self.dim, &mut rng);
                let mut order: Vec<usize> = (0..self.dim).collect();
                order.shuffle(&mut rng);
                let level = (value as usize).min(n - 1);
                let flips = (level * self.dim) / (2 * (n - 1));
                for &j in &order[..flips] {
                    v.0[j] = -v.0[j];
                }
                v
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, (kind << 32) | value));
                Hypervector::random(self.dim, &mut rng)
            }
        }
    }

    /// Retrieves a symbol's vector, generating and caching it on first use.
    pub fn get_or_insert(&mut self, sym: Symbol) -> &Hypervector {
        if !self.cache.contains_key(&sym) {
            let v = self.generate(sym);
            self.cache.insert(sym, v);
        }
        &self.cache[&sym]
    }

    /// Read-only retrieval; uncached symbols are generated without caching.
    pub fn get(&self, sym: Symbol) -> std::borrow::Cow<'_, Hypervector> {
        match self.cache.get(&sym) {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(self.generate(sym)),
        }
    }

    /// Caches every symbol a model of this shape can produce.
    pub fn warm(&mut self, positions: usize) {
        for v in 0..self.voltage_levels {
            self.get_or_insert(Symbol::Voltage(v as u16));
        }
        for d in 0..self.dvt_levels {
            self.get_or_insert(Symbol::Dvt(d as u16));
        }
        for p in 0..positions {
            self.get_or_insert(Symbol::Position(p as u16));
        }
    }
}

/// Strategy for turning a feature-symbol sequence into a query hypervector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// `sign(Σ_k item(sym_k) ⊙ position(k))`, ties to `+1`.
    PositionBinding,
}

impl Encoding {
    pub fn encode(self, im: &ItemMemory, symbols: &[Symbol]) -> Hypervector {
        match self {
            Encoding::PositionBinding => {
                let mut acc = vec![0i16; im.dim];
                for (k, &sym) in symbols.iter().enumerate() {
                    let item = im.get(sym);
                    let pos = im.get(Symbol::Position(k as u16));
                    for ((a, &x), &p) in acc.iter_mut().zip(&item.0).zip(&pos.0) {
                        *a += i16::from(x * p);
                    }
                }
                Hypervector(acc.into_iter().map(|a| if a >= 0 { 1 } else { -1 }).collect())
            }
        }
    }
}

pub fn voltage_symbol(v: f64, vdd: f64) -> Symbol {
    let steps = (VOLTAGE_LEVELS - 1) as f64;
    let level = (v / vdd * steps).round().clamp(0.0, steps);
    Symbol::Voltage(level as u16)
}

/// Symbols of a history sample: voltages first, then ΔVth history levels.
pub fn history_symbols(sample: &HistorySample, q: &QuantizerSpec, vdd: f64) -> Result<Vec<Symbol>> {
    let mut out: Vec<Symbol> = sample.voltages.iter().map(|&v| voltage_symbol(v, vdd)).collect();
    for &d in &sample.history_mv {
        out.push(Symbol::Dvt(q.quantize(d)? as u16));
    }
    Ok(out)
}

pub fn eol_symbols(sample: &EolSample, vdd: f64) -> Vec<Symbol> {
    sample.voltages.iter().map(|&v| voltage_symbol(v, vdd)).collect()
}

/// Encodes a history sample against an item memory.
pub fn encode(sample: &HistorySample, im: &ItemMemory, q: &QuantizerSpec, vdd: f64) -> Result<Hypervector> {
    Ok(Encoding::PositionBinding.encode(im, &history_symbols(sample, q, vdd)?))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HdcParams {
    pub dim: usize,
    pub epochs: usize,
    pub learn_rate: f64,
    pub seed: u64,
    pub ordinal_items: ItemKind,
}

impl Default for HdcParams {
    fn default() -> Self {
        HdcParams { dim: 10_000, epochs: 50, learn_rate: 0.01, seed: 0, ordinal_items: ItemKind::Level }
    }
}

/// What a model's queries encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdcTask {
    /// Per-segment history window with `h` previous steps.
    History { h: usize },
    /// Whole waveform of the given length, predicting the final ΔVth.
    Eol { len: usize },
}

impl HdcTask {
    fn positions(self) -> usize {
        match self {
            HdcTask::History { h } => 2 * h + 1,
            HdcTask::Eol { len } => len,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HdcModel {
    params: HdcParams,
    task: HdcTask,
    vdd: f64,
    quantizer: QuantizerSpec,
    encoding: Encoding,
    classes: Vec<Vec<f32>>,
    norms: Vec<f32>,
    multiplier: f64,
    items: ItemMemory,
    /// Training accuracy after the initial pass and after each retraining epoch.
    pub accuracy_history: Vec<f64>,
}

fn dot_f32(c: &[f32], q: &[i8]) -> f32 {
    let mut acc = [0f32; 16];
    let mut cc = c.chunks_exact(16);
    let mut qc = q.chunks_exact(16);
    for (a, b) in cc.by_ref().zip(qc.by_ref()) {
        for l in 0..16 {
            acc[l] += a[l] * f32::from(b[l]);
        }
    }
    let tail: f32 = cc.remainder().iter().zip(qc.remainder()).map(|(a, &b)| a * f32::from(b)).sum();
    acc.iter().sum::<f32>() + tail
}

fn norm_f32(c: &[f32]) -> f32 {
    c.iter().map(|x| x * x).sum::<f32>().sqrt()
}

impl HdcModel {
    fn empty(params: HdcParams, task: HdcTask, vdd: f64, quantizer: QuantizerSpec) -> Result<Self> {
        if params.dim == 0 {
            return Err(Error::invalid("HDC dimension must be positive"));
        }
        if !(params.learn_rate.is_finite() && params.learn_rate > 0.0) {
            return Err(Error::invalid("learn rate must be positive"));
        }
        let mut items = ItemMemory::new(params.dim, params.seed, params.ordinal_items, VOLTAGE_LEVELS, quantizer.n_bins);
        items.warm(task.positions());
        Ok(HdcModel {
            params,
            task,
            vdd,
            quantizer,
            encoding: Encoding::PositionBinding,
            classes: vec![vec![0.0; params.dim]; quantizer.n_bins],
            norms: vec![0.0; quantizer.n_bins],
            multiplier: 1.0,
            items,
            accuracy_history: Vec::new(),
        })
    }

    /// Trains a per-segment ΔVth classifier on teacher-forced history samples.
    pub fn train_history(
        samples: &[HistorySample],
        quantizer: QuantizerSpec,
        vdd: f64,
        params: HdcParams,
    ) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Training("empty dataset".into()))?;
        let h = first.history();
        let mut model = Self::empty(params, HdcTask::History { h }, vdd, quantizer)?;
        let mut queries = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            if s.history() != h {
                return Err(Error::invalid("mixed history lengths in dataset"));
            }
            queries.push(model.encode_history(s)?);
            labels.push(quantizer.quantize(s.label_mv)?);
        }
        model.fit(&queries, &labels);
        Ok(model)
    }

    /// Trains a final-ΔVth classifier on whole waveforms.
    pub fn train_eol(samples: &[EolSample], quantizer: QuantizerSpec, vdd: f64, params: HdcParams) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Training("empty dataset".into()))?;
        let len = first.voltages.len();
        let mut model = Self::empty(params, HdcTask::Eol { len }, vdd, quantizer)?;
        let mut queries = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            if s.voltages.len() != len {
                return Err(Error::LengthMismatch {
                    id: s.transistor_id.clone(),
                    detail: format!("{} segments, model uses {len}", s.voltages.len()),
                });
            }
            queries.push(model.encode_eol(s));
            labels.push(quantizer.quantize(s.label_mv)?);
        }
        model.fit(&queries, &labels);
        Ok(model)
    }

    fn add_scaled(&mut self, class: usize, q: &Hypervector, scale: f32) {
        for (c, &x) in self.classes[class].iter_mut().zip(&q.0) {
            *c += scale * f32::from(x);
        }
        self.norms[class] = norm_f32(&self.classes[class]);
    }

    fn accuracy(&self, queries: &[Hypervector], labels: &[usize]) -> f64 {
        let hits = queries.iter().zip(labels).filter(|(q, &l)| self.predict_encoded(q) == l).count();
        hits as f64 / queries.len() as f64
    }

    fn fit(&mut self, queries: &[Hypervector], labels: &[usize]) {
        let lr = self.params.learn_rate as f32;
        // single-pass bundling; the uniform lr scale keeps retraining steps commensurate
        for (q, &l) in queries.iter().zip(labels) {
            for (c, &x) in self.classes[l].iter_mut().zip(&q.0) {
                *c += lr * f32::from(x);
            }
        }
        for k in 0..self.classes.len() {
            self.norms[k] = norm_f32(&self.classes[k]);
        }
        self.accuracy_history.push(self.accuracy(queries, labels));

        for epoch in 0..self.params.epochs {
            let mut missed = 0usize;
            for (q, &l) in queries.iter().zip(labels) {
                let pred = self.predict_encoded(q);
                if pred != l {
                    missed += 1;
                    self.add_scaled(l, q, lr);
                    self.add_scaled(pred, q, -lr);
                }
            }
            let acc = self.accuracy(queries, labels);
            log::debug!("hdc epoch {epoch}: {missed} updates, train accuracy {acc:.4}");
            self.accuracy_history.push(acc);
            if missed == 0 {
                break;
            }
        }
    }

    pub fn encode_history(&self, sample: &HistorySample) -> Result<Hypervector> {
        if let HdcTask::History { h } = self.task {
            if sample.history() != h {
                return Err(Error::invalid(format!(
                    "sample has history {}, model expects {h}",
                    sample.history()
                )));
            }
        } else {
            return Err(Error::invalid("model was trained on end-of-life samples"));
        }
        Ok(self.encoding.encode(&self.items, &history_symbols(sample, &self.quantizer, self.vdd)?))
    }

    pub fn encode_eol(&self, sample: &EolSample) -> Hypervector {
        self.encoding.encode(&self.items, &eol_symbols(sample, self.vdd))
    }

    /// Cosine similarity of the query to each class; zero classes score 0.
    pub fn similarities(&self, q: &Hypervector) -> Vec<f64> {
        let qn = (q.dim() as f32).sqrt();
        self.classes
            .iter()
            .zip(&self.norms)
            .map(|(c, &n)| if n > 0.0 { f64::from(dot_f32(c, &q.0) / (n * qn)) } else { 0.0 })
            .collect()
    }

    /// Arg-max cosine class; ties resolve to the lowest index.
    pub fn predict_encoded(&self, q: &Hypervector) -> usize {
        let mut best = 0;
        let mut best_sim = f32::NEG_INFINITY;
        for (k, (c, &n)) in self.classes.iter().zip(&self.norms).enumerate() {
            let sim = if n > 0.0 { dot_f32(c, &q.0) / n } else { 0.0 };
            if sim > best_sim {
                best = k;
                best_sim = sim;
            }
        }
        best
    }

    pub fn predict_history(&self, sample: &HistorySample) -> Result<usize> {
        Ok(self.predict_encoded(&self.encode_history(sample)?))
    }

    pub fn predict_eol_mv(&self, sample: &EolSample) -> f64 {
        self.quantizer.dequantize(self.predict_encoded(&self.encode_eol(sample)))
    }

    pub fn class_vectors(&self) -> &[Vec<f32>] {
        &self.classes
    }

    /// Multiplies every class vector by `factor` (> 0).
    pub fn scale_classes(&mut self, factor: f32) {
        for c in &mut self.classes {
            c.iter_mut().for_each(|x| *x *= factor);
        }
        for k in 0..self.classes.len() {
            self.norms[k] = norm_f32(&self.classes[k]);
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn params(&self) -> &HdcParams {
        &self.params
    }

    pub fn task(&self) -> HdcTask {
        self.task
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    pub fn vdd(&self) -> f64 {
        self.vdd
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn set_multiplier(&mut self, m: f64) {
        self.multiplier = m;
    }

    pub fn item_memory(&self) -> &ItemMemory {
        &self.items
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let (task_kind, task_param) = match self.task {
            HdcTask::History { h } => (0u32, h as u32),
            HdcTask::Eol { len } => (1u32, len as u32),
        };
        let ordinal = match self.params.ordinal_items {
            ItemKind::Random => 0u32,
            ItemKind::Level => 1u32,
        };
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        for v in [FORMAT_VERSION, self.params.dim as u32, self.classes.len() as u32] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        header.extend_from_slice(&self.params.seed.to_le_bytes());
        for v in [task_kind, task_param, VOLTAGE_LEVELS as u32, 0, ordinal, self.params.epochs as u32] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.params.learn_rate, self.vdd, self.quantizer.min_mv, self.quantizer.max_mv, self.multiplier] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        debug_assert_eq!(header.len(), HEADER_LEN);
        out.write_all(&header)?;
        let mut body = Vec::with_capacity(self.classes.len() * self.params.dim * 4);
        for c in &self.classes {
            for x in c {
                body.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.write_all(&body)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        input.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::schema("not an HDC model file"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        if u32_at(4) != FORMAT_VERSION {
            return Err(Error::schema(format!("unsupported HDC format version {}", u32_at(4))));
        }
        let dim = u32_at(8) as usize;
        let n_classes = u32_at(12) as usize;
        let seed = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let task = match u32_at(24) {
            0 => HdcTask::History { h: u32_at(28) as usize },
            1 => HdcTask::Eol { len: u32_at(28) as usize },
            k => return Err(Error::schema(format!("unknown HDC task {k}"))),
        };
        if u32_at(32) as usize != VOLTAGE_LEVELS || u32_at(36) != 0 {
            return Err(Error::schema("unsupported HDC encoding"));
        }
        let ordinal_items = match u32_at(40) {
            0 => ItemKind::Random,
            1 => ItemKind::Level,
            k => return Err(Error::schema(format!("unknown item kind {k}"))),
        };
        let params = HdcParams { dim, epochs: u32_at(44) as usize, learn_rate: f64_at(48), seed, ordinal_items };
        let quantizer = QuantizerSpec::new(f64_at(64), f64_at(72), n_classes)?;
        let mut model = Self::empty(params, task, f64_at(56), quantizer)?;
        model.multiplier = f64_at(80);
        let mut buf = vec![0u8; n_classes * dim * 4];
        input.read_exact(&mut buf)?;
        for (k, chunk) in buf.chunks_exact(dim * 4).enumerate() {
            model.classes[k] = chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            model.norms[k] = norm_f32(&model.classes[k]);
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Trace, Waveform};

    const VDD: f64 = 0.7;

    fn sample(voltages: Vec<f64>, history_mv: Vec<f64>, label_mv: f64) -> HistorySample {
        HistorySample { transistor_id: "t".into(), segment: 0, voltages, history_mv, label_mv }
    }

    fn quantizer() -> QuantizerSpec {
        QuantizerSpec::new(0.0, 16.0, 16).unwrap()
    }

    #[test]
    fn item_memory_is_deterministic_and_cached() {
        let mut a = ItemMemory::new(1000, 7, ItemKind::Random, 10, 16);
        let b = ItemMemory::new(1000, 7, ItemKind::Random, 10, 16);
        let first = a.get_or_insert(Symbol::Dvt(3)).clone();
        assert_eq!(first, *b.get(Symbol::Dvt(3)));
        assert_eq!(first, *a.get_or_insert(Symbol::Dvt(3)));
        assert_ne!(first, *b.get(Symbol::Dvt(4)));
        assert!(first.0.iter().all(|&x| x == 1 || x == -1));
    }

    #[test]
    fn random_vectors_nearly_orthogonal() {
        for dim in [1000, 10_000] {
            let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
            let mean: f64 = (0..1000)
                .map(|_| Hypervector::random(dim, &mut rng).cosine(&Hypervector::random(dim, &mut rng)).abs())
                .sum::<f64>()
                / 1000.0;
            assert!(mean <= 2.0 / (dim as f64).sqrt(), "D={dim}: {mean}");
        }
    }

    #[test]
    fn level_vectors_degrade_gracefully() {
        let im = ItemMemory::new(10_000, 1, ItemKind::Level, 10, 64);
        let l0 = im.get(Symbol::Dvt(0)).into_owned();
        let l1 = im.get(Symbol::Dvt(1)).into_owned();
        let l63 = im.get(Symbol::Dvt(63)).into_owned();
        assert!(l0.cosine(&l1) > 0.95);
        assert!(l0.cosine(&l63).abs() < 0.05);
    }

    #[test]
    fn h0_encoding_is_bound_item() {
        let im = ItemMemory::new(2000, 3, ItemKind::Random, 10, 16);
        let s = sample(vec![0.0], vec![], 1.0);
        let q = encode(&s, &im, &quantizer(), VDD).unwrap();
        let item = im.get(Symbol::Voltage(0));
        let pos = im.get(Symbol::Position(0));
        let expected: Vec<i8> = item.0.iter().zip(&pos.0).map(|(a, b)| a * b).collect();
        assert_eq!(q.0, expected);
        assert_eq!(q.cosine(&q), 1.0);
    }

    #[test]
    fn similar_samples_encode_similarly() {
        // h = 8: 17 features; one changed feature keeps most of the bundle
        let im = ItemMemory::new(10_000, 5, ItemKind::Random, 10, 16);
        let q = quantizer();
        let v: Vec<f64> = (0..9).map(|i| if i % 2 == 0 { 0.0 } else { VDD }).collect();
        let d: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let a = encode(&sample(v.clone(), d.clone(), 0.0), &im, &q, VDD).unwrap();
        let mut v2 = v.clone();
        v2[4] = VDD;
        let b = encode(&sample(v2, d.clone(), 0.0), &im, &q, VDD).unwrap();
        assert!(a.cosine(&b) > 0.7, "{}", a.cosine(&b));

        let v3: Vec<f64> = v.iter().map(|&x| VDD - x).collect();
        let d3: Vec<f64> = d.iter().map(|x| x + 8.0).collect();
        let c = encode(&sample(v3, d3, 0.0), &im, &q, VDD).unwrap();
        assert!(a.cosine(&c).abs() < 0.1, "{}", a.cosine(&c));
    }

    fn toy_dataset() -> Vec<HistorySample> {
        (0..40)
            .map(|i| {
                let v = if i % 2 == 0 { 0.0 } else { VDD };
                let label = if i % 2 == 0 { 12.5 } else { 1.5 };
                sample(vec![v, VDD], vec![(i % 5) as f64], label)
            })
            .collect()
    }

    fn params(dim: usize) -> HdcParams {
        HdcParams { dim, epochs: 5, learn_rate: 0.01, seed: 9, ordinal_items: ItemKind::Random }
    }

    #[test]
    fn single_sample_memorized() {
        let s = sample(vec![0.0, VDD], vec![3.0], 7.2);
        let m = HdcModel::train_history(&[s.clone()], quantizer(), VDD, HdcParams { epochs: 1, ..params(1000) }).unwrap();
        assert_eq!(m.predict_history(&s).unwrap(), quantizer().quantize(7.2).unwrap());
    }

    #[test]
    fn separable_toy_set() {
        let ds = toy_dataset();
        let m = HdcModel::train_history(&ds, quantizer(), VDD, params(4000)).unwrap();
        assert!(m.accuracy_history[1] >= m.accuracy_history[0]);
        assert_eq!(*m.accuracy_history.last().unwrap(), 1.0);
        for s in &ds {
            assert_eq!(m.predict_history(s).unwrap(), s.class(&quantizer()).unwrap());
        }
    }

    #[test]
    fn zero_query_breaks_ties_low() {
        let m = HdcModel::train_history(&toy_dataset(), quantizer(), VDD, params(1000)).unwrap();
        // with every class zero, every similarity ties at 0
        let mut blank = m.clone();
        blank.scale_classes(0.0);
        assert_eq!(blank.predict_encoded(&Hypervector(vec![1; 1000])), 0);
    }

    #[test]
    fn predictions_match_brute_force_cosine() {
        let ds = toy_dataset();
        let m = HdcModel::train_history(&ds, quantizer(), VDD, params(2000)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = Hypervector::random(2000, &mut rng);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (k, c) in m.class_vectors().iter().enumerate() {
                let dot: f64 = c.iter().zip(&q.0).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
                let norm: f64 = c.iter().map(|&a| f64::from(a).powi(2)).sum::<f64>().sqrt();
                let cos = if norm > 0.0 { dot / (norm * (2000f64).sqrt()) } else { 0.0 };
                if cos > best.1 {
                    best = (k, cos);
                }
            }
            assert_eq!(m.predict_encoded(&q), best.0);
        }
    }

    #[test]
    fn positive_scaling_keeps_predictions() {
        let ds = toy_dataset();
        let m = HdcModel::train_history(&ds, quantizer(), VDD, params(1000)).unwrap();
        let mut scaled = m.clone();
        scaled.scale_classes(37.5);
        for s in &ds {
            assert_eq!(m.predict_history(s).unwrap(), scaled.predict_history(s).unwrap());
        }
    }

    #[test]
    fn file_round_trip() {
        let m = HdcModel::train_history(&toy_dataset(), quantizer(), VDD, params(1000)).unwrap();
        let mut a = Vec::new();
        m.write_to(&mut a).unwrap();
        let back = HdcModel::read_from(a.as_slice()).unwrap();
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 88 + 16 * 1000 * 4);
        assert_eq!(&a[8..12], &1000u32.to_le_bytes());
        assert!(HdcModel::read_from(&b"nope"[..]).is_err());

        let again = HdcModel::train_history(&toy_dataset(), quantizer(), VDD, params(1000)).unwrap();
        let mut c = Vec::new();
        again.write_to(&mut c).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn eol_task() {
        let wfs: Vec<Waveform> = (0..12)
            .map(|i| Waveform::new(format!("d{i}"), 1e-3, vec![if i % 3 == 0 { 0.0 } else { VDD }; 8]).unwrap())
            .collect();
        let traces: Vec<Trace> = wfs
            .iter()
            .map(|w| Trace::new(w.transistor_id.clone(), vec![if w.segments[0] == 0.0 { 9.0 } else { 0.5 }; 8]))
            .collect();
        let ds = crate::dataset::build_eol_dataset(&wfs, &traces).unwrap();
        let m = HdcModel::train_eol(&ds, quantizer(), VDD, params(1000)).unwrap();
        assert_eq!(m.predict_eol_mv(&ds[0]), 9.5);
        assert_eq!(m.predict_eol_mv(&ds[1]), 0.5);
        assert!(m.encode_history(&sample(vec![0.0], vec![], 0.0)).is_err());
    }
}
