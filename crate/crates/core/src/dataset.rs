//! Training sets built from waveform/trace pairs.
//!
//! * history samples: current voltage plus `h` previous voltages and ΔVth values,
//!   labelled with the current ΔVth (per-segment classifiers);
//! * sequence pairs for the LSTM;
//! * end-of-life pairs: all voltages of a waveform, labelled with its final ΔVth.
//!
//! History before the first segment is padded as a fresh, unstressed device:
//! voltage `vdd` and ΔVth 0 mV. Training uses the oracle's ΔVth history
//! (teacher forcing); recursive inference feeds back model predictions through
//! the same [`history_window`] routine.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{QuantizerSpec, Trace, Waveform};

/// Longest sequence the LSTM is expected to handle well.
pub const LSTM_MAX_LEN: usize = 32;

/// Items that belong to a transistor; splits never separate them.
pub trait Keyed {
    fn transistor_id(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistorySample {
    pub transistor_id: String,
    /// Segment index `i`, zero-based.
    pub segment: usize,
    /// `V_i, V_{i-1}, ..., V_{i-h}` in volts.
    pub voltages: Vec<f64>,
    /// `ΔVth_{i-1}, ..., ΔVth_{i-h}` in mV.
    pub history_mv: Vec<f64>,
    pub label_mv: f64,
}

impl Keyed for HistorySample {
    fn transistor_id(&self) -> &str {
        &self.transistor_id
    }
}

/// Normalization of raw history features into roughly `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaling {
    pub vdd: f64,
    pub dvt_scale_mv: f64,
}

impl FeatureScaling {
    pub fn new(vdd: f64, q: &QuantizerSpec) -> Self {
        FeatureScaling { vdd, dvt_scale_mv: q.max_mv }
    }
}

impl HistorySample {
    pub fn history(&self) -> usize {
        self.history_mv.len()
    }

    /// `2h + 1` normalized features: voltages over `vdd`, ΔVth over the scale.
    pub fn features(&self, scaling: &FeatureScaling) -> Vec<f64> {
        self.voltages
            .iter()
            .map(|v| v / scaling.vdd)
            .chain(self.history_mv.iter().map(|d| d / scaling.dvt_scale_mv))
            .collect()
    }

    pub fn class(&self, q: &QuantizerSpec) -> Result<usize> {
        q.quantize(self.label_mv)
    }
}

/// Builds the sample for segment `i` from the waveform and the ΔVth values of
/// segments `0..i` (oracle labels in training, predictions in inference).
pub fn history_window(w: &Waveform, dvt_before: &[f64], i: usize, h: usize, vdd: f64, label_mv: f64) -> HistorySample {
    debug_assert!(dvt_before.len() >= i);
    let voltages = (0..=h)
        .map(|k| if k <= i { w.segments[i - k] } else { vdd })
        .collect();
    let history_mv = (1..=h).map(|k| if k <= i { dvt_before[i - k] } else { 0.0 }).collect();
    HistorySample {
        transistor_id: w.transistor_id.clone(),
        segment: i,
        voltages,
        history_mv,
        label_mv,
    }
}

fn check_pair(w: &Waveform, t: &Trace) -> Result<()> {
    if w.transistor_id != t.transistor_id {
        return Err(Error::LengthMismatch {
            id: w.transistor_id.clone(),
            detail: format!("paired with trace '{}'", t.transistor_id),
        });
    }
    if w.len() != t.len() {
        return Err(Error::LengthMismatch {
            id: w.transistor_id.clone(),
            detail: format!("waveform has {} segments, trace has {}", w.len(), t.len()),
        });
    }
    Ok(())
}

fn check_aligned(wfs: &[Waveform], traces: &[Trace]) -> Result<()> {
    if wfs.len() != traces.len() {
        return Err(Error::invalid(format!(
            "{} waveforms but {} traces",
            wfs.len(),
            traces.len()
        )));
    }
    wfs.iter().zip(traces).try_for_each(|(w, t)| check_pair(w, t))
}

/// One teacher-forced sample per (transistor, segment).
pub fn build_history_dataset(wfs: &[Waveform], traces: &[Trace], h: usize, vdd: f64) -> Result<Vec<HistorySample>> {
    check_aligned(wfs, traces)?;
    let mut out = Vec::with_capacity(wfs.iter().map(Waveform::len).sum());
    for (w, t) in wfs.iter().zip(traces) {
        for i in 0..w.len() {
            out.push(history_window(w, &t.dvt, i, h, vdd, t.dvt[i]));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqSample {
    pub transistor_id: String,
    /// Normalized gate voltages, reversed when requested.
    pub input: Vec<f64>,
    /// ΔVth per segment in mV, in forward time order.
    pub target: Vec<f64>,
}

impl Keyed for SeqSample {
    fn transistor_id(&self) -> &str {
        &self.transistor_id
    }
}

/// Normalized (and optionally reversed) encoder input for a waveform.
pub fn sequence_input(w: &Waveform, vdd: f64, reverse: bool) -> Vec<f64> {
    let mut input: Vec<f64> = w.segments.iter().map(|v| v / vdd).collect();
    if reverse {
        input.reverse();
    }
    input
}

pub fn build_seq_dataset(wfs: &[Waveform], traces: &[Trace], vdd: f64, reverse: bool) -> Result<Vec<SeqSample>> {
    check_aligned(wfs, traces)?;
    if let Some(w) = wfs.iter().find(|w| w.len() > LSTM_MAX_LEN) {
        log::warn!(
            "sequence '{}' has {} segments; LSTM accuracy degrades beyond {LSTM_MAX_LEN}",
            w.transistor_id,
            w.len()
        );
    }
    Ok(wfs
        .iter()
        .zip(traces)
        .map(|(w, t)| SeqSample {
            transistor_id: w.transistor_id.clone(),
            input: sequence_input(w, vdd, reverse),
            target: t.dvt.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EolSample {
    pub transistor_id: String,
    /// Every segment voltage, in volts.
    pub voltages: Vec<f64>,
    /// Final ΔVth in mV.
    pub label_mv: f64,
}

impl Keyed for EolSample {
    fn transistor_id(&self) -> &str {
        &self.transistor_id
    }
}

impl EolSample {
    pub fn features(&self, vdd: f64) -> Vec<f64> {
        self.voltages.iter().map(|v| v / vdd).collect()
    }
}

pub fn build_eol_dataset(wfs: &[Waveform], traces: &[Trace]) -> Result<Vec<EolSample>> {
    check_aligned(wfs, traces)?;
    if let Some(first) = wfs.first() {
        if let Some(w) = wfs.iter().find(|w| w.len() != first.len()) {
            return Err(Error::LengthMismatch {
                id: w.transistor_id.clone(),
                detail: format!("{} segments, dataset uses {}", w.len(), first.len()),
            });
        }
    }
    Ok(wfs
        .iter()
        .zip(traces)
        .map(|(w, t)| EolSample {
            transistor_id: w.transistor_id.clone(),
            voltages: w.segments.clone(),
            label_mv: t.last(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.7, rng_seed: 0 }
    }
}

/// Transistor-level shuffle split; every item of a transistor lands on one side.
pub fn split<T: Keyed + Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let ids: BTreeSet<&str> = items.iter().map(Keyed::transistor_id).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    if ids.len() < 2 {
        return Err(Error::invalid("split needs at least two transistors"));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.rng_seed));
    let n_train = ((spec.train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();
    let (train, test): (Vec<&T>, Vec<&T>) = items.iter().partition(|it| train_ids.contains(it.transistor_id()));
    Ok((train.into_iter().cloned().collect(), test.into_iter().cloned().collect()))
}

/// Splits aligned waveform/trace lists by transistor.
pub fn split_pairs(
    wfs: &[Waveform],
    traces: &[Trace],
    spec: &SplitSpec,
) -> Result<((Vec<Waveform>, Vec<Trace>), (Vec<Waveform>, Vec<Trace>))> {
    check_aligned(wfs, traces)?;
    let pairs: Vec<Pair> = wfs.iter().cloned().zip(traces.iter().cloned()).map(|(w, t)| Pair(w, t)).collect();
    let (train, test) = split(&pairs, spec)?;
    let unzip = |v: Vec<Pair>| v.into_iter().map(|Pair(w, t)| (w, t)).unzip();
    Ok((unzip(train), unzip(test)))
}

#[derive(Clone)]
struct Pair(Waveform, Trace);

impl Keyed for Pair {
    fn transistor_id(&self) -> &str {
        &self.0.transistor_id
    }
}

pub fn write_history_csv<W: Write>(out: W, samples: &[HistorySample]) -> Result<()> {
    let h = samples.first().map(HistorySample::history).unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["transistor_id".to_string(), "segment".to_string()];
    header.extend((0..=h).map(|k| format!("v_lag{k}")));
    header.extend((1..=h).map(|k| format!("dvt_lag{k}_mv")));
    header.push("label_mv".into());
    wtr.write_record(&header)?;
    for s in samples {
        let mut rec = vec![s.transistor_id.clone(), s.segment.to_string()];
        rec.extend(s.voltages.iter().chain(&s.history_mv).map(f64::to_string));
        rec.push(s.label_mv.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_eol_csv<W: Write>(out: W, samples: &[EolSample]) -> Result<()> {
    let l = samples.first().map(|s| s.voltages.len()).unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["transistor_id".to_string()];
    header.extend((0..l).map(|i| format!("v{i}")));
    header.push("label_mv".into());
    wtr.write_record(&header)?;
    for s in samples {
        let mut rec = vec![s.transistor_id.clone()];
        rec.extend(s.voltages.iter().map(f64::to_string));
        rec.push(s.label_mv.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
