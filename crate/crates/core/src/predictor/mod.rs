//! Surrogates applied to whole waveforms: recursive trace reconstruction with
//! a bias multiplier, metrics, end-of-life reports and delay estimation.

mod delay;
mod metrics;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use delay::{critical_path, delay_report, DelayModel, DelayReport, GateDelay, MIN_OVERDRIVE};
pub use metrics::{
    final_relative_error, r2_score, relative_error, spearman, summarize_re, ReSummary, MIN_BASELINE_MV,
};
pub use report::{error_analysis, EolReport, EolRow, ErrorAnalysis, ErrorRow, ModelEol, LOW_DUTY};

use crate::dataset::{history_window, FeatureScaling, HistorySample};
use crate::error::{Error, Result};
use crate::hdc::{HdcModel, HdcTask};
use crate::model::{QuantizerSpec, Trace, Waveform};
use crate::svm::{train_svm, SvmModel, SvmParams};

/// A per-segment ΔVth predictor driven by a history window.
pub trait StepModel {
    fn history(&self) -> usize;
    fn vdd(&self) -> f64;
    /// Predicted ΔVth (mV) of the sample's current segment.
    fn predict_step(&self, sample: &HistorySample) -> Result<f64>;
}

impl StepModel for HdcModel {
    fn history(&self) -> usize {
        match self.task() {
            HdcTask::History { h } => h,
            HdcTask::Eol { .. } => 0,
        }
    }

    fn vdd(&self) -> f64 {
        HdcModel::vdd(self)
    }

    fn predict_step(&self, sample: &HistorySample) -> Result<f64> {
        Ok(self.quantizer().dequantize(self.predict_history(sample)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct StepContext {
    h: usize,
    vdd: f64,
    quantizer: QuantizerSpec,
    #[serde(default = "unit")]
    multiplier: f64,
}

fn unit() -> f64 {
    1.0
}

/// Multiclass SVM over normalized history features.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmStepModel {
    svm: SvmModel,
    ctx: StepContext,
}

impl SvmStepModel {
    pub fn train(samples: &[HistorySample], quantizer: QuantizerSpec, vdd: f64, params: SvmParams) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Training("empty dataset".into()))?;
        let h = first.history();
        let scaling = FeatureScaling::new(vdd, &quantizer);
        let x: Vec<Vec<f64>> = samples.iter().map(|s| s.features(&scaling)).collect();
        let y = samples.iter().map(|s| s.class(&quantizer)).collect::<Result<Vec<_>>>()?;
        if samples.iter().any(|s| s.history() != h) {
            return Err(Error::invalid("mixed history lengths in dataset"));
        }
        let mut svm = train_svm(&x, &y, params)?;
        let ctx = StepContext { h, vdd, quantizer, multiplier: 1.0 };
        svm.context = serde_json::to_value(ctx)?;
        Ok(SvmStepModel { svm, ctx })
    }

    pub fn from_svm(svm: SvmModel) -> Result<Self> {
        let ctx: StepContext = serde_json::from_value(svm.context.clone())
            .map_err(|e| Error::schema(format!("SVM model lacks history context: {e}")))?;
        if svm.n_features() != 2 * ctx.h + 1 && svm.n_support() > 0 {
            return Err(Error::schema("SVM feature count does not match its history length"));
        }
        Ok(SvmStepModel { svm, ctx })
    }

    pub fn svm(&self) -> &SvmModel {
        &self.svm
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.ctx.quantizer
    }

    /// Fitted bias multiplier stored with the model; not applied by `predict_step`.
    pub fn multiplier(&self) -> f64 {
        self.ctx.multiplier
    }

    pub fn set_multiplier(&mut self, m: f64) {
        self.ctx.multiplier = m;
        self.svm.context = serde_json::to_value(self.ctx).expect("plain struct serializes");
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.svm.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_svm(SvmModel::load(path)?)
    }
}

impl StepModel for SvmStepModel {
    fn history(&self) -> usize {
        self.ctx.h
    }

    fn vdd(&self) -> f64 {
        self.ctx.vdd
    }

    fn predict_step(&self, sample: &HistorySample) -> Result<f64> {
        if sample.history() != self.ctx.h {
            return Err(Error::invalid(format!(
                "sample has history {}, model expects {}",
                sample.history(),
                self.ctx.h
            )));
        }
        let scaling = FeatureScaling::new(self.ctx.vdd, &self.ctx.quantizer);
        Ok(self.ctx.quantizer.dequantize(self.svm.predict(&sample.features(&scaling))))
    }
}

/// Global correction factor applied to every recursive prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasMultiplier(pub f64);

impl Default for BiasMultiplier {
    fn default() -> Self {
        BiasMultiplier(1.0)
    }
}

/// Reconstructs a trace segment by segment from the model's own outputs.
///
/// History starts as a fresh device (ΔVth 0 mV, gate at vdd); each prediction
/// is scaled by the multiplier before it is fed forward.
pub fn predict_trace_recursive(model: &dyn StepModel, w: &Waveform, h: usize, mult: BiasMultiplier) -> Result<Trace> {
    if h != model.history() {
        return Err(Error::invalid(format!("requested history {h}, model uses {}", model.history())));
    }
    let vdd = model.vdd();
    let mut pred = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let s = history_window(w, &pred, i, h, vdd, 0.0);
        pred.push(model.predict_step(&s)? * mult.0);
    }
    Ok(Trace::new(w.transistor_id.clone(), pred))
}

/// Same as the recursive form but every window carries the oracle history.
pub fn predict_trace_teacher_forced(model: &dyn StepModel, w: &Waveform, oracle: &Trace) -> Result<Trace> {
    if w.len() != oracle.len() {
        return Err(Error::LengthMismatch {
            id: w.transistor_id.clone(),
            detail: format!("waveform {} vs trace {} segments", w.len(), oracle.len()),
        });
    }
    let (h, vdd) = (model.history(), model.vdd());
    let pred = (0..w.len())
        .map(|i| model.predict_step(&history_window(w, &oracle.dvt, i, h, vdd, oracle.dvt[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trace::new(w.transistor_id.clone(), pred))
}

pub fn predict_all(model: &dyn StepModel, wfs: &[Waveform], mult: BiasMultiplier) -> Result<Vec<Trace>> {
    wfs.iter().map(|w| predict_trace_recursive(model, w, model.history(), mult)).collect()
}

const MULT_MIN: f64 = 0.5;
const MULT_MAX: f64 = 2.0;

fn mean_ratio(preds: &[Trace], traces: &[Trace]) -> Option<f64> {
    let ratios: Vec<f64> = preds
        .iter()
        .zip(traces)
        .filter(|(p, t)| t.last() >= MIN_BASELINE_MV && p.last() > 1e-9)
        .map(|(p, t)| p.last() / t.last())
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

fn final_bias(preds: &[Trace], traces: &[Trace]) -> Result<f64> {
    Ok(summarize_re(preds.iter().zip(traces))?.mean_signed_final.abs())
}

/// Fits the multiplier on training waveforms only.
///
/// The first candidate inverts the mean predicted/oracle final ratio of the
/// unscaled recursion; one refinement repeats this with the candidate fed
/// back. The candidate (or 1) with the smallest |mean RE_l| is kept.
pub fn fit_multiplier(model: &dyn StepModel, wfs: &[Waveform], traces: &[Trace]) -> Result<BiasMultiplier> {
    if wfs.len() != traces.len() {
        return Err(Error::invalid("waveforms and traces differ in count"));
    }
    let base = predict_all(model, wfs, BiasMultiplier(1.0))?;
    let Some(r0) = mean_ratio(&base, traces) else {
        log::warn!("all predicted finals are zero; multiplier left at 1");
        return Ok(BiasMultiplier(1.0));
    };
    let mut best = (1.0, final_bias(&base, traces)?);
    let mut m = (1.0 / r0).clamp(MULT_MIN, MULT_MAX);
    for _ in 0..2 {
        let preds = predict_all(model, wfs, BiasMultiplier(m))?;
        let bias = final_bias(&preds, traces)?;
        if bias < best.1 {
            best = (m, bias);
        }
        match mean_ratio(&preds, traces) {
            Some(r) => m = (m / r).clamp(MULT_MIN, MULT_MAX),
            None => break,
        }
    }
    if best.0 == MULT_MIN || best.0 == MULT_MAX {
        log::warn!("bias multiplier clamped to {}", best.0);
    }
    log::info!("bias multiplier {:.4} (training |mean RE_l| {:.3} %)", best.0, best.1);
    Ok(BiasMultiplier(best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_std_cells, simulate, StimulusPlan};
    use crate::dataset::build_history_dataset;
    use crate::hdc::HdcParams;
    use crate::oracle::AgingOracle;
    use crate::RunConfig;

    /// History-free stand-in whose output is linear in its scale.
    struct Scaled {
        scale: f64,
        h: usize,
    }

    impl StepModel for Scaled {
        fn history(&self) -> usize {
            self.h
        }
        fn vdd(&self) -> f64 {
            0.7
        }
        fn predict_step(&self, s: &HistorySample) -> Result<f64> {
            Ok(self.scale * s.voltages.iter().map(|v| 1.0 - v / 0.7).sum::<f64>())
        }
    }

    fn waves(n_segments: usize) -> (Vec<Waveform>, Vec<Trace>) {
        let cfg = RunConfig::default();
        let wfs = simulate(&build_std_cells(), &StimulusPlan::new(n_segments, 5).unwrap(), &cfg).unwrap();
        let traces = AgingOracle::with_defaults(cfg.vdd).run_all(&wfs).unwrap();
        (wfs, traces)
    }

    #[test]
    fn unit_multiplier_is_identity() {
        let (wfs, _) = waves(8);
        let m = Scaled { scale: 1.0, h: 2 };
        for w in &wfs[..5] {
            let a = predict_trace_recursive(&m, w, 2, BiasMultiplier(1.0)).unwrap();
            let b = predict_trace_recursive(&m, w, 2, BiasMultiplier::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), w.len());
        }
        assert!(predict_trace_recursive(&m, &wfs[0], 3, BiasMultiplier(1.0)).is_err());
    }

    #[test]
    fn multiplier_recovers_artificial_scaling() {
        let (wfs, _) = waves(16);
        let truth = Scaled { scale: 1.0, h: 1 };
        let traces = predict_all(&truth, &wfs, BiasMultiplier(1.0)).unwrap();
        let half = Scaled { scale: 0.5, h: 1 };
        let f = fit_multiplier(&half, &wfs, &traces).unwrap();
        assert!((f.0 - 2.0).abs() < 0.05, "{f:?}");
        let third = Scaled { scale: 0.2, h: 1 };
        assert_eq!(fit_multiplier(&third, &wfs, &traces).unwrap().0, MULT_MAX);
        let zero = Scaled { scale: 0.0, h: 1 };
        assert_eq!(fit_multiplier(&zero, &wfs, &traces).unwrap().0, 1.0);
    }

    fn hdc_on_std_cells() -> (HdcModel, Vec<Waveform>, Vec<Trace>) {
        let (wfs, traces) = waves(16);
        let q = QuantizerSpec::from_traces(&traces, 64).unwrap();
        let ds = build_history_dataset(&wfs, &traces, 3, 0.7).unwrap();
        let p = HdcParams { dim: 2000, epochs: 10, ..HdcParams::default() };
        (HdcModel::train_history(&ds, q, 0.7, p).unwrap(), wfs, traces)
    }

    #[test]
    fn all_vdd_waveform_predicts_near_zero() {
        let (m, _, _) = hdc_on_std_cells();
        let w = Waveform::new("idle", 1e-3, vec![0.7; 16]).unwrap();
        let t = predict_trace_recursive(&m, &w, 3, BiasMultiplier(1.0)).unwrap();
        let bin = m.quantizer().bin_width();
        assert!(t.dvt.iter().all(|&v| v <= bin), "{:?}", t.dvt);
    }

    #[test]
    fn multiplier_never_worsens_training_bias() {
        let (m, wfs, traces) = hdc_on_std_cells();
        let f = fit_multiplier(&m, &wfs, &traces).unwrap();
        let plain = final_bias(&predict_all(&m, &wfs, BiasMultiplier(1.0)).unwrap(), &traces).unwrap();
        let fitted = final_bias(&predict_all(&m, &wfs, f).unwrap(), &traces).unwrap();
        assert!(fitted <= plain);
        let tf = predict_trace_teacher_forced(&m, &wfs[0], &traces[0]).unwrap();
        assert_eq!(tf.len(), 16);
    }

    #[test]
    fn svm_step_model_round_trip() {
        let (wfs, traces) = waves(8);
        let q = QuantizerSpec::from_traces(&traces, 16).unwrap();
        let ds = build_history_dataset(&wfs[..20], &traces[..20], 2, 0.7).unwrap();
        let m = SvmStepModel::train(&ds, q, 0.7, SvmParams::svc()).unwrap();
        let dir = std::env::temp_dir().join(format!("agekit-svmstep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.svm");
        m.save(&path).unwrap();
        let back = SvmStepModel::load(&path).unwrap();
        assert_eq!(back.history(), 2);
        let a = predict_trace_recursive(&m, &wfs[30], 2, BiasMultiplier(1.0)).unwrap();
        let b = predict_trace_recursive(&back, &wfs[30], 2, BiasMultiplier(1.0)).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(dir).ok();
    }
}
