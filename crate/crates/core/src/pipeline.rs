//! End-to-end scenarios shared by the CLI, the acceptance suite and the
//! Python bindings.
//!
//! Scenario 1 trains per-segment classifiers on standard-cell traces and
//! reconstructs unseen circuit traces recursively. Scenario 2 regresses the
//! final ΔVth from whole waveforms and turns it into EOL delay reports.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{builtin, prefix_ids, simulate, Netlist, StimulusPlan};
use crate::dataset::{build_eol_dataset, build_history_dataset, sequence_input};
use crate::error::{Error, Result};
use crate::hdc::{HdcModel, HdcParams};
use crate::io::{save_traces, save_waveforms};
use crate::model::{QuantizerSpec, RunConfig, Trace, Waveform, DEFAULT_BINS};
use crate::nn::{train_lstm, train_mlp, Loss, LstmConfig, LstmSeq2Seq, MlpModel, TrainSpec};
use crate::oracle::AgingOracle;
use crate::predictor::{
    error_analysis, fit_multiplier, predict_all, predict_trace_teacher_forced, summarize_re, BiasMultiplier,
    DelayModel, EolReport, ReSummary, StepModel, SvmStepModel,
};
use crate::svm::{train_svr, SvmParams, SvrModel};

/// Simulates `runs` independent stimulus runs of one circuit; ids get an
/// `r{k}/` prefix when more than one run is drawn.
pub fn corpus(
    nl: &Netlist,
    runs: usize,
    segments: usize,
    seed: u64,
    cfg: &RunConfig,
    oracle: &AgingOracle,
) -> Result<(Vec<Waveform>, Vec<Trace>)> {
    if runs == 0 {
        return Err(Error::invalid("at least one stimulus run is required"));
    }
    let mut wfs = Vec::new();
    for k in 0..runs {
        let mut w = simulate(nl, &StimulusPlan::new(segments, seed.wrapping_add(k as u64))?, cfg)?;
        if runs > 1 {
            prefix_ids(&mut w, &format!("r{k}/"));
        }
        wfs.extend(w);
    }
    let traces = oracle.run_all(&wfs)?;
    Ok((wfs, traces))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario1Config {
    pub segments: usize,
    pub train_runs: usize,
    pub seed: u64,
    pub test_circuit: String,
    pub test_seed: u64,
    pub svm_h: usize,
    pub hdc_h: usize,
    pub n_bins: usize,
    pub svm: SvmParams,
    pub hdc: HdcParams,
}

impl Default for Scenario1Config {
    fn default() -> Self {
        Scenario1Config {
            segments: 32,
            train_runs: 5,
            seed: 1,
            test_circuit: "adder8".into(),
            test_seed: 1001,
            svm_h: 8,
            hdc_h: 7,
            n_bins: DEFAULT_BINS,
            svm: SvmParams::svc(),
            hdc: HdcParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub name: String,
    pub multiplier: BiasMultiplier,
    pub recursive: Vec<Trace>,
    pub teacher_forced: Vec<Trace>,
    pub summary: ReSummary,
    pub teacher_summary: ReSummary,
    pub train_seconds: f64,
    /// Mean recursive inference time per trace.
    pub infer_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario1Result {
    pub test_waveforms: Vec<Waveform>,
    pub baseline: Vec<Trace>,
    pub quantizer: QuantizerSpec,
    pub svm: StepResult,
    pub hdc: StepResult,
    pub svm_model: SvmStepModel,
    pub hdc_model: HdcModel,
}

impl Scenario1Result {
    /// The model with the lower mean |RE_l|.
    pub fn best(&self) -> &StepResult {
        if self.hdc.summary.mean_abs_final < self.svm.summary.mean_abs_final {
            &self.hdc
        } else {
            &self.svm
        }
    }
}

fn evaluate_step(
    name: &str,
    model: &dyn StepModel,
    train: (&[Waveform], &[Trace]),
    test: (&[Waveform], &[Trace]),
    train_seconds: f64,
) -> Result<StepResult> {
    let multiplier = fit_multiplier(model, train.0, train.1)?;
    let t0 = Instant::now();
    let recursive = predict_all(model, test.0, multiplier)?;
    let infer_seconds = t0.elapsed().as_secs_f64() / test.0.len().max(1) as f64;
    let teacher_forced = test
        .0
        .iter()
        .zip(test.1)
        .map(|(w, t)| predict_trace_teacher_forced(model, w, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(StepResult {
        name: name.into(),
        multiplier,
        summary: summarize_re(recursive.iter().zip(test.1))?,
        teacher_summary: summarize_re(teacher_forced.iter().zip(test.1))?,
        recursive,
        teacher_forced,
        train_seconds,
        infer_seconds,
    })
}

/// Standard-cell training, recursive prediction on the test circuit.
pub fn scenario1(sc: &Scenario1Config, cfg: &RunConfig, oracle: &AgingOracle) -> Result<Scenario1Result> {
    cfg.validate_for_len(sc.segments)?;
    let (train_w, train_t) = corpus(&builtin("stdcells")?, sc.train_runs, sc.segments, sc.seed, cfg, oracle)?;
    let (test_w, test_t) = corpus(&builtin(&sc.test_circuit)?, 1, sc.segments, sc.test_seed, cfg, oracle)?;
    let q = QuantizerSpec::from_traces(&train_t, sc.n_bins)?;
    log::info!("scenario 1: {} training waveforms, {} test waveforms", train_w.len(), test_w.len());

    let t0 = Instant::now();
    let mut svm_model = SvmStepModel::train(&build_history_dataset(&train_w, &train_t, sc.svm_h, cfg.vdd)?, q, cfg.vdd, sc.svm)?;
    let svm_train = t0.elapsed().as_secs_f64();
    let svm = evaluate_step("SVM", &svm_model, (&train_w, &train_t), (&test_w, &test_t), svm_train)?;
    svm_model.set_multiplier(svm.multiplier.0);

    let t0 = Instant::now();
    let mut hdc_model = HdcModel::train_history(&build_history_dataset(&train_w, &train_t, sc.hdc_h, cfg.vdd)?, q, cfg.vdd, sc.hdc)?;
    let hdc_train = t0.elapsed().as_secs_f64();
    let hdc = evaluate_step("HDC", &hdc_model, (&train_w, &train_t), (&test_w, &test_t), hdc_train)?;
    hdc_model.set_multiplier(hdc.multiplier.0);

    Ok(Scenario1Result { test_waveforms: test_w, baseline: test_t, quantizer: q, svm, hdc, svm_model, hdc_model })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario2Config {
    pub segments: usize,
    pub train_circuit: String,
    pub train_runs: usize,
    pub seed: u64,
    pub test_circuit: String,
    pub test_seed: u64,
    pub svr: SvmParams,
    pub mlp: TrainSpec,
    pub lstm: TrainSpec,
    pub lstm_preset: String,
}

impl Default for Scenario2Config {
    fn default() -> Self {
        Scenario2Config {
            segments: 32,
            train_circuit: "adder8".into(),
            train_runs: 8,
            seed: 11,
            test_circuit: "mac32".into(),
            test_seed: 2001,
            svr: SvmParams::svr(),
            mlp: TrainSpec::mlp(),
            lstm: TrainSpec::lstm(),
            lstm_preset: "lstm-eol".into(),
        }
    }
}

/// Trained final-ΔVth regressors.
#[derive(Debug, Clone)]
pub struct EolModels {
    pub vdd: f64,
    pub svr: SvrModel,
    pub mlp: MlpModel,
    pub lstm: LstmSeq2Seq,
    /// Training wall time per model, seconds.
    pub train_seconds: [f64; 3],
}

impl EolModels {
    pub const NAMES: [&'static str; 3] = ["LSTM", "SVR", "MLP"];

    pub fn train(wfs: &[Waveform], traces: &[Trace], sc: &Scenario2Config, vdd: f64) -> Result<Self> {
        let ds = build_eol_dataset(wfs, traces)?;
        let x: Vec<Vec<f64>> = ds.iter().map(|s| s.features(vdd)).collect();
        let y: Vec<f64> = ds.iter().map(|s| s.label_mv).collect();
        let t0 = Instant::now();
        let svr = train_svr(&x, &y, sc.svr)?;
        let t1 = Instant::now();
        let mlp = train_mlp(&x, &y, Loss::Mse, &sc.mlp)?;
        let t2 = Instant::now();
        let cfg = LstmConfig::preset(&sc.lstm_preset)?;
        let inputs: Vec<Vec<f64>> = wfs.iter().map(|w| sequence_input(w, vdd, cfg.reverse)).collect();
        let targets: Vec<Vec<f64>> = traces.iter().map(|t| t.dvt.clone()).collect();
        let lstm = train_lstm(&inputs, &targets, cfg, &sc.lstm)?;
        let t3 = Instant::now();
        Ok(EolModels {
            vdd,
            svr,
            mlp,
            lstm,
            train_seconds: [(t3 - t2).as_secs_f64(), (t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64()],
        })
    }

    /// Predicted final ΔVth per waveform, one list per model in [`Self::NAMES`] order.
    pub fn predict(&self, wfs: &[Waveform]) -> Vec<(String, Vec<f64>)> {
        let x: Vec<Vec<f64>> = wfs.iter().map(|w| w.segments.iter().map(|v| v / self.vdd).collect()).collect();
        vec![
            ("LSTM".into(), wfs.iter().map(|w| self.lstm.predict_last(w, self.vdd)).collect()),
            ("SVR".into(), x.iter().map(|r| self.svr.predict(r)).collect()),
            ("MLP".into(), x.iter().map(|r| self.mlp.predict(r)).collect()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Scenario2Result {
    pub models: EolModels,
    pub test_waveforms: Vec<Waveform>,
    pub predictions: Vec<(String, Vec<f64>)>,
    pub report: EolReport,
}

impl Scenario2Result {
    /// Model with the highest r² (ties: first).
    pub fn best(&self) -> &crate::predictor::ModelEol {
        self.report
            .models
            .iter()
            .reduce(|a, b| if b.r2.unwrap_or(f64::NEG_INFINITY) > a.r2.unwrap_or(f64::NEG_INFINITY) { b } else { a })
            .expect("three models")
    }
}

/// Trains on the training circuit's EOL dataset and reports on the test circuit.
pub fn scenario2(sc: &Scenario2Config, cfg: &RunConfig, oracle: &AgingOracle, dm: &DelayModel) -> Result<Scenario2Result> {
    cfg.validate_for_len(sc.segments)?;
    let (train_w, train_t) = corpus(&builtin(&sc.train_circuit)?, sc.train_runs, sc.segments, sc.seed, cfg, oracle)?;
    let models = EolModels::train(&train_w, &train_t, sc, cfg.vdd)?;
    let test_nl = builtin(&sc.test_circuit)?;
    let (test_w, _) = corpus(&test_nl, 1, sc.segments, sc.test_seed, cfg, oracle)?;
    let predictions = models.predict(&test_w);
    let report = EolReport::build(&test_nl, &test_w, oracle, &predictions, cfg, dm)?;
    Ok(Scenario2Result { models, test_waveforms: test_w, predictions, report })
}

/// Writes every data artifact of both scenarios below `dir`. Timing never
/// enters these files, so equal seeds give byte-identical outputs.
pub fn write_pipeline(
    dir: &Path,
    s1: &Scenario1Config,
    s2: &Scenario2Config,
    cfg: &RunConfig,
    oracle: &AgingOracle,
    dm: &DelayModel,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let r1 = scenario1(s1, cfg, oracle)?;
    save_waveforms(dir.join("s1_test_waveforms.csv"), &r1.test_waveforms)?;
    save_traces(dir.join("s1_baseline.csv"), &r1.baseline)?;
    save_traces(dir.join("s1_svm_traces.csv"), &r1.svm.recursive)?;
    save_traces(dir.join("s1_hdc_traces.csv"), &r1.hdc.recursive)?;
    r1.svm_model.save(dir.join("s1_svm.model"))?;
    r1.hdc_model.save(dir.join("s1_hdc.model"))?;

    let r2 = scenario2(s2, cfg, oracle, dm)?;
    save_waveforms(dir.join("s2_test_waveforms.csv"), &r2.test_waveforms)?;
    r2.models.svr.save(dir.join("s2_svr.model"))?;
    r2.models.mlp.save(dir.join("s2_mlp.weights"))?;
    r2.models.lstm.save(dir.join("s2_lstm.weights"))?;
    r2.report.write_csv(std::fs::File::create(dir.join("s2_eol.csv"))?)?;
    r2.report.write_delay_csv(std::fs::File::create(dir.join("s2_delay.csv"))?)?;
    std::fs::write(dir.join("s2_table.txt"), r2.report.text_table())?;
    let base: Vec<f64> = r2.report.models[0].rows.iter().map(|r| r.baseline_last_mv).collect();
    let best = r2.best();
    let preds: Vec<f64> = best.rows.iter().map(|r| r.pred_last_mv).collect();
    error_analysis(&preds, &base, &r2.test_waveforms, cfg.vdd)?
        .write_csv(std::fs::File::create(dir.join("s2_error_analysis.csv"))?)?;
    Ok(())
}

/// Any saved surrogate, recognised from its file header.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Hdc(HdcModel),
    Svm(SvmStepModel),
    Svr(SvrModel),
    Mlp(MlpModel),
    Lstm(LstmSeq2Seq),
}

impl AnyModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        let r = bytes.as_slice();
        if bytes.starts_with(b"AGHD") {
            HdcModel::read_from(r).map(AnyModel::Hdc)
        } else if bytes.starts_with(b"AGSVM") {
            match SvrModel::read_from(r) {
                Ok(m) => Ok(AnyModel::Svr(m)),
                Err(_) => SvmStepModel::from_svm(crate::svm::SvmModel::read_from(r)?).map(AnyModel::Svm),
            }
        } else if bytes.starts_with(b"AGNN") {
            match MlpModel::read_from(r) {
                Ok(m) => Ok(AnyModel::Mlp(m)),
                Err(_) => LstmSeq2Seq::read_from(r).map(AnyModel::Lstm),
            }
        } else {
            Err(Error::schema(format!("{} is not a model file", path.as_ref().display())))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            AnyModel::Hdc(m) => m.save(path),
            AnyModel::Svm(m) => m.save(path),
            AnyModel::Svr(m) => m.save(path),
            AnyModel::Mlp(m) => m.save(path),
            AnyModel::Lstm(m) => m.save(path),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Hdc(_) => "hdc",
            AnyModel::Svm(_) => "svm",
            AnyModel::Svr(_) => "svr",
            AnyModel::Mlp(_) => "mlp",
            AnyModel::Lstm(_) => "lstm",
        }
    }

    fn step(&self) -> Option<(&dyn StepModel, f64)> {
        match self {
            AnyModel::Hdc(m) if matches!(m.task(), crate::hdc::HdcTask::History { .. }) => Some((m, m.multiplier())),
            AnyModel::Svm(m) => Some((m, m.multiplier())),
            _ => None,
        }
    }

    /// Whole-trace prediction: recursive for step models, seq2seq for the LSTM.
    pub fn predict_trace(&self, w: &Waveform, vdd: f64) -> Result<Trace> {
        if let Some((m, mult)) = self.step() {
            return crate::predictor::predict_trace_recursive(m, w, m.history(), BiasMultiplier(mult));
        }
        match self {
            AnyModel::Lstm(m) => Ok(m.predict_trace(w, vdd)),
            _ => Err(Error::invalid(format!("a {} model predicts final values only", self.kind()))),
        }
    }

    /// Final ΔVth (mV) of a waveform.
    pub fn predict_last(&self, w: &Waveform, vdd: f64) -> Result<f64> {
        let x = || w.segments.iter().map(|v| v / vdd).collect::<Vec<f64>>();
        let expect_len = |n: usize| {
            if w.len() == n {
                Ok(())
            } else {
                Err(Error::LengthMismatch {
                    id: w.transistor_id.clone(),
                    detail: format!("{} segments, model expects {n}", w.len()),
                })
            }
        };
        match self {
            AnyModel::Svr(m) => {
                expect_len(m.n_features())?;
                Ok(m.predict(&x()))
            }
            AnyModel::Mlp(m) => {
                expect_len(m.n_inputs())?;
                Ok(m.predict(&x()))
            }
            AnyModel::Lstm(m) => Ok(m.predict_last(w, vdd)),
            AnyModel::Hdc(m) if matches!(m.task(), crate::hdc::HdcTask::Eol { .. }) => {
                let sample = crate::dataset::EolSample {
                    transistor_id: w.transistor_id.clone(),
                    voltages: w.segments.clone(),
                    label_mv: 0.0,
                };
                if let crate::hdc::HdcTask::Eol { len } = m.task() {
                    expect_len(len)?;
                }
                Ok(m.predict_eol_mv(&sample))
            }
            _ => Ok(self.predict_trace(w, vdd)?.last()),
        }
    }
}
