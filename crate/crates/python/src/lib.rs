//! Python bindings: waveforms, traces, the aging oracle, built-in circuits,
//! surrogate training/inference and the end-of-life delay report.

use agekit_core::circuit::{self, Netlist, StimulusPlan};
use agekit_core::dataset::{build_eol_dataset, build_history_dataset, sequence_input};
use agekit_core::hdc::{HdcModel, HdcParams};
use agekit_core::io;
use agekit_core::nn::{train_lstm, train_mlp, Loss, LstmConfig, TrainSpec};
use agekit_core::oracle::{AgingOracle, OracleParams};
use agekit_core::pipeline::AnyModel;
use agekit_core::predictor::{fit_multiplier, summarize_re, DelayModel, EolReport, StepModel, SvmStepModel};
use agekit_core::svm::{train_svr, SvmParams};
use agekit_core::{Error, QuantizerSpec, RunConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(agekit, SchemaError, PyException);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io(_) => PyIOError::new_err(msg),
        Error::Schema(_) | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => SchemaError::new_err(msg),
        Error::NonFinite(_) | Error::OracleDiverged | Error::Training(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait Lift<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> Lift<T> for agekit_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Waveform", module = "agekit", from_py_object)]
#[derive(Clone)]
struct PyWaveform(agekit_core::Waveform);

#[pymethods]
impl PyWaveform {
    #[new]
    #[pyo3(signature = (transistor_id, segments, segment_duration = 1e-3))]
    fn new(transistor_id: String, segments: Vec<f64>, segment_duration: f64) -> PyResult<Self> {
        agekit_core::Waveform::new(transistor_id, segment_duration, segments).py().map(Self)
    }

    #[getter]
    fn transistor_id(&self) -> String {
        self.0.transistor_id.clone()
    }

    #[getter]
    fn segments(&self) -> Vec<f64> {
        self.0.segments.clone()
    }

    #[getter]
    fn segment_duration(&self) -> f64 {
        self.0.segment_duration
    }

    #[pyo3(signature = (vdd = 0.7))]
    fn duty_cycle(&self, vdd: f64) -> PyResult<f64> {
        self.0.duty_cycle(vdd).py()
    }

    fn transitions(&self) -> usize {
        self.0.transition_count()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Waveform('{}', {} segments)", self.0.transistor_id, self.0.len())
    }
}

#[pyclass(name = "Trace", module = "agekit", from_py_object)]
#[derive(Clone)]
struct PyTrace(agekit_core::Trace);

#[pymethods]
impl PyTrace {
    #[new]
    fn new(transistor_id: String, dvt: Vec<f64>) -> Self {
        Self(agekit_core::Trace::new(transistor_id, dvt))
    }

    #[getter]
    fn transistor_id(&self) -> String {
        self.0.transistor_id.clone()
    }

    /// Cumulative threshold shift in mV, one value per segment.
    #[getter]
    fn dvt(&self) -> Vec<f64> {
        self.0.dvt.clone()
    }

    fn last(&self) -> f64 {
        self.0.last()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace('{}', last={:.3} mV)", self.0.transistor_id, self.0.last())
    }
}

fn unwrap_wfs(wfs: &[PyWaveform]) -> Vec<agekit_core::Waveform> {
    wfs.iter().map(|w| w.0.clone()).collect()
}

fn unwrap_traces(ts: &[PyTrace]) -> Vec<agekit_core::Trace> {
    ts.iter().map(|t| t.0.clone()).collect()
}

#[pyclass(name = "Oracle", module = "agekit")]
struct PyOracle(AgingOracle);

#[pymethods]
impl PyOracle {
    #[new]
    #[pyo3(signature = (vdd = 0.7, substeps = None))]
    fn new(vdd: f64, substeps: Option<usize>) -> PyResult<Self> {
        let mut p = OracleParams::default();
        if let Some(s) = substeps {
            p = p.with_substeps(s).py()?;
        }
        AgingOracle::new(p, vdd).py().map(Self)
    }

    #[getter]
    fn vdd(&self) -> f64 {
        self.0.vdd()
    }

    fn run(&self, waveform: &PyWaveform) -> PyResult<PyTrace> {
        self.0.run_trace(&waveform.0).py().map(PyTrace)
    }

    fn run_all(&self, waveforms: Vec<PyWaveform>) -> PyResult<Vec<PyTrace>> {
        let t = self.0.run_all(&unwrap_wfs(&waveforms)).py()?;
        Ok(t.into_iter().map(PyTrace).collect())
    }

    fn worst_case(&self, waveform: &PyWaveform) -> PyResult<PyTrace> {
        self.0.worst_case_trace(&waveform.0).py().map(PyTrace)
    }
}

#[pyclass(name = "Netlist", module = "agekit")]
struct PyNetlist(Netlist);

#[pymethods]
impl PyNetlist {
    /// One of `stdcells`, `adder8`, `mac32`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        circuit::builtin(name).py().map(Self)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Netlist::load_json(path).py().map(Self)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save_json(path).py()
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.0.primary_inputs().to_vec()
    }

    #[getter]
    fn outputs(&self) -> Vec<String> {
        self.0.primary_outputs().to_vec()
    }

    fn device_ids(&self) -> Vec<String> {
        self.0.devices().iter().map(|d| d.id.clone()).collect()
    }

    fn evaluate(&self, inputs: Vec<bool>) -> PyResult<Vec<bool>> {
        self.0.evaluate(&inputs).py()
    }

    /// Random stimulus, one waveform per PMOS device.
    #[pyo3(signature = (segments = 32, seed = 0, vdd = 0.7))]
    fn simulate(&self, segments: usize, seed: u64, vdd: f64) -> PyResult<Vec<PyWaveform>> {
        let cfg = RunConfig { vdd, rng_seed: seed, ..RunConfig::default() };
        cfg.validate().py()?;
        let plan = StimulusPlan::new(segments, seed).py()?;
        let w = circuit::simulate(&self.0, &plan, &cfg).py()?;
        Ok(w.into_iter().map(PyWaveform).collect())
    }
}

#[pyclass(name = "Model", module = "agekit")]
struct PyModel(AnyModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        AnyModel::load(path).py().map(Self)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).py()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    #[pyo3(signature = (waveform, vdd = 0.7))]
    fn predict_trace(&self, waveform: &PyWaveform, vdd: f64) -> PyResult<PyTrace> {
        self.0.predict_trace(&waveform.0, vdd).py().map(PyTrace)
    }

    #[pyo3(signature = (waveform, vdd = 0.7))]
    fn predict_last(&self, waveform: &PyWaveform, vdd: f64) -> PyResult<f64> {
        self.0.predict_last(&waveform.0, vdd).py()
    }

    fn __repr__(&self) -> String {
        format!("Model(kind='{}')", self.0.kind())
    }
}

fn step_model(
    kind: &str,
    wfs: &[agekit_core::Waveform],
    traces: &[agekit_core::Trace],
    h: usize,
    n_bins: usize,
    vdd: f64,
    dim: usize,
    epochs: Option<usize>,
    seed: u64,
) -> agekit_core::Result<AnyModel> {
    let q = QuantizerSpec::from_traces(traces, n_bins)?;
    let ds = build_history_dataset(wfs, traces, h, vdd)?;
    let mut model = match kind {
        "svm" => AnyModel::Svm(SvmStepModel::train(&ds, q, vdd, SvmParams::svc())?),
        _ => {
            let d = HdcParams::default();
            let p = HdcParams { dim, epochs: epochs.unwrap_or(d.epochs), seed, ..d };
            AnyModel::Hdc(HdcModel::train_history(&ds, q, vdd, p)?)
        }
    };
    let m = {
        let step: &dyn StepModel = match &model {
            AnyModel::Svm(m) => m,
            AnyModel::Hdc(m) => m,
            _ => unreachable!(),
        };
        fit_multiplier(step, wfs, traces)?
    };
    match &mut model {
        AnyModel::Svm(s) => s.set_multiplier(m.0),
        AnyModel::Hdc(s) => s.set_multiplier(m.0),
        _ => unreachable!(),
    }
    Ok(model)
}

/// Trains a surrogate on oracle traces.
///
/// `kind` is `svm` or `hdc` (recursive per-segment classifiers) or `svr`,
/// `mlp`, `lstm` (last-segment regressors; `lstm` also predicts whole traces).
#[pyfunction]
#[pyo3(signature = (kind, waveforms, traces, vdd = 0.7, h = 8, n_bins = 64, dim = 10000, epochs = None, seed = 0, preset = "lstm-eol"))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    kind: &str,
    waveforms: Vec<PyWaveform>,
    traces: Vec<PyTrace>,
    vdd: f64,
    h: usize,
    n_bins: usize,
    dim: usize,
    epochs: Option<usize>,
    seed: u64,
    preset: &str,
) -> PyResult<PyModel> {
    let wfs = unwrap_wfs(&waveforms);
    let ts = unwrap_traces(&traces);
    let kind = kind.to_ascii_lowercase();
    let preset = preset.to_string();
    let model = py.detach(move || -> agekit_core::Result<AnyModel> {
        match kind.as_str() {
            "svm" | "hdc" => step_model(&kind, &wfs, &ts, h, n_bins, vdd, dim, epochs, seed),
            "svr" | "mlp" => {
                let ds = build_eol_dataset(&wfs, &ts)?;
                let x: Vec<Vec<f64>> = ds.iter().map(|s| s.features(vdd)).collect();
                let y: Vec<f64> = ds.iter().map(|s| s.label_mv).collect();
                if kind == "svr" {
                    Ok(AnyModel::Svr(train_svr(&x, &y, SvmParams::svr())?))
                } else {
                    let d = TrainSpec::mlp();
                    let spec = TrainSpec { epochs: epochs.unwrap_or(d.epochs), rng_seed: seed, ..d };
                    Ok(AnyModel::Mlp(train_mlp(&x, &y, Loss::Mse, &spec)?))
                }
            }
            "lstm" => {
                let cfg = LstmConfig::preset(&preset)?;
                let d = TrainSpec::lstm();
                let spec = TrainSpec { epochs: epochs.unwrap_or(d.epochs), rng_seed: seed, ..d };
                let inputs: Vec<Vec<f64>> = wfs.iter().map(|w| sequence_input(w, vdd, cfg.reverse)).collect();
                let targets: Vec<Vec<f64>> = ts.iter().map(|t| t.dvt.clone()).collect();
                Ok(AnyModel::Lstm(train_lstm(&inputs, &targets, cfg, &spec)?))
            }
            other => Err(Error::InvalidInput(format!("unknown model kind '{other}'"))),
        }
    });
    model.py().map(PyModel)
}

/// Relative-error summary of predicted against baseline traces, paired by position.
#[pyfunction]
fn relative_error<'py>(py: Python<'py>, predicted: Vec<PyTrace>, baseline: Vec<PyTrace>) -> PyResult<Bound<'py, PyDict>> {
    if predicted.len() != baseline.len() {
        return Err(PyValueError::new_err("predicted and baseline lengths differ"));
    }
    let s = summarize_re(predicted.iter().map(|p| &p.0).zip(baseline.iter().map(|b| &b.0))).py()?;
    let d = PyDict::new(py);
    d.set_item("n", s.n)?;
    d.set_item("excluded", s.excluded)?;
    d.set_item("mean_abs_final", s.mean_abs_final)?;
    d.set_item("mean_signed_final", s.mean_signed_final)?;
    d.set_item("mean_abs_per_segment", s.mean_abs_per_segment.clone())?;
    d.set_item("growth_spearman", s.growth_correlation().ok())?;
    Ok(d)
}

/// End-of-life delay table comparing the oracle baseline, each model and the worst case.
///
/// `models` maps a display name to a loaded model whose last-segment
/// prediction is extrapolated to end of life.
#[pyfunction]
#[pyo3(signature = (netlist, waveforms, models, vdd = 0.7))]
fn eol_report(netlist: &PyNetlist, waveforms: Vec<PyWaveform>, models: Vec<(String, PyRef<'_, PyModel>)>, vdd: f64) -> PyResult<String> {
    let wfs = unwrap_wfs(&waveforms);
    let cfg = RunConfig { vdd, ..RunConfig::default() };
    let oracle = AgingOracle::new(OracleParams::default(), vdd).py()?;
    let mut preds = Vec::with_capacity(models.len());
    for (name, m) in &models {
        let p = wfs.iter().map(|w| m.0.predict_last(w, vdd)).collect::<agekit_core::Result<Vec<_>>>().py()?;
        preds.push((name.clone(), p));
    }
    let report = EolReport::build(&netlist.0, &wfs, &oracle, &preds, &cfg, &DelayModel::default()).py()?;
    Ok(report.text_table())
}

#[pyfunction]
fn load_waveforms(path: &str) -> PyResult<Vec<PyWaveform>> {
    Ok(io::load_waveforms(path).py()?.into_iter().map(PyWaveform).collect())
}

#[pyfunction]
fn save_waveforms(path: &str, waveforms: Vec<PyWaveform>) -> PyResult<()> {
    io::save_waveforms(path, &unwrap_wfs(&waveforms)).py()
}

#[pyfunction]
fn load_traces(path: &str) -> PyResult<Vec<PyTrace>> {
    Ok(io::load_traces(path).py()?.into_iter().map(PyTrace).collect())
}

#[pyfunction]
fn save_traces(path: &str, traces: Vec<PyTrace>) -> PyResult<()> {
    io::save_traces(path, &unwrap_traces(&traces)).py()
}

/// 8-bit ripple-carry add on the gate-level netlist: `(sum, carry)`.
#[pyfunction]
fn adder8(a: u8, b: u8) -> PyResult<(u8, bool)> {
    circuit::run_adder8(&circuit::build_adder8(), a, b).py()
}

/// `acc + w * x` on the gate-level MAC, modulo 2^32.
#[pyfunction]
fn mac32(w: u8, x: u8, acc: u32) -> PyResult<u32> {
    circuit::run_mac32(&circuit::build_mac32(), w, x, acc).py()
}

#[pymodule]
fn agekit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SchemaError", m.py().get_type::<SchemaError>())?;
    m.add_class::<PyWaveform>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyNetlist>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(eol_report, m)?)?;
    m.add_function(wrap_pyfunction!(load_waveforms, m)?)?;
    m.add_function(wrap_pyfunction!(save_waveforms, m)?)?;
    m.add_function(wrap_pyfunction!(load_traces, m)?)?;
    m.add_function(wrap_pyfunction!(save_traces, m)?)?;
    m.add_function(wrap_pyfunction!(adder8, m)?)?;
    m.add_function(wrap_pyfunction!(mac32, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
