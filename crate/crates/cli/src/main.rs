mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use agekit_core::circuit::{builtin, prefix_ids, simulate, Netlist, StimulusPlan};
use agekit_core::dataset::{
    build_eol_dataset, build_history_dataset, split_pairs, write_eol_csv, write_history_csv, SplitSpec,
};
use agekit_core::hdc::{HdcModel, HdcParams, ItemKind};
use agekit_core::io::{load_traces, load_waveforms, save_traces, save_waveforms, KvConfig};
use agekit_core::nn::{train_lstm, train_mlp, Loss, LstmConfig, TrainSpec};
use agekit_core::oracle::{AgingOracle, OracleParams};
use agekit_core::pipeline::{self, AnyModel, Scenario1Config, Scenario2Config};
use agekit_core::predictor::{
    error_analysis, fit_multiplier, predict_trace_recursive, r2_score, summarize_re, BiasMultiplier, DelayModel,
    EolReport, StepModel, SvmStepModel,
};
use agekit_core::svm::{grid_search_svm, grid_search_svr, train_svr, Grid, SvmParams};
use agekit_core::{Error, QuantizerSpec, RunConfig, Trace, Waveform};
use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::Manifest;

/// Transistor aging toolkit: waveforms, oracle traces and ML surrogates.
#[derive(Parser, Debug)]
#[command(name = "agekit", version, about)]
struct Cli {
    /// Run configuration (key = value file with vdd, temperature_c, segment_duration, eol_seconds, rng_seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Oracle parameter file (key = value).
    #[arg(long, global = true)]
    oracle_config: Option<PathBuf>,

    /// Supply voltage override (V).
    #[arg(long, global = true)]
    vdd: Option<f64>,

    /// Seed for all randomness; overrides rng_seed from --config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a netlist under random stimuli and write per-pMOS waveforms.
    Sim(SimArgs),
    /// Run the aging oracle.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Build a training dataset from waveforms and traces.
    Dataset(DatasetArgs),
    /// Train a surrogate model.
    Train(TrainArgs),
    /// Predict traces or final ΔVth values with a trained model.
    Predict(PredictArgs),
    /// End-of-life ΔVth and delay report for a circuit.
    Eol(EolArgs),
    /// Run the scenario pipelines end to end.
    Report(ReportArgs),
    /// Per-trace timing of the oracle against a surrogate.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Built-in netlist (stdcells, adder8, mac32) or a netlist JSON file.
    #[arg(long)]
    netlist: String,
    #[arg(long, default_value_t = 32)]
    segments: usize,
    /// Independent stimulus runs; ids are prefixed r0/, r1/, ... when above 1.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum OracleAction {
    /// Waveforms in, ΔVth traces out.
    Run {
        #[arg(long)]
        waveforms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Integration substeps per segment.
        #[arg(long)]
        substeps: Option<usize>,
        /// Emit the constant-stress worst-case traces instead.
        #[arg(long)]
        worst_case: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum DatasetMode {
    History,
    Eol,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long, value_enum)]
    mode: DatasetMode,
    #[arg(long)]
    waveforms: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    /// History length (history mode).
    #[arg(long, default_value_t = 8)]
    h: usize,
    /// Split by transistor with this training fraction; writes <out>.train.csv and <out>.test.csv.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ModelKind {
    Svm,
    Hdc,
    Svr,
    Mlp,
    Lstm,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    waveforms: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// History length (svm, hdc).
    #[arg(long, default_value_t = 8)]
    h: usize,
    /// ΔVth classes (svm, hdc).
    #[arg(long, default_value_t = agekit_core::model::DEFAULT_BINS)]
    bins: usize,
    /// Hypervector dimension.
    #[arg(long, default_value_t = 10_000)]
    dim: usize,
    /// Training epochs (hdc, mlp, lstm); model default when omitted.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (hdc retraining or Adam).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// SVR tube half-width (mV).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Grid-search C and gamma on a held-out split (svm, svr).
    #[arg(long)]
    grid: bool,
    /// Loss for mlp/lstm: mse or l1.
    #[arg(long)]
    loss: Option<Loss>,
    /// LSTM preset: lstm-trace or lstm-eol.
    #[arg(long, default_value = "lstm-eol")]
    preset: String,
    /// Skip LSTM input reversal.
    #[arg(long)]
    no_reverse: bool,
    /// Item vectors for ordinal symbols: level or random (hdc).
    #[arg(long, default_value = "level")]
    items: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    waveforms: PathBuf,
    /// Trace CSV (full-trace models) or final-value CSV (with --last).
    #[arg(long)]
    out: PathBuf,
    /// Write only final ΔVth values.
    #[arg(long)]
    last: bool,
    /// Oracle traces to score against.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EolArgs {
    /// Built-in netlist or netlist JSON; waveform ids must be its device ids.
    #[arg(long)]
    netlist: String,
    #[arg(long)]
    waveforms: PathBuf,
    /// NAME=PATH, repeatable; column order follows the flags.
    #[arg(long = "model", value_parser = parse_named)]
    models: Vec<(String, PathBuf)>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    vth0: f64,
    #[arg(long, default_value_t = 1.3)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    d0_ps: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ScenarioSel {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    All,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, value_enum, default_value = "all")]
    scenario: ScenarioSel,
    #[arg(long)]
    out_dir: PathBuf,
    /// Small models and few epochs; for smoke runs.
    #[arg(long)]
    quick: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum BenchModel {
    Hdc,
    Svm,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "hdc")]
    model: BenchModel,
    #[arg(long, default_value_t = 10_000)]
    dim: usize,
    #[arg(long, default_value_t = 7)]
    h: usize,
    /// HDC retraining epochs for the benchmark model.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Timing repetitions; the median is reported.
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long, default_value = "adder8")]
    circuit: String,
    /// Use a trained model instead of training one.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got '{s}'"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got '{s}'"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

/// CLI failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) => (3, "io"),
            Error::Schema(_) | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => (4, "schema"),
            Error::EmptyWaveform
            | Error::LengthMismatch { .. }
            | Error::InvalidInput(_)
            | Error::UnconnectedNet(_)
            | Error::Netlist(_) => (5, "invalid"),
            Error::NonFinite(_) | Error::OracleDiverged | Error::Training(_) => (6, "numerical"),
        };
        Failure { code, kind, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

struct Ctx {
    cfg: RunConfig,
    oracle_params: OracleParams,
    seed: u64,
    manifest: Manifest,
}

impl Ctx {
    fn oracle(&self) -> Outcome<AgingOracle> {
        Ok(AgingOracle::new(self.oracle_params.clone(), self.cfg.vdd)?)
    }
}

fn load_netlist(spec: &str) -> Outcome<Netlist> {
    if Path::new(spec).is_file() {
        Ok(Netlist::load_json(spec)?)
    } else {
        Ok(builtin(spec)?)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}: {}", f.code, f.kind, f.msg.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_kv(&KvConfig::load(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.vdd {
        cfg.vdd = v;
    }
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    cfg.validate()?;
    let oracle_params = match &cli.oracle_config {
        Some(p) => OracleParams::from_kv(&KvConfig::load(p)?)?,
        None => OracleParams::default(),
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let manifest = Manifest::new(&args, &cfg, &oracle_params);
    let mut ctx = Ctx { seed: cfg.rng_seed, cfg, oracle_params, manifest };
    match cli.command {
        Command::Sim(a) => sim(&mut ctx, a),
        Command::Oracle { action: OracleAction::Run { waveforms, out, substeps, worst_case } } => {
            oracle_run(&mut ctx, &waveforms, &out, substeps, worst_case)
        }
        Command::Dataset(a) => dataset(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Predict(a) => predict(&mut ctx, a),
        Command::Eol(a) => eol(&mut ctx, a),
        Command::Report(a) => report(&mut ctx, a),
        Command::Bench(a) => bench(&mut ctx, a),
    }
}

fn sim(ctx: &mut Ctx, a: SimArgs) -> Outcome {
    let nl = load_netlist(&a.netlist)?;
    if a.runs == 0 {
        return Err(Error::InvalidInput("--runs must be at least 1".into()).into());
    }
    let mut wfs = Vec::new();
    for k in 0..a.runs {
        let plan = StimulusPlan::new(a.segments, ctx.seed.wrapping_add(k as u64))?;
        let mut w = simulate(&nl, &plan, &ctx.cfg)?;
        if a.runs > 1 {
            prefix_ids(&mut w, &format!("r{k}/"));
        }
        wfs.extend(w);
    }
    save_waveforms(&a.out, &wfs)?;
    println!("{}: {} waveforms x {} segments -> {}", nl.name(), wfs.len(), a.segments, a.out.display());
    ctx.manifest.output(&a.out)?;
    ctx.manifest.write_beside(&a.out)
}

fn oracle_run(ctx: &mut Ctx, waveforms: &Path, out: &Path, substeps: Option<usize>, worst: bool) -> Outcome {
    if let Some(n) = substeps {
        ctx.oracle_params = ctx.oracle_params.clone().with_substeps(n)?;
    }
    let oracle = ctx.oracle()?;
    let wfs = load_waveforms(waveforms)?;
    let t0 = Instant::now();
    let traces = wfs
        .iter()
        .map(|w| if worst { oracle.worst_case_trace(w) } else { oracle.run_trace(w) })
        .collect::<agekit_core::Result<Vec<_>>>()?;
    let dt = t0.elapsed().as_secs_f64();
    save_traces(out, &traces)?;
    println!(
        "{} traces in {:.3} s ({:.1} µs/trace) -> {}",
        traces.len(),
        dt,
        dt * 1e6 / traces.len().max(1) as f64,
        out.display()
    );
    ctx.manifest.input(waveforms)?;
    ctx.manifest.output(out)?;
    ctx.manifest.write_beside(out)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}{ext}"))
}

fn write_dataset(mode: DatasetMode, h: usize, vdd: f64, wfs: &[Waveform], traces: &[Trace], out: &Path) -> Outcome<usize> {
    let f = std::fs::File::create(out)?;
    Ok(match mode {
        DatasetMode::History => {
            let ds = build_history_dataset(wfs, traces, h, vdd)?;
            write_history_csv(f, &ds)?;
            ds.len()
        }
        DatasetMode::Eol => {
            let ds = build_eol_dataset(wfs, traces)?;
            write_eol_csv(f, &ds)?;
            ds.len()
        }
    })
}

fn dataset(ctx: &mut Ctx, a: DatasetArgs) -> Outcome {
    let wfs = load_waveforms(&a.waveforms)?;
    let traces = load_traces(&a.traces)?;
    ctx.manifest.input(&a.waveforms)?;
    ctx.manifest.input(&a.traces)?;
    match a.split {
        None => {
            let n = write_dataset(a.mode, a.h, ctx.cfg.vdd, &wfs, &traces, &a.out)?;
            println!("{n} samples -> {}", a.out.display());
            ctx.manifest.output(&a.out)?;
        }
        Some(frac) => {
            let spec = SplitSpec { train_fraction: frac, rng_seed: ctx.seed };
            let ((trw, trt), (tew, tet)) = split_pairs(&wfs, &traces, &spec)?;
            for (part, w, t) in [("train", &trw, &trt), ("test", &tew, &tet)] {
                let path = with_suffix(&a.out, part);
                let n = write_dataset(a.mode, a.h, ctx.cfg.vdd, w, t, &path)?;
                println!("{part}: {} transistors, {n} samples -> {}", w.len(), path.display());
                ctx.manifest.output(&path)?;
            }
        }
    }
    ctx.manifest.write_beside(&a.out)
}

fn grid_for(a: &TrainArgs) -> Grid {
    let mut g = Grid::default();
    if let Some(c) = a.c {
        g.c = vec![c];
    }
    if let Some(gm) = a.gamma {
        g.gamma = vec![gm];
    }
    g
}

fn train(ctx: &mut Ctx, a: TrainArgs) -> Outcome {
    let wfs = load_waveforms(&a.waveforms)?;
    let traces = load_traces(&a.traces)?;
    ctx.manifest.input(&a.waveforms)?;
    ctx.manifest.input(&a.traces)?;
    let vdd = ctx.cfg.vdd;
    let t0 = Instant::now();
    let model = match a.model {
        ModelKind::Svm | ModelKind::Hdc => {
            let q = QuantizerSpec::from_traces(&traces, a.bins)?;
            let ds = build_history_dataset(&wfs, &traces, a.h, vdd)?;
            let mut model = if a.model == ModelKind::Svm {
                let mut p = SvmParams::svc();
                if a.grid {
                    let scaling = agekit_core::dataset::FeatureScaling::new(vdd, &q);
                    let x: Vec<Vec<f64>> = ds.iter().map(|s| s.features(&scaling)).collect();
                    let y = ds.iter().map(|s| s.class(&q)).collect::<agekit_core::Result<Vec<_>>>()?;
                    let g = grid_search_svm(&x, &y, p, &grid_for(&a), ctx.seed)?;
                    p = g.best;
                    println!("grid search: C = {}, gamma = {} (accuracy {:.4})", p.c, p.gamma, g.best_score);
                } else {
                    p.c = a.c.unwrap_or(p.c);
                    p.gamma = a.gamma.unwrap_or(p.gamma);
                }
                AnyModel::Svm(SvmStepModel::train(&ds, q, vdd, p)?)
            } else {
                let d = HdcParams::default();
                let items = match a.items.as_str() {
                    "level" => ItemKind::Level,
                    "random" => ItemKind::Random,
                    other => return Err(Error::InvalidInput(format!("unknown item kind '{other}'")).into()),
                };
                let params = HdcParams {
                    dim: a.dim,
                    epochs: a.epochs.unwrap_or(d.epochs),
                    learn_rate: a.lr.unwrap_or(d.learn_rate),
                    seed: ctx.seed,
                    ordinal_items: items,
                };
                AnyModel::Hdc(HdcModel::train_history(&ds, q, vdd, params)?)
            };
            let step: &dyn StepModel = match &model {
                AnyModel::Svm(m) => m,
                AnyModel::Hdc(m) => m,
                _ => unreachable!(),
            };
            let mult = fit_multiplier(step, &wfs, &traces)?;
            match &mut model {
                AnyModel::Svm(m) => m.set_multiplier(mult.0),
                AnyModel::Hdc(m) => m.set_multiplier(mult.0),
                _ => unreachable!(),
            }
            println!("bias multiplier {:.4}", mult.0);
            model
        }
        ModelKind::Svr | ModelKind::Mlp => {
            let ds = build_eol_dataset(&wfs, &traces)?;
            let x: Vec<Vec<f64>> = ds.iter().map(|s| s.features(vdd)).collect();
            let y: Vec<f64> = ds.iter().map(|s| s.label_mv).collect();
            if a.model == ModelKind::Svr {
                let mut p = SvmParams::svr();
                p.epsilon = a.epsilon.unwrap_or(p.epsilon);
                if a.grid {
                    let g = grid_search_svr(&x, &y, p, &grid_for(&a), ctx.seed)?;
                    p = g.best;
                    println!("grid search: C = {}, gamma = {} (held-out r² {:.4})", p.c, p.gamma, g.best_score);
                } else {
                    p.c = a.c.unwrap_or(p.c);
                    p.gamma = a.gamma.unwrap_or(p.gamma);
                }
                AnyModel::Svr(train_svr(&x, &y, p)?)
            } else {
                let d = TrainSpec::mlp();
                let spec = TrainSpec {
                    epochs: a.epochs.unwrap_or(d.epochs),
                    learning_rate: a.lr.unwrap_or(d.learning_rate),
                    rng_seed: ctx.seed,
                    ..d
                };
                AnyModel::Mlp(train_mlp(&x, &y, a.loss.unwrap_or(Loss::Mse), &spec)?)
            }
        }
        ModelKind::Lstm => {
            let mut cfg = LstmConfig::preset(&a.preset)?;
            cfg.reverse = !a.no_reverse;
            if let Some(l) = a.loss {
                cfg.loss = l;
            }
            let d = TrainSpec::lstm();
            let spec = TrainSpec {
                epochs: a.epochs.unwrap_or(d.epochs),
                learning_rate: a.lr.unwrap_or(d.learning_rate),
                rng_seed: ctx.seed,
                ..d
            };
            let inputs: Vec<Vec<f64>> =
                wfs.iter().map(|w| agekit_core::dataset::sequence_input(w, vdd, cfg.reverse)).collect();
            let targets: Vec<Vec<f64>> = traces.iter().map(|t| t.dvt.clone()).collect();
            AnyModel::Lstm(train_lstm(&inputs, &targets, cfg, &spec)?)
        }
    };
    let secs = t0.elapsed().as_secs_f64();
    model.save(&a.out)?;
    println!("{} model trained on {} waveforms in {secs:.2} s -> {}", model.kind(), wfs.len(), a.out.display());
    ctx.manifest.output(&a.out)?;
    ctx.manifest.write_beside(&a.out)
}

fn predict(ctx: &mut Ctx, a: PredictArgs) -> Outcome {
    let model = AnyModel::load(&a.model)?;
    let wfs = load_waveforms(&a.waveforms)?;
    ctx.manifest.input(&a.model)?;
    ctx.manifest.input(&a.waveforms)?;
    let vdd = ctx.cfg.vdd;
    let baseline = a.baseline.as_deref().map(load_traces).transpose()?;
    if let Some(b) = &baseline {
        if b.len() != wfs.len() {
            return Err(Error::InvalidInput(format!("{} baseline traces for {} waveforms", b.len(), wfs.len())).into());
        }
    }
    if a.last {
        let lasts = wfs.iter().map(|w| model.predict_last(w, vdd)).collect::<agekit_core::Result<Vec<f64>>>()?;
        let mut out = String::from("transistor_id,pred_last_mv\n");
        for (w, v) in wfs.iter().zip(&lasts) {
            out.push_str(&format!("{},{v}\n", w.transistor_id));
        }
        std::fs::write(&a.out, out)?;
        if let Some(b) = &baseline {
            let base: Vec<f64> = b.iter().map(Trace::last).collect();
            let r2 = r2_score(&lasts, &base)?;
            let res: Vec<f64> = lasts
                .iter()
                .zip(&base)
                .filter_map(|(p, b)| agekit_core::predictor::final_relative_error(*p, *b))
                .collect();
            let mean = res.iter().map(|r| r.abs()).sum::<f64>() / res.len().max(1) as f64;
            println!("r² {r2:.4}, mean |RE_l| {mean:.3} % ({} excluded)", base.len() - res.len());
        }
    } else {
        let traces = wfs.iter().map(|w| model.predict_trace(w, vdd)).collect::<agekit_core::Result<Vec<_>>>()?;
        save_traces(&a.out, &traces)?;
        if let Some(b) = &baseline {
            let s = summarize_re(traces.iter().zip(b))?;
            println!(
                "mean |RE_l| {:.3} %, mean RE_l {:+.3} %, {} excluded",
                s.mean_abs_final, s.mean_signed_final, s.excluded
            );
        }
    }
    println!("{} predictions ({} model) -> {}", wfs.len(), model.kind(), a.out.display());
    ctx.manifest.output(&a.out)?;
    ctx.manifest.write_beside(&a.out)
}

fn eol(ctx: &mut Ctx, a: EolArgs) -> Outcome {
    let nl = load_netlist(&a.netlist)?;
    let wfs = load_waveforms(&a.waveforms)?;
    let dm = DelayModel { vth0: a.vth0, alpha: a.alpha, d0_ps: a.d0_ps };
    ctx.manifest.input(&a.waveforms)?;
    let mut preds = Vec::new();
    for (name, path) in &a.models {
        let m = AnyModel::load(path)?;
        ctx.manifest.input(path)?;
        preds.push((
            name.clone(),
            wfs.iter().map(|w| m.predict_last(w, ctx.cfg.vdd)).collect::<agekit_core::Result<Vec<f64>>>()?,
        ));
    }
    let report = EolReport::build(&nl, &wfs, &ctx.oracle()?, &preds, &ctx.cfg, &dm)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let table = report.text_table();
    print!("{table}");
    let files = write_eol_outputs(&report, &wfs, ctx.cfg.vdd, &a.out_dir)?;
    for f in files {
        ctx.manifest.output(&f)?;
    }
    ctx.manifest.write_in(&a.out_dir)
}

fn write_eol_outputs(report: &EolReport, wfs: &[Waveform], vdd: f64, dir: &Path) -> Outcome<Vec<PathBuf>> {
    let mut files = vec![dir.join("eol.csv"), dir.join("delay.csv"), dir.join("table.txt")];
    report.write_csv(std::fs::File::create(&files[0])?)?;
    report.write_delay_csv(std::fs::File::create(&files[1])?)?;
    std::fs::write(&files[2], report.text_table())?;
    for m in &report.models {
        let preds: Vec<f64> = m.rows.iter().map(|r| r.pred_last_mv).collect();
        let base: Vec<f64> = m.rows.iter().map(|r| r.baseline_last_mv).collect();
        let ea = error_analysis(&preds, &base, wfs, vdd)?;
        let path = dir.join(format!("error_analysis_{}.csv", m.name.to_lowercase()));
        ea.write_csv(std::fs::File::create(&path)?)?;
        if let (Some(lo), Some(rest)) = (ea.low_duty_mean_mv, ea.rest_mean_mv) {
            println!("{}: mean signed error {lo:+.3} mV at duty < 0.2, {rest:+.3} mV otherwise", m.name);
        }
        files.push(path);
    }
    Ok(files)
}

fn report(ctx: &mut Ctx, a: ReportArgs) -> Outcome {
    let oracle = ctx.oracle()?;
    let dm = DelayModel::default();
    std::fs::create_dir_all(&a.out_dir)?;
    let mut s1 = Scenario1Config { seed: ctx.seed, test_seed: ctx.seed.wrapping_add(1000), ..Default::default() };
    let mut s2 = Scenario2Config { seed: ctx.seed.wrapping_add(10), test_seed: ctx.seed.wrapping_add(2000), ..Default::default() };
    if a.quick {
        s1.train_runs = 1;
        s1.hdc = HdcParams { dim: 2000, epochs: 5, seed: ctx.seed, ..HdcParams::default() };
        s2.train_runs = 2;
        s2.mlp.epochs = 20;
        s2.lstm.epochs = 5;
    } else {
        s1.hdc.seed = ctx.seed;
    }
    s2.mlp.rng_seed = ctx.seed;
    s2.lstm.rng_seed = ctx.seed;
    let mut summary = String::new();
    if a.scenario != ScenarioSel::Two {
        let r = pipeline::scenario1(&s1, &ctx.cfg, &oracle)?;
        save_traces(a.out_dir.join("s1_baseline.csv"), &r.baseline)?;
        save_traces(a.out_dir.join("s1_svm_traces.csv"), &r.svm.recursive)?;
        save_traces(a.out_dir.join("s1_hdc_traces.csv"), &r.hdc.recursive)?;
        for name in ["s1_baseline.csv", "s1_svm_traces.csv", "s1_hdc_traces.csv"] {
            ctx.manifest.output(&a.out_dir.join(name))?;
        }
        summary.push_str(&format!("Scenario 1: std cells -> {}\n", s1.test_circuit));
        for s in [&r.svm, &r.hdc] {
            summary.push_str(&format!(
                "  {:<4} multiplier {:.4}  mean |RE_l| {:6.2} %  teacher-forced {:6.2} %  growth Spearman {:.3}\n",
                s.name,
                s.multiplier.0,
                s.summary.mean_abs_final,
                s.teacher_summary.mean_abs_final,
                s.summary.growth_correlation()?
            ));
        }
    }
    if a.scenario != ScenarioSel::One {
        let r = pipeline::scenario2(&s2, &ctx.cfg, &oracle, &dm)?;
        summary.push_str(&format!("Scenario 2: {} -> {}\n", s2.train_circuit, s2.test_circuit));
        summary.push_str(&r.report.text_table());
        for f in write_eol_outputs(&r.report, &r.test_waveforms, ctx.cfg.vdd, &a.out_dir)? {
            ctx.manifest.output(&f)?;
        }
    }
    print!("{summary}");
    let path = a.out_dir.join("summary.txt");
    std::fs::write(&path, &summary)?;
    ctx.manifest.output(&path)?;
    ctx.manifest.write_in(&a.out_dir)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn bench(ctx: &mut Ctx, a: BenchArgs) -> Outcome {
    if a.runs == 0 {
        return Err(Error::InvalidInput("--runs must be positive".into()).into());
    }
    let oracle = AgingOracle::new(ctx.oracle_params.clone().with_substeps(100)?, ctx.cfg.vdd)?;
    let vdd = ctx.cfg.vdd;
    let mut rows: Vec<(String, f64)> = Vec::new();
    let (model, train_secs): (Box<dyn StepModel>, Option<f64>) = match &a.model_file {
        Some(p) => match AnyModel::load(p)? {
            AnyModel::Hdc(m) => (Box::new(m), None),
            AnyModel::Svm(m) => (Box::new(m), None),
            other => {
                return Err(Error::InvalidInput(format!("bench needs an svm or hdc model, got {}", other.kind())).into())
            }
        },
        None => {
            let (wfs, traces) = pipeline::corpus(&builtin("stdcells")?, 1, 32, ctx.seed, &ctx.cfg, &oracle)?;
            let q = QuantizerSpec::from_traces(&traces, agekit_core::model::DEFAULT_BINS)?;
            let ds = build_history_dataset(&wfs, &traces, a.h, vdd)?;
            let t0 = Instant::now();
            let m: Box<dyn StepModel> = match a.model {
                BenchModel::Hdc => Box::new(HdcModel::train_history(
                    &ds,
                    q,
                    vdd,
                    HdcParams { dim: a.dim, epochs: a.epochs, seed: ctx.seed, ..HdcParams::default() },
                )?),
                BenchModel::Svm => Box::new(SvmStepModel::train(&ds, q, vdd, SvmParams::svc())?),
            };
            (m, Some(t0.elapsed().as_secs_f64()))
        }
    };
    let (wfs, _) = pipeline::corpus(&load_netlist(&a.circuit)?, 1, 32, ctx.seed.wrapping_add(1), &ctx.cfg, &oracle)?;
    let n = wfs.len() as f64;
    let mut t_oracle = Vec::with_capacity(a.runs);
    let mut t_model = Vec::with_capacity(a.runs);
    for _ in 0..a.runs {
        let t0 = Instant::now();
        for w in &wfs {
            std::hint::black_box(oracle.run_trace(w)?);
        }
        t_oracle.push(t0.elapsed().as_secs_f64() / n);
        let t0 = Instant::now();
        for w in &wfs {
            std::hint::black_box(predict_trace_recursive(model.as_ref(), w, model.history(), BiasMultiplier(1.0))?);
        }
        t_model.push(t0.elapsed().as_secs_f64() / n);
    }
    let (o, m) = (median(t_oracle), median(t_model));
    let label = match a.model {
        _ if a.model_file.is_some() => "surrogate".to_string(),
        BenchModel::Hdc => format!("HDC (D = {})", a.dim),
        BenchModel::Svm => "SVM".to_string(),
    };
    rows.push(("oracle (100 substeps) inference".into(), o * 1e3));
    rows.push((format!("{label} inference"), m * 1e3));
    let mut table = format!(
        "Execution times for {} ({} traces, median of {} runs, single thread)\n",
        a.circuit,
        wfs.len(),
        a.runs
    );
    table.push_str(&format!("{:<40} {:>14}\n", "stage", "ms/trace"));
    for (k, v) in &rows {
        table.push_str(&format!("{k:<40} {v:>14.4}\n"));
    }
    if let Some(t) = train_secs {
        table.push_str(&format!("{:<40} {:>14.2} s total\n", format!("{label} training"), t));
    }
    table.push_str(&format!("{:<40} {:>14.3}x\n", "speedup (oracle / surrogate)", o / m));
    print!("{table}");
    if let Some(out) = &a.out {
        std::fs::write(out, &table)?;
        ctx.manifest.output(out)?;
        ctx.manifest.write_beside(out)?;
    }
    Ok(())
}
