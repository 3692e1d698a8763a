//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p agekit-core --test acceptance -- --nocapture`.

use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use agekit_core::circuit::{builtin, run_adder8, run_mac32, simulate, StimulusPlan};
use agekit_core::dataset::build_history_dataset;
use agekit_core::hdc::{HdcModel, HdcParams};
use agekit_core::io::write_waveforms;
use agekit_core::nn::{grad_rel_err, Loss, LstmConfig, LstmSeq2Seq, MlpModel, TrainSpec};
use agekit_core::oracle::{AgingOracle, OracleParams};
use agekit_core::pipeline::{corpus, scenario1, scenario2, write_pipeline, Scenario1Config, Scenario2Config, Scenario2Result};
use agekit_core::predictor::{predict_trace_recursive, BiasMultiplier, DelayModel, EolReport};
use agekit_core::svm::{rbf, train_svm, SvmParams};
use agekit_core::{QuantizerSpec, RunConfig, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VDD: f64 = 0.7;

/// Criteria run one at a time so wall-clock budgets are not shared.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, ok: bool, detail: impl AsRef<str>, elapsed: Duration) {
    println!(
        "criterion {n}: {} ({}; {:.1} s)",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref(),
        elapsed.as_secs_f64()
    );
}

fn random_waveform(rng: &mut ChaCha8Rng, l: usize) -> Waveform {
    // mostly digital, with some intermediate levels
    let v = (0..l)
        .map(|_| match rng.gen_range(0..10) {
            0..=3 => 0.0,
            4..=7 => VDD,
            _ => rng.gen_range(0.0..VDD),
        })
        .collect();
    Waveform::new("w", 1e-3, v).unwrap()
}

#[test]
fn criterion_1_oracle_physics() {
    let _serial = serial();
    let t0 = Instant::now();
    let oracle = AgingOracle::with_defaults(VDD);
    let fine = AgingOracle::new(OracleParams::default().with_substeps(200).unwrap(), VDD).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for k in 0..1000 {
        let w = random_waveform(&mut rng, 32);
        let (t, state) = oracle.run_with_state(&w).unwrap();
        if !state.occupancies.iter().all(|th| (0.0..=1.0).contains(th)) || t.dvt.iter().any(|&d| d < 0.0) {
            failures.push(format!("{k}: occupancy"));
        }
        let mut longer = w.segments.clone();
        longer.push(VDD);
        let rec = oracle.run_trace(&Waveform::new("w", 1e-3, longer).unwrap()).unwrap();
        if rec.last() > t.last() + 1e-9 {
            failures.push(format!("{k}: recovery"));
        }
        // lowering any voltage adds stress
        let lowered: Vec<f64> = w.segments.iter().map(|&v| if rng.gen_bool(0.3) { v * rng.gen::<f64>() } else { v }).collect();
        let more = oracle.run_trace(&Waveform::new("w", 1e-3, lowered).unwrap()).unwrap();
        if more.last() < t.last() - 1e-9 {
            failures.push(format!("{k}: stress dominance"));
        }
        if oracle.worst_case_trace(&w).unwrap().last() < t.last() {
            failures.push(format!("{k}: worst-case dominance"));
        }
        let f = fine.run_trace(&w).unwrap();
        let worst_rel = t
            .dvt
            .iter()
            .zip(&f.dvt)
            .filter(|(_, b)| **b > 0.0)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        if worst_rel >= 0.005 {
            failures.push(format!("{k}: substep change {:.3} %", worst_rel * 100.0));
        }
    }
    let elapsed = t0.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(60);
    verdict(1, ok, format!("{} of 1000 waveforms failed", failures.len()), elapsed);
    assert!(ok, "{:?}", &failures[..failures.len().min(10)]);
}

#[test]
fn criterion_2_circuit_function() {
    let _serial = serial();
    let t0 = Instant::now();
    let adder = builtin("adder8").unwrap();
    let mac = builtin("mac32").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut bad = 0;
    for _ in 0..1000 {
        let (a, b): (u8, u8) = (rng.gen(), rng.gen());
        let (s, c) = run_adder8(&adder, a, b).unwrap();
        if u16::from(s) + (u16::from(c) << 8) != u16::from(a) + u16::from(b) {
            bad += 1;
        }
        let (w, x, acc): (u8, u8, u32) = (rng.gen(), rng.gen(), rng.gen());
        if run_mac32(&mac, w, x, acc).unwrap() != (u32::from(w) * u32::from(x)).wrapping_add(acc) {
            bad += 1;
        }
    }
    let cfg = RunConfig::default();
    let bytes = |seed| {
        let mut out = Vec::new();
        write_waveforms(&mut out, &simulate(&mac, &StimulusPlan::new(32, seed).unwrap(), &cfg).unwrap()).unwrap();
        out
    };
    let deterministic = bytes(7) == bytes(7) && bytes(7) != bytes(8);
    let elapsed = t0.elapsed();
    let ok = bad == 0 && deterministic && elapsed < Duration::from_secs(60);
    verdict(2, ok, format!("{bad} functional mismatches, deterministic {deterministic}"), elapsed);
    assert!(ok);
}

/// Central-difference check on `n` random coordinates; returns the worst relative error.
fn check_grads(
    params: &mut [agekit_core::nn::Param],
    grads: &[agekit_core::nn::Param],
    loss: &dyn Fn(&[agekit_core::nn::Param]) -> f64,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let t = rng.gen_range(0..params.len());
        let k = rng.gen_range(0..params[t].data.len());
        let orig = params[t].data[k];
        params[t].data[k] = orig + h;
        let up = loss(params);
        params[t].data[k] = orig - h;
        let down = loss(params);
        params[t].data[k] = orig;
        worst = worst.max(grad_rel_err(grads[t].data[k], (up - down) / (2.0 * h)));
    }
    worst
}

#[test]
fn criterion_3_numerical_integrity() {
    let _serial = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // MLP
    let x: Vec<Vec<f64>> = (0..6).map(|_| (0..8).map(|_| rng.gen()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>()).collect();
    let mut mlp = MlpModel::new(8, 16, Loss::Mse, 1).unwrap();
    for p in mlp.params_mut() {
        p.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    let (_, g) = mlp.loss_and_grad(&x, &y);
    let mut params = mlp.params().to_vec();
    let probe = mlp.clone();
    let mlp_err = check_grads(
        &mut params,
        &g,
        &|p| {
            let mut m = probe.clone();
            m.params_mut().clone_from_slice(p);
            m.loss(&x, &y)
        },
        &mut rng,
        20,
    );

    // LSTM, 4 steps, 8 units
    let cfg = LstmConfig { hidden: 8, encoder_layers: 2, reverse: true, loss: Loss::Mse };
    let mut lstm = LstmSeq2Seq::new(cfg, 5).unwrap();
    for p in lstm.params_mut() {
        p.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| f64::from(rng.gen::<bool>() as u8)).collect()).collect();
    let ys: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen()).collect()).collect();
    let (_, g) = lstm.loss_and_grad(&xs, &ys);
    let mut params = lstm.params().to_vec();
    let probe = lstm.clone();
    let lstm_err = check_grads(
        &mut params,
        &g,
        &|p| {
            let mut m = probe.clone();
            m.params_mut().clone_from_slice(p);
            m.loss(&xs, &ys)
        },
        &mut rng,
        30,
    );

    // SMO KKT, recomputed from scratch
    let mut sx = Vec::new();
    let mut labels = Vec::new();
    for i in 0..80 {
        let c = i % 2;
        sx.push(vec![c as f64 + rng.gen_range(-0.8..0.8), rng.gen_range(-1.0..1.0)]);
        labels.push(c);
    }
    let p = SvmParams { tol: 1e-7, c: 10.0, gamma: 0.5, ..SvmParams::svc() };
    let svm = train_svm(&sx, &labels, p).unwrap();
    let sol = svm.machines()[0].solution.as_ref().unwrap();
    let yy: Vec<f64> = labels.iter().map(|&l| if l == svm.machines()[0].class_a { 1.0 } else { -1.0 }).collect();
    let n = sx.len();
    let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let grad = (0..n).map(|j| yy[i] * yy[j] * rbf(p.gamma, &sx[i], &sx[j]) * sol.alpha[j]).sum::<f64>() - 1.0;
        let v = -yy[i] * grad;
        if (yy[i] > 0.0 && sol.alpha[i] < p.c) || (yy[i] < 0.0 && sol.alpha[i] > 0.0) {
            up = up.max(v);
        }
        if (yy[i] > 0.0 && sol.alpha[i] > 0.0) || (yy[i] < 0.0 && sol.alpha[i] < p.c) {
            low = low.min(v);
        }
    }
    let kkt = (up - low).max(0.0);
    let eq: f64 = sol.alpha.iter().zip(&yy).map(|(a, y)| a * y).sum::<f64>().abs();

    // HDC argmax against an independent cosine scan
    let cfgr = RunConfig::default();
    let oracle = AgingOracle::with_defaults(VDD);
    let (wfs, traces) = corpus(&builtin("stdcells").unwrap(), 1, 32, 4, &cfgr, &oracle).unwrap();
    let ds = build_history_dataset(&wfs, &traces, 3, VDD).unwrap();
    let q = QuantizerSpec::from_traces(&traces, 64).unwrap();
    let params = HdcParams { dim: 2000, epochs: 3, ..HdcParams::default() };
    let hdc = HdcModel::train_history(&ds, q, VDD, params).unwrap();
    let mut hdc_mismatch = 0;
    for s in &ds {
        let e = hdc.encode_history(s).unwrap();
        let mut best = (0usize, f64::NEG_INFINITY);
        for (c, cv) in hdc.class_vectors().iter().enumerate() {
            let dot: f64 = cv.iter().zip(&e.0).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
            let norm: f64 = cv.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
            let cos = if norm == 0.0 { 0.0 } else { dot / (norm * (e.0.len() as f64).sqrt()) };
            if cos > best.1 {
                best = (c, cos);
            }
        }
        if hdc.predict_history(s).unwrap() != best.0 {
            hdc_mismatch += 1;
        }
    }

    let elapsed = t0.elapsed();
    let ok = mlp_err <= 1e-4
        && lstm_err <= 1e-4
        && kkt <= 1e-6
        && eq <= 1e-6
        && hdc_mismatch == 0
        && elapsed < Duration::from_secs(300);
    verdict(
        3,
        ok,
        format!(
            "MLP grad {mlp_err:.1e}, LSTM grad {lstm_err:.1e}, KKT {kkt:.1e}, HDC mismatches {hdc_mismatch}/{}",
            ds.len()
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_4_scenario1() {
    let _serial = serial();
    let t0 = Instant::now();
    let r = scenario1(&Scenario1Config::default(), &RunConfig::default(), &AgingOracle::with_defaults(VDD)).unwrap();
    let best = r.best();
    let rho = best.summary.growth_correlation().unwrap();
    let elapsed = t0.elapsed();
    let ok = best.summary.mean_abs_final <= 15.0 && rho >= 0.0 && elapsed < Duration::from_secs(900);
    verdict(
        4,
        ok,
        format!(
            "SVM |RE_l| {:.2} %, HDC |RE_l| {:.2} %, best {} growth Spearman {rho:.3}",
            r.svm.summary.mean_abs_final, r.hdc.summary.mean_abs_final, best.name
        ),
        elapsed,
    );
    assert!(ok);
}

fn scenario2_run() -> &'static (Scenario2Result, Duration) {
    static RUN: OnceLock<(Scenario2Result, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let r = scenario2(
            &Scenario2Config::default(),
            &RunConfig::default(),
            &AgingOracle::with_defaults(VDD),
            &DelayModel::default(),
        )
        .unwrap();
        (r, t0.elapsed())
    })
}

#[test]
fn criterion_5_scenario2() {
    let _serial = serial();
    let (r, elapsed) = scenario2_run();
    let best = r.best();
    let r2 = best.r2.unwrap_or(f64::NEG_INFINITY);
    let ok = r2 >= 0.3 && best.mean_abs_re <= 10.0 && *elapsed < Duration::from_secs(1800);
    let all: Vec<String> = r
        .report
        .models
        .iter()
        .map(|m| format!("{} r² {:.3} |RE_l| {:.2} %", m.name, m.r2.unwrap_or(f64::NAN), m.mean_abs_re))
        .collect();
    verdict(5, ok, all.join(", "), *elapsed);
    assert!(ok);
}

#[test]
fn criterion_6_guardband() {
    let _serial = serial();
    let (r, train_elapsed) = scenario2_run();
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let oracle = AgingOracle::with_defaults(VDD);
    let nl = builtin("adder8").unwrap();
    // fresh stimuli, disjoint from the training seeds
    let (wfs, _) = corpus(&nl, 1, 32, 3001, &cfg, &oracle).unwrap();
    let preds = r.models.predict(&wfs);
    let report = EolReport::build(&nl, &wfs, &oracle, &preds, &cfg, &DelayModel::default()).unwrap();
    println!("{}", report.text_table());
    let base = report.baseline.mean_delta_ps;
    let ratio = report.worst_case.mean_delta_ps / base;
    let within = report.models.iter().all(|m| (m.delay.mean_delta_ps - base).abs() <= 0.5 * base);
    let elapsed = t0.elapsed() + *train_elapsed;
    let ok = ratio >= 3.0 && within && elapsed < Duration::from_secs(600);
    verdict(6, ok, format!("worst-case/oracle mean Δdelay {ratio:.2}, models within 50 %: {within}"), elapsed);
    assert!(ratio >= 3.0 && within);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_7_speedup() {
    let _serial = serial();
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let oracle = AgingOracle::with_defaults(VDD);
    let (wfs, traces) = corpus(&builtin("stdcells").unwrap(), 1, 32, 1, &cfg, &oracle).unwrap();
    let ds = build_history_dataset(&wfs, &traces, 7, VDD).unwrap();
    let q = QuantizerSpec::from_traces(&traces, 64).unwrap();
    let hdc = HdcModel::train_history(&ds, q, VDD, HdcParams { epochs: 2, ..HdcParams::default() }).unwrap();
    let (test, _) = corpus(&builtin("adder8").unwrap(), 1, 32, 7, &cfg, &oracle).unwrap();
    let w = &test[0];
    let mut t_oracle = Vec::new();
    let mut t_hdc = Vec::new();
    for _ in 0..30 {
        let s = Instant::now();
        std::hint::black_box(oracle.run_trace(w).unwrap());
        t_oracle.push(s.elapsed().as_secs_f64());
        let s = Instant::now();
        std::hint::black_box(predict_trace_recursive(&hdc, w, 7, BiasMultiplier(1.0)).unwrap());
        t_hdc.push(s.elapsed().as_secs_f64());
    }
    let (o, h) = (median(t_oracle), median(t_hdc));
    let speedup = o / h;
    let ok = speedup >= 10.0;
    verdict(
        7,
        ok,
        format!("oracle {:.1} µs/trace, HDC {:.1} µs/trace, speedup {speedup:.3}x", o * 1e6, h * 1e6),
        t0.elapsed(),
    );
    assert!(ok, "HDC inference is {speedup:.3}x the oracle speed");
}

fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("agekit-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn criterion_8_reproducibility() {
    let _serial = serial();
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let oracle = AgingOracle::with_defaults(VDD);
    let dm = DelayModel::default();
    // reduced sizes; every stage of both scenarios still runs
    let s1 = Scenario1Config {
        train_runs: 1,
        hdc: HdcParams { dim: 2000, epochs: 3, ..HdcParams::default() },
        ..Scenario1Config::default()
    };
    let s2 = Scenario2Config {
        train_runs: 2,
        test_circuit: "adder8".into(),
        mlp: TrainSpec { epochs: 5, ..TrainSpec::mlp() },
        lstm: TrainSpec { epochs: 3, ..TrainSpec::lstm() },
        ..Scenario2Config::default()
    };
    let (a, b) = (scratch_dir("a"), scratch_dir("b"));
    write_pipeline(&a, &s1, &s2, &cfg, &oracle, &dm).unwrap();
    write_pipeline(&b, &s1, &s2, &cfg, &oracle, &dm).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).unwrap() != std::fs::read(b.join(n)).ok().unwrap_or_default())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let ok = !names.is_empty() && differing.is_empty();
    verdict(8, ok, format!("{} files compared, differing: {differing:?}", names.len()), t0.elapsed());
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
    assert!(ok);
}
