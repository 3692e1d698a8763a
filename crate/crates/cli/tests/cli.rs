use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agekit"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agekit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn agekit")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "agekit {args:?} exited {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().skip(1).filter(|l| !l.is_empty()).count()
}

#[test]
fn sim_writes_one_row_per_device() {
    let d = scratch("sim");
    ok(&d, &["sim", "--netlist", "adder8", "--segments", "16", "--out", "wf.csv"]);
    assert_eq!(data_rows(&d.join("wf.csv")), 96);
    let header = std::fs::read_to_string(d.join("wf.csv")).unwrap();
    let cols = header.lines().next().unwrap().split(',').count();
    assert_eq!(cols, 2 + 16);
    assert!(d.join("wf.csv.manifest.json").exists());
}

#[test]
fn full_flow() {
    let d = scratch("flow");
    ok(&d, &["--seed", "4", "sim", "--netlist", "adder8", "--segments", "24", "--out", "wf.csv"]);
    ok(&d, &["oracle", "run", "--waveforms", "wf.csv", "--out", "tr.csv"]);
    assert_eq!(data_rows(&d.join("tr.csv")), 96);

    ok(&d, &["dataset", "--mode", "history", "--h", "4", "--waveforms", "wf.csv", "--traces", "tr.csv", "--split", "0.75", "--out", "ds.csv"]);
    let n = data_rows(&d.join("ds.train.csv")) + data_rows(&d.join("ds.test.csv"));
    assert_eq!(n, 96 * 24);
    ok(&d, &["dataset", "--mode", "eol", "--waveforms", "wf.csv", "--traces", "tr.csv", "--out", "eol_ds.csv"]);
    assert_eq!(data_rows(&d.join("eol_ds.csv")), 96);

    ok(&d, &["train", "--model", "svm", "--h", "4", "--waveforms", "wf.csv", "--traces", "tr.csv", "--out", "svm.model"]);
    ok(&d, &["train", "--model", "hdc", "--h", "4", "--dim", "1000", "--epochs", "2", "--waveforms", "wf.csv", "--traces", "tr.csv", "--out", "hdc.model"]);
    ok(&d, &["train", "--model", "mlp", "--epochs", "20", "--waveforms", "wf.csv", "--traces", "tr.csv", "--out", "mlp.model"]);
    ok(&d, &["train", "--model", "svr", "--waveforms", "wf.csv", "--traces", "tr.csv", "--out", "svr.model"]);

    ok(&d, &["predict", "--model", "svm.model", "--waveforms", "wf.csv", "--baseline", "tr.csv", "--out", "svm_pred.csv"]);
    assert_eq!(data_rows(&d.join("svm_pred.csv")), 96);
    ok(&d, &["predict", "--model", "hdc.model", "--waveforms", "wf.csv", "--out", "hdc_pred.csv"]);
    ok(&d, &["predict", "--model", "svr.model", "--last", "--waveforms", "wf.csv", "--out", "svr_last.csv"]);
    assert_eq!(data_rows(&d.join("svr_last.csv")), 96);

    let table = ok(&d, &["eol", "--netlist", "adder8", "--waveforms", "wf.csv", "--model", "MLP=mlp.model", "--model", "SVR=svr.model", "--out-dir", "eol"]);
    assert!(table.contains("Worst Case"));
    for f in ["eol.csv", "delay.csv", "table.txt", "error_analysis_mlp.csv", "error_analysis_svr.csv", "manifest.json"] {
        assert!(d.join("eol").join(f).exists(), "{f} missing");
    }
    assert_eq!(data_rows(&d.join("eol/eol.csv")), 2 * 96);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eol/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "agekit.manifest/1");
    assert!(!manifest["inputs"].as_array().unwrap().is_empty());
    assert!(manifest["outputs"].as_array().unwrap().iter().all(|o| o["sha256"].as_str().unwrap().len() == 64));
}

#[test]
fn exit_codes() {
    let d = scratch("codes");
    assert_eq!(code(&d, &["--help"]), 0);
    assert_eq!(code(&d, &["sim", "--bogus"]), 2);
    assert_eq!(code(&d, &["frobnicate"]), 2);
    assert_eq!(code(&d, &["oracle", "run", "--waveforms", "missing.csv", "--out", "t.csv"]), 3);

    std::fs::write(d.join("junk.csv"), "not,a,waveform\n1,2,3\n").unwrap();
    assert_eq!(code(&d, &["oracle", "run", "--waveforms", "junk.csv", "--out", "t.csv"]), 4);
    assert_eq!(code(&d, &["predict", "--model", "junk.csv", "--waveforms", "junk.csv", "--out", "p.csv"]), 4);

    assert_eq!(code(&d, &["sim", "--netlist", "nosuch", "--out", "x.csv"]), 5);
    assert_eq!(code(&d, &["bench", "--runs", "0"]), 5);

    let out = run(&d, &["sim", "--netlist", "nosuch", "--out", "x.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[5]"));
}

#[test]
fn seed_controls_stimulus() {
    let d = scratch("seed");
    ok(&d, &["--seed", "9", "sim", "--netlist", "adder8", "--segments", "8", "--out", "a.csv"]);
    ok(&d, &["--seed", "9", "sim", "--netlist", "adder8", "--segments", "8", "--out", "b.csv"]);
    ok(&d, &["--seed", "10", "sim", "--netlist", "adder8", "--segments", "8", "--out", "c.csv"]);
    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert!(d.join("a.csv.manifest.json").exists());
}

#[test]
fn quick_report_is_reproducible() {
    let d = scratch("report");
    ok(&d, &["report", "--scenario", "2", "--quick", "--out-dir", "r1"]);
    ok(&d, &["report", "--scenario", "2", "--quick", "--out-dir", "r2"]);
    for f in ["eol.csv", "delay.csv", "table.txt", "summary.txt"] {
        let a = std::fs::read(d.join("r1").join(f)).unwrap();
        let b = std::fs::read(d.join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn bench_reports_speedup() {
    let d = scratch("bench");
    let out = ok(&d, &["bench", "--dim", "500", "--epochs", "1", "--runs", "2", "--out", "bench.csv"]);
    assert!(out.contains("speedup"));
    assert!(data_rows(&d.join("bench.csv")) >= 3);
}
