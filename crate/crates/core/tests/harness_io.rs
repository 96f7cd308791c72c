use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use isac_tensor::harness::{
    emit_plot_data, run_records, run_sweep, run_trial, write_trials_csv, ExperimentConfig,
    CSV_HEADER,
};
use isac_tensor::Error;

const PAPER: &str = include_str!("../configs/paper.toml");

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(PAPER).unwrap();
    cfg.trials = 3;
    cfg.es_n0_grid = vec![10.0, 20.0];
    cfg.outputs = dir.to_path_buf();
    cfg
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn row_counts_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_sweep(&small(dir.path())).unwrap();
    let trials = rows(&out.trials_csv);
    assert_eq!(trials[0], CSV_HEADER);
    assert_eq!(trials.len(), 1 + 6);
    let summary = rows(&out.summary_csv);
    assert_eq!(summary.len(), 1 + 2);
    // 17 significant digits on every float column
    let v = &trials[1][6];
    let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{v}");
}

#[test]
fn byte_identical_reruns() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&small(a.path())).unwrap();
    // second run on a single thread
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| run_sweep(&small(b.path())).unwrap());
    for f in ["trials.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn trial_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let all = run_records(&cfg).unwrap();
    let mut backwards = Vec::new();
    for &v in cfg.es_n0_grid.iter().rev() {
        for t in (0..cfg.trials).rev() {
            backwards.push(run_trial(&cfg, v, t).unwrap());
        }
    }
    backwards.reverse();
    assert_eq!(all, backwards);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn summary_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.trials = 8;
    let out = run_sweep(&cfg).unwrap();
    let trials = rows(&out.trials_csv);
    let summary = rows(&out.summary_csv);
    let head = &summary[0];
    for line in &summary[1..] {
        let value: f64 = line[1].parse().unwrap();
        let group: Vec<&Vec<String>> =
            trials[1..].iter().filter(|r| r[1].parse::<f64>().unwrap() == value).collect();
        assert_eq!(line[2], group.len().to_string());
        for metric in ["als_iters", "nmse_ar", "angle_rmse_deg", "nmse_h", "ser_krf", "ser_zf"] {
            let col = CSV_HEADER.iter().position(|h| *h == metric).unwrap();
            let vals: Vec<f64> = group.iter().map(|r| r[col].parse::<f64>().unwrap()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let med = median(vals);
            let at = |name: String| line[head.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
            assert!((at(format!("mean_{metric}")) - mean).abs() <= 1e-12 * mean.abs().max(1.0), "{metric}");
            assert!((at(format!("median_{metric}")) - med).abs() <= 1e-12 * med.abs().max(1.0), "{metric}");
        }
    }
}

#[test]
fn plot_files_match_csv_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_sweep(&small(dir.path())).unwrap();
    let files = emit_plot_data(&out.trials_csv).unwrap();
    assert_eq!(files.len(), 8);
    let ser = dir.path().join("ser_krf_vs_esn0.dat");
    assert!(files.contains(&ser));
    let text = fs::read_to_string(&ser).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines.len(), 1 + 2);

    let mut by_value: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows(&out.trials_csv)[1..] {
        by_value.entry(r[1].clone()).or_default().push(r[11].parse().unwrap());
    }
    for line in &lines[1..] {
        let mut it = line.split_whitespace();
        let x = it.next().unwrap();
        let y: f64 = it.next().unwrap().parse().unwrap();
        let vals = &by_value[x];
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((y - mean).abs() < 1e-12);
    }
}

#[test]
fn empty_csv_gives_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.csv");
    write_trials_csv(&[], &path).unwrap();
    for f in emit_plot_data(&path).unwrap() {
        let text = fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().count(), 1);
    }
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(emit_plot_data(&path), Err(Error::MalformedCsv(_))));
    let mut good = CSV_HEADER.join(",");
    good.push_str("\nes_n0,abc,0,1,true,3,0,0,0,0,0,0,0\n");
    fs::write(&path, good).unwrap();
    assert!(matches!(emit_plot_data(&path), Err(Error::MalformedCsv(_))));
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut cfg = small(&blocker.join("sub"));
    cfg.trials = 1;
    assert!(run_sweep(&cfg).is_err());
}

#[test]
fn parameter_sweep_changes_dims() {
    let dir = tempfile::tempdir().unwrap();
    let text = PAPER
        .replace("variable = \"es_n0\"", "variable = \"p\"\nvalues = [4, 16]")
        .replace("es_n0_grid = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]", "es_n0_grid = [20.0]");
    let mut cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    cfg.trials = 2;
    cfg.outputs = dir.path().to_path_buf();
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 4);
    assert!(out.records.iter().all(|r| r.sweep_var.as_str() == "p"));
    assert!(dir.path().join("trials.csv").exists());
    emit_plot_data(&out.trials_csv).unwrap();
    assert!(dir.path().join("ser_krf_vs_p.dat").exists());
}

fn isac(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_isac")).args(args).output().unwrap()
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/paper.toml");
    let cfg = cfg_path.to_str().unwrap();
    let out_dir = dir.path().join("run");
    let out = out_dir.to_str().unwrap();

    let check = isac(&["check", "--config", cfg]);
    assert!(check.status.success());

    let run = isac(&["run", "--config", cfg, "--out", out, "--trials", "2", "--seed", "5", "--noiseless"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = out_dir.join("trials.csv");
    assert_eq!(rows(&csv).len(), 1 + 7 * 2);

    let plot = isac(&["plotdata", "--csv", csv.to_str().unwrap()]);
    assert!(plot.status.success());
    assert!(out_dir.join("ser_krf_vs_esn0.dat").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, PAPER.replace("k = 2", "k = 30")).unwrap();
    let rejected = isac(&["check", "--config", bad.to_str().unwrap()]);
    assert!(!rejected.status.success());
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("NP >= K"));
}
