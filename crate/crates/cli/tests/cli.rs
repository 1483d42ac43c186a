use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaussdecay"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_config(cfg: &Path, out: &Path) -> Output {
    bin().arg("run").arg("--config").arg(cfg).arg("--out-dir").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].clone()).collect()
}

fn floats(v: &[String]) -> Vec<f64> {
    v.iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn bundled_closed_form_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(&config("verify_thm1.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("thm1-n1-omega1.csv"));
    let res = floats(&column(&h, &rows, "relative_residual"));
    assert_eq!(res.len(), 20);
    assert!(res.iter().all(|&r| r < 1e-6));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed"], 0);
}

#[test]
fn every_bundled_config_passes() {
    for entry in fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let o = run_config(&path, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
    }
}

#[test]
fn guard_violation_exits_2_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[[scenario]]\nname = \"too-long\"\ntask = \"simulate\"\nequation = \"harmonic{omega=2}\"\ndata = \"gaussian\"\nprobes = { times = [1.0] }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run_config(&cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ω < π/(2T)"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn magnetic_guard_needs_even_dimension() {
    let o = bin().args(["simulate", "--equation", "magnetic{b=1, dim=3}", "--data", "gaussian{dim=3}", "--times", "0.1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("even n"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[[scenario]]\nname = \"x\"\ntask = \"simulate\"\nequation = \"nonexistent\"\ndata = \"gaussian\"\nprobes = { times = [0.1] }\n").unwrap();
    let o = run_config(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown equation"));
    let o = bin().args(["run", "--config", "/nonexistent/file.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    fs::write(
        &cfg,
        "[[scenario]]\nname = \"strict\"\ntask = \"simulate\"\nequation = \"harmonic{omega=1}\"\ndata = \"gaussian\"\nprobes = { times = [0.3], dt = 0.05 }\nchecks = { max_oracle_distance = 1e-12 }\n",
    )
    .unwrap();
    let o = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL strict"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    let o = bin().output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hardy_free_ratios_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(&config("hardy_free.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("hardy-free.csv"));
    assert_eq!(floats(&column(&h, &rows, "T")), vec![0.25, 0.5, 1.0]);
    for r in floats(&column(&h, &rows, "ratio")) {
        assert!((1.0..=1.001).contains(&r), "{r}");
    }
    assert!(column(&h, &rows, "classification").iter().all(|c| c != "below_threshold"));
}

#[test]
fn eigen_table_for_omega_2() {
    let o = bin().args(["eigen", "--omega", "2", "--max-m", "5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let energies: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(energies, vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0]);
}

#[test]
fn harmonic_threshold_example() {
    let o = bin().args(["thresholds", "--kind", "harmonic", "--omega", "1", "--T", "1", "--alpha", "2", "--beta", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("above_threshold"), "{text}");
    assert!(text.contains("3.36588"));
}

#[test]
fn gauge_of_pure_gradient_vanishes() {
    let o = bin().args(["gauge", "--potential", "gradient{c=1}"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.unwrap();
        for i in [2, 3] {
            assert!(rec[i].parse::<f64>().unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cfg in ["decay.toml", "oracles.toml", "transforms.toml"] {
        assert_eq!(run_config(&config(cfg), a.path()).status.code(), Some(0));
        assert_eq!(bin().args(["--jobs", "1", "run", "--config"]).arg(config(cfg)).arg("--out-dir").arg(b.path()).output().unwrap().status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn stored_fields_round_trip_through_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("snap.toml");
    fs::write(
        &cfg,
        "[[scenario]]\nname = \"evolve\"\ntask = \"simulate\"\nequation = \"harmonic{omega=1}\"\ndata = \"gaussian{chirp=0.1}\"\ngrid = { dim = 1, half_width = 12.0, points = 512 }\nprobes = { times = [0.2] }\noutputs = { snapshots = true }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_config(&cfg, &out).status.code(), Some(0));
    let snap = out.join("evolve_0.bin");
    assert!(snap.exists());
    let data = format!("file{{path={}}}", snap.display());

    let o = bin().args(["decay-fit", "--data", &data]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // u = e^{-z(t)x²} with z' = 4iz² − iω²/4, linearised by z = (i/4)y'/y, y'' = −ω²y
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let space = r.records().next().unwrap().unwrap();
    assert_eq!(&space[0], "space");
    let rate: f64 = space[3].parse().unwrap();
    let (w, t) = (1.0f64, 0.2f64);
    let z = num_complex::Complex64::new(1.0, 0.1);
    let (c, s) = ((w * t).cos(), (w * t).sin());
    let i = num_complex::Complex64::i();
    let zt = (z * c - i * (w / 4.0) * s) / (c - i * (4.0 / w) * z * s);
    assert!((rate - zt.re).abs() / zt.re < 1e-6, "{rate} vs {}", zt.re);

    let o = bin().args(["transform", "--data", &data, "--transform", "harmonic_removal{omega=1}", "--horizon", "0.5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("round-trip max error"));
}

#[test]
fn subcommand_filters_config_by_task() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("gauge").arg("--config").arg(config("gauge.toml")).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin().arg("eigen").arg("--config").arg(config("gauge.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
