//! End-to-end tests of the `qemitter` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qemitter");
const GOLDEN_REL_TOL: f64 = 1e-9;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    run(&full)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(dir.join("summary.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let (k, rest) = l.split_once(" = ")?;
            let v = rest.split("  # ").next().unwrap();
            Some((k.to_string(), v.to_string()))
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn help_and_version() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("reproduce"));
    assert!(run(&["--version"]).status.success());
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["simulate", "rabi", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn correct_reports_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "correct",
            "--sbr",
            "23.91",
            "--g2par",
            "0.22",
            "--g2perp",
            "0.51",
            "--epsilon",
            "0.04",
            "--delta2",
            "0.04",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    let v: f64 = s["v_corrected"].parse().unwrap();
    assert!((v - 0.7294).abs() < 5e-5, "{v}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("v_corrected"));
}

#[test]
fn correct_domain_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["correct", "--sbr", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("signal-to-background"));
    let o = run_in(dir.path(), &["correct", "--g2par", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), &["correct", "--branching", "0.8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[emitter]\nt1 = 7.0\n");
    let o = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate", "ple"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t1"), "{}", stderr(&o));
}

#[test]
fn empty_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "empty.csv", "");
    let o = run_in(dir.path(), &["fit", "lifetime", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn malformed_row_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "bad.csv", "t_ns,value\n0.5,10\n1.0,abc\n");
    let o = run_in(dir.path(), &["fit", "lifetime", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn degenerate_data_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "zero.csv", "t_ns,value\n0.5,0\n1.0,0\n1.5,0\n2.0,0\n");
    let o = run_in(dir.path(), &["fit", "lifetime", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn lifetime_fit_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("t_ns,value\n");
    for i in 0..120 {
        let t = 0.25 + 0.5 * i as f64;
        text.push_str(&format!("{t},{}\n", 800.0 * (-t / 7.44f64).exp() + 3.0));
    }
    let data = write(dir.path(), "decay.csv", &text);
    let out = dir.path().join("fit");
    let o = run_in(&out, &["fit", "lifetime", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    let t1: f64 = s["t1"].parse().unwrap();
    assert!((t1 - 7.44).abs() < 1e-6, "{t1}");
    assert_eq!(s["converged"], "true");
    let residuals = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("t_ns,value,fitted,residual\n"));
    assert_eq!(residuals.lines().count(), 121);
}

#[test]
fn wrong_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "time,value\n0.5,1\n");
    let o = run_in(dir.path(), &["fit", "lifetime", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_ns,value"));
}

#[test]
fn config_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[rabi]\npulse_ns = 2.0\nbins = 50\n\n[ensemble]\nnodes = 8\n",
    );
    let out = dir.path().join("rabi");
    let o = run_in(
        &out,
        &[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "rabi",
            "--s",
            "50",
            "--s",
            "367",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("rabi.csv")).unwrap();
    assert!(csv.starts_with("t_ns,rho11_s50,rho11_s367\n"));
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.toml",
        "[ensemble]\nmethod = \"monte-carlo\"\ndraws = 64\n\n[ramsey]\ntau_ns = { start = 0.0, stop = 4.0, points = 9 }\n",
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (d, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = run_in(
            d,
            &["--config", cfg.to_str().unwrap(), "--seed", seed, "simulate", "ramsey"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &Path| fs::read(d.join("ramsey.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(
        fs::read(a.join("summary.txt")).unwrap(),
        fs::read(b.join("summary.txt")).unwrap()
    );
    assert_ne!(read(&a), read(&c));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_in(&a, &["--threads", "1", "hom", "--oracle", "5000"])
        .status
        .success());
    assert!(run_in(&b, &["--threads", "3", "hom", "--oracle", "5000"])
        .status
        .success());
    for f in ["hom_oracle.csv", "hom_window.csv", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

// ---- golden outputs of the bundled presets ----

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn numeric_diff(name: &str, got: &str, want: &str) {
    let (g, w): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(g.len(), w.len(), "{name}: line count");
    for (i, (gl, wl)) in g.iter().zip(&w).enumerate() {
        if gl == wl {
            continue;
        }
        let split = |l: &str| -> Vec<String> {
            l.split([',', '=', ' '])
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        };
        let (gs, ws) = (split(gl), split(wl));
        assert_eq!(gs.len(), ws.len(), "{name}:{}: `{gl}` vs `{wl}`", i + 1);
        for (a, b) in gs.iter().zip(&ws) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!(
                    (x - y).abs() <= GOLDEN_REL_TOL * y.abs().max(1e-300) || (x - y).abs() < 1e-300,
                    "{name}:{}: {x} vs {y}",
                    i + 1
                ),
                _ => assert_eq!(a, b, "{name}:{}", i + 1),
            }
        }
    }
}

fn check_preset(figure: &str, files: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["reproduce", figure]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bless = std::env::var_os("QEMITTER_BLESS").is_some();
    for f in files {
        let got = fs::read_to_string(dir.path().join(f)).unwrap();
        let golden = golden_dir().join(format!("{figure}_{f}"));
        if bless {
            fs::write(&golden, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&golden).unwrap_or_else(|_| panic!("missing {}", golden.display()));
        numeric_diff(f, &got, &want);
    }
}

#[test]
fn reproduce_fig2_matches_golden() {
    check_preset("fig2", &["summary.txt", "quality_factor.csv", "rabi.csv"]);
}

#[test]
fn reproduce_fig3a_matches_golden() {
    check_preset("fig3a", &["summary.txt", "ramsey.csv", "hahn.csv"]);
}

#[test]
fn reproduce_figs8_matches_golden() {
    check_preset(
        "figs8",
        &["summary.txt", "hom_theta.csv", "hom_window.csv", "hom_oracle.csv"],
    );
}
