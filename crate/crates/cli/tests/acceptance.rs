//! CLI acceptance: seeded-run reproducibility (byte-identical CSV outputs)
//! and the documented exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_anacov")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn anacov")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn criterion_10_cli_seeded_runs_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = configs().join("forrester.toml");
    let spec = configs().join("forrester_coverpoints.toml");
    let run_once = |tag: &str| {
        let out = run(
            &[
                "bayes-opt",
                "--model",
                model.to_str().unwrap(),
                "--spec",
                spec.to_str().unwrap(),
                "--db",
                &format!("{tag}.db"),
                "--out",
                tag,
                "--objective",
                "gap-lower:out_level",
                "--budget",
                "14",
                "--n-init",
                "4",
                "--seed",
                "99",
                "--duration",
                "0.05",
            ],
            dir.path(),
        );
        assert!(
            code(&out) == 0 || code(&out) == 3,
            "bayes-opt failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let history = std::fs::read(dir.path().join(tag).join("history.csv")).unwrap();
        let summary = std::fs::read(dir.path().join(tag).join("summary.txt")).unwrap();
        (history, summary, code(&out))
    };
    let (h1, s1, c1) = run_once("a");
    let (h2, s2, c2) = run_once("b");
    assert_eq!(h1, h2, "history.csv differs between identical seeded runs");
    assert_eq!(s1, s2, "summary.txt differs between identical seeded runs");
    assert_eq!(c1, c2);

    // A different seed must change the suggestion sequence.
    let out = run(
        &[
            "bayes-opt",
            "--model",
            model.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "c.db",
            "--out",
            "c",
            "--objective",
            "gap-lower:out_level",
            "--budget",
            "14",
            "--n-init",
            "4",
            "--seed",
            "100",
            "--duration",
            "0.05",
        ],
        dir.path(),
    );
    assert!(code(&out) == 0 || code(&out) == 3);
    let h3 = std::fs::read(dir.path().join("c").join("history.csv")).unwrap();
    assert_ne!(h1, h3, "different seeds produced identical histories");
    println!("[PASS] criterion 10 (CLI): identical seeded bayes-opt runs emit byte-identical CSVs");
}

#[test]
fn exit_codes_follow_contract() {
    let dir = tempfile::tempdir().unwrap();
    let spec = configs().join("ldo_coverpoints.toml");
    let model = configs().join("ldo_analogue.toml");

    // Usage error: budget below n_init.
    let out = run(
        &[
            "bayes-opt",
            "--model",
            model.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "x.db",
            "--objective",
            "gap-lower:vout_level",
            "--budget",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));

    // Unknown flag is a usage error.
    let out = run(&["cover", "--bogus"], dir.path());
    assert_eq!(code(&out), 1);

    // Covering within legal bins exits 0 and grows the database.
    let out = run(
        &[
            "cover",
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "cov.db",
            "--model",
            model.to_str().unwrap(),
            "--x",
            "0.05",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cov.db").exists());

    // A run landing in the illegal band exits 3 (droop bottoms out inside it).
    let out = run(
        &[
            "cover",
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "cov.db",
            "--model",
            model.to_str().unwrap(),
            "--x",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    // Report over a database with bug hits exits 3 and names the test.
    let out = run(
        &["report", "--spec", spec.to_str().unwrap(), "--db", "cov.db"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("BUG"), "{text}");

    // Covering an LTI model under a parsed stimulus works too.
    let lpf_spec = configs().join("lpf_coverpoints.toml");
    let lpf = configs().join("lpf_analogue.toml");
    let out = run(
        &[
            "cover",
            "--spec",
            lpf_spec.to_str().unwrap(),
            "--db",
            "lpf.db",
            "--model",
            lpf.to_str().unwrap(),
            "--stimulus",
            "sine:1.0,728",
            "--dt",
            "5e-6",
            "--duration",
            "0.02",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // Runtime failure: trace referencing an unknown signal.
    std::fs::write(dir.path().join("bad.csv"), "time,wrong\n0,1\n1,2\n").unwrap();
    let out = run(
        &[
            "cover",
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "cov.db",
            "--trace",
            "bad.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("output"),
        "diagnostic must name the missing signal"
    );
    println!("[PASS] exit codes: 0 ok / 1 usage / 2 runtime / 3 bug-bin hit");
}

#[test]
fn report_on_empty_database_shows_full_gap() {
    let dir = tempfile::tempdir().unwrap();
    let spec = configs().join("ldo_coverpoints.toml");
    let out = run(
        &["report", "--spec", spec.to_str().unwrap(), "--db", "missing.db"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fraction 1.0000"), "{text}");
    println!("[PASS] report on an empty database shows gap fraction 1.0");
}

#[test]
fn bode_explore_marks_tuned_peak_row() {
    let dir = tempfile::tempdir().unwrap();
    let model = configs().join("lpf_analogue.toml");
    let spec = configs().join("lpf_coverpoints.toml");
    let out = run(
        &[
            "bode-explore",
            "--model",
            model.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--db",
            "cov.db",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let peak_line = text.lines().find(|l| l.contains("<- peak")).expect("peak row");
    let freq: f64 = peak_line.split_whitespace().next().unwrap().parse().unwrap();
    assert!(
        (freq - 728.0).abs() < 728.0 * 0.02,
        "peak row at {freq} Hz, expected near 728"
    );
    // Explore table and per-run traces exist for external plotting.
    assert!(dir.path().join("out/explore.csv").exists());
    assert!(dir.path().join("out/bode.csv").exists());
    let traces = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("tran_")
        })
        .count();
    assert_eq!(traces, 3);
    println!("[PASS] bode-explore reports the 728 Hz row as peak and emits plot CSVs");
}

#[test]
fn cover_accepts_config_file_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "spec = {:?}\ndb = \"cfg.db\"\nmodel = {:?}\nx = 0.1\n",
        configs().join("ldo_coverpoints.toml").to_str().unwrap(),
        configs().join("ldo_analogue.toml").to_str().unwrap(),
    );
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = run(&["cover", "--config", "run.toml"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cfg.db").exists());

    // Flags override config values.
    let out = run(&["cover", "--config", "run.toml", "--x", "0.5"], dir.path());
    assert_eq!(code(&out), 3, "flag override should reach the illegal band");
    println!("[PASS] config files supply defaults; flags override them");
}
