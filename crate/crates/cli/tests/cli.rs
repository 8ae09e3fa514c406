use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multistop::corpus::{random_process, random_reward, random_tree, rng};
use multistop::{solve_multi, swing_solve, SolveReport};
use multistop_cli::config::{Flags, Mode, RunConfig};
use multistop_cli::emit::{self, CertifyDoc, ReportDoc};
use multistop_cli::{EXIT_CAP, EXIT_CERTIFY, EXIT_INFEASIBLE, EXIT_OK, EXIT_OTHER, EXIT_PARSE};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn solve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn json_round_trip_is_bit_exact() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let m = random_tree(&mut r, 1 + seed as usize % 3, 0.2);
        let y = random_process(&mut r, &m, 10);
        // Non-dyadic values exercise the float formatting.
        let y = multistop::NodeProcess::from_fn(m.clone(), |n| y[n] / 3.0 + 0.1).unwrap();
        let reports: Vec<SolveReport> = vec![
            SolveReport::single(&y, m.root(), &[0.1, 0.5, 0.99], 1e-9).unwrap(),
            solve_multi(&random_reward(&mut r, &m, 2, 10).unwrap(), &m, m.root()).unwrap(),
            multistop::solve_swing(&y, 2, 1, m.root(), 1e-9).unwrap(),
        ];
        for report in &reports {
            let doc = ReportDoc::from_report(report);
            let text = emit::to_json(&doc).unwrap();
            let back: ReportDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
            for (a, b) in back.value_process.iter().zip(&doc.value_process) {
                assert_eq!(a.value.to_bits(), b.value.to_bits());
            }
            let csv = emit::value_table_csv(&doc.value_process).unwrap();
            assert!(csv.starts_with("node,time,value\n"));
            assert_eq!(csv.lines().count(), m.len() + 1);
            assert_eq!(emit::parse_value_table_csv(&csv).unwrap(), doc.value_process);
        }
    }
}

#[test]
fn text_report_names_the_reduction_residual() {
    let out = solve(&["multi", "--model", fixture("depth2.json").to_str().unwrap(), "--format", "text"]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("reduction identity residual")));
}

#[test]
fn single_mode_reproduces_committed_oracle_value() {
    let committed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("depth2.oracle.json")).unwrap()).unwrap();
    let out = solve(&["single", "--model", fixture("depth2.json").to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let doc: ReportDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.value, committed["value"].as_f64().unwrap());
    assert_eq!(doc.schema_version, emit::SCHEMA_VERSION);
}

#[test]
fn certify_fixture_set_passes() {
    let mut entries: Vec<_> = std::fs::read_dir(fixture("certify")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    assert!(entries.len() >= 5);
    for cfg in entries {
        let out = solve(&["certify", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&out), EXIT_OK, "{}: {}", cfg.display(), stderr(&out));
        let doc: CertifyDoc = serde_json::from_slice(&out.stdout).unwrap();
        assert!(doc.verdict.pass);
        assert_eq!(doc.verdict.value_delta, 0.0);
    }
}

#[test]
fn zero_reward_certifies_with_value_zero() {
    let out = solve(&["certify", "--config", fixture("certify/zero_multi.json").to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_OK);
    let doc: CertifyDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.report.value, 0.0);
    assert_eq!(doc.oracle.value, 0.0);
}

#[test]
fn exit_codes_by_failure_class() {
    let swing4 = fixture("swing4.json");
    let swing4 = swing4.to_str().unwrap();

    let out = solve(&["single", "--model", fixture("faults/malformed.json").to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_PARSE);
    assert!(stderr(&out).contains("malformed.json"));

    let out = solve(&["single", "--model", fixture("faults/bad_prob.json").to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_PARSE);
    assert!(stderr(&out).contains("node `r`"));

    let out = solve(&["swing", "--model", swing4, "--d", "3", "--delta", "3"]);
    assert_eq!(code(&out), EXIT_INFEASIBLE);
    let msg = stderr(&out);
    assert!(msg.contains("d=3") && msg.contains("delta=3") && msg.contains("T=4"), "{msg}");

    let out = solve(&[
        "certify",
        "--config",
        fixture("certify/depth3_additive.json").to_str().unwrap(),
        "--cap-tuples",
        "100",
    ]);
    assert_eq!(code(&out), EXIT_CAP);
    assert!(stderr(&out).contains("17576"));

    let out = solve(&[
        "certify",
        "--model",
        fixture("faults/one_step.json").to_str().unwrap(),
        "--psi",
        &format!("table:{}", fixture("faults/ties.csv").display()),
    ]);
    assert_eq!(code(&out), EXIT_CERTIFY);
    let doc: CertifyDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc.verdict.value_pass && doc.verdict.attainment_pass && !doc.verdict.minimality_pass);

    let out = solve(&["multi", "--model", swing4, "--delta", "1"]);
    assert_eq!(code(&out), EXIT_PARSE);
    assert!(stderr(&out).contains("--delta"));

    let out = solve(&["single", "--model", swing4, "--reward", "nope"]);
    assert_eq!(code(&out), EXIT_PARSE);
    assert!(stderr(&out).contains("nope"));

    let out = solve(&["single", "--model", swing4, "--start", "r9"]);
    assert_eq!(code(&out), EXIT_PARSE);
    assert!(stderr(&out).contains("r9"));

    let out = solve(&["bogus"]);
    assert_eq!(code(&out), EXIT_PARSE);

    let out = solve(&["single", "--model", "/nonexistent/model.json"]);
    assert_eq!(code(&out), EXIT_OTHER);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"model": "{}", "d": 2, "delta": 1, "eps": 1e-6}}"#,
            fixture("swing4.json").display()
        ),
    )
    .unwrap();
    let flags = Flags {
        config: Some(cfg_path.clone()),
        delta: Some(2),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(Mode::Swing, flags).unwrap();
    assert_eq!((cfg.d, cfg.delta, cfg.eps), (2, 2, 1e-6));

    let out_path = dir.path().join("report.json");
    let out = solve(&[
        "swing",
        "--config",
        cfg_path.to_str().unwrap(),
        "--delta",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let doc: ReportDoc = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc.delta, Some(2));

    let spec = multistop::ModelSpec::from_json(&std::fs::read_to_string(fixture("swing4.json")).unwrap()).unwrap();
    let loaded = spec.load().unwrap();
    let y = &loaded.processes["y"];
    let direct = swing_solve(y, 2, 2, loaded.model.root()).unwrap();
    assert_eq!(doc.value, direct.value_at_start());
}

#[test]
fn invalid_configs_are_rejected() {
    let model = Some(fixture("depth2.json"));
    let bad = [
        (Mode::Single, Flags { d: Some(2), ..Default::default() }),
        (Mode::Single, Flags { lambda: Some(vec![1.5]), ..Default::default() }),
        (Mode::Multi, Flags { lambda: Some(vec![0.5]), ..Default::default() }),
        (Mode::Multi, Flags { eps: Some(0.0), ..Default::default() }),
        (Mode::Multi, Flags { cap_tuples: Some(0), ..Default::default() }),
        (Mode::Multi, Flags { psi: Some("cubic".into()), ..Default::default() }),
        (Mode::Multi, Flags { solver: Some(Mode::Swing), ..Default::default() }),
        (Mode::Certify, Flags { solver: Some(Mode::Certify), ..Default::default() }),
    ];
    for (mode, flags) in bad {
        let flags = Flags { model: model.clone(), ..flags };
        let err = RunConfig::resolve(mode, flags).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_PARSE, "{err}");
    }
}
