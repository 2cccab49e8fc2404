use std::path::{Path, PathBuf};
use std::process::Command as Process;

use mesodyn::fixed::SolverTag;
use mesodyn::linalg::{ComplexMatrix, HermitianMatrix};
use mesodyn::random::{random_scenario, rng_from_seed};
use mesodyn::scenario::{FieldProfile, HermitianProfile, ScenarioConfig};
use mesodyn_cli::{parse_command_with_env, CliError, Verb};

fn bin() -> Process {
    let mut p = Process::new(env!("CARGO_BIN_EXE_mesodyn"));
    p.env_remove("MESODYN_PD_FLOOR");
    p
}

/// Runs the binary and returns its exit code and stderr.
fn run_bin(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut p = bin();
    p.args(args);
    for (k, v) in env {
        p.env(k, v);
    }
    let out = p.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

fn assert_outputs_exist(dir: &Path) {
    let m = manifest(dir);
    for name in m["outputs"].as_array().unwrap() {
        assert!(dir.join(name.as_str().unwrap()).is_file(), "missing {name}");
    }
}

fn scalar_scenario(e: f64, b: f64, r0: f64) -> ScenarioConfig {
    ScenarioConfig {
        hbar: 1.0,
        hamiltonian: HermitianProfile::constant(HermitianMatrix::from_real_diag(&[e])),
        field: FieldProfile::constant(b),
        initial_k: ComplexMatrix::from_real_diag(&[r0]),
        t_end: 1.0,
        dt: 1e-3,
        output_stride: 10,
        pd_floor: 1e-12,
    }
}

#[test]
fn parse_examples() {
    let cmd = parse_command_with_env(
        ["simulate", "--config", "s.json", "--solver", "factorized"],
        None,
    )
    .unwrap();
    assert_eq!(cmd.verb, Verb::Simulate);
    assert_eq!(cmd.config_path, Some(PathBuf::from("s.json")));
    assert_eq!(cmd.overrides.solver, Some(SolverTag::Factorized));
    assert_eq!(cmd.overrides.seed, 42);
    assert_eq!(cmd.overrides.terms, 30);

    let cmd =
        parse_command_with_env(["compare", "--config", "s.json", "--dt", "1e-3"], None).unwrap();
    assert_eq!(cmd.overrides.dt, Some(0.001));
    assert_eq!(cmd.overrides.t_end, None);

    let err = parse_command_with_env(["simulate"], None).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn parse_rejects_bad_input() {
    for argv in [
        vec!["simulate", "--config", "s.json", "--bogus"],
        vec!["integrate", "--config", "s.json"],
        vec!["simulate", "--config", "s.json", "--solver", "euler"],
        vec!["simulate", "--config", "s.json", "--dt", "fast"],
    ] {
        assert!(matches!(
            parse_command_with_env(argv, None),
            Err(CliError::Usage(_))
        ));
    }
    let cmd = parse_command_with_env(["verify"], None).unwrap();
    assert_eq!(cmd.config_path, None);
    let cmd = parse_command_with_env(
        ["verify", "--seed", "7", "--t-end", "0.5", "--hbar", "2"],
        Some("1e-9"),
    )
    .unwrap();
    assert_eq!(
        (cmd.overrides.seed, cmd.overrides.t_end, cmd.overrides.hbar),
        (7, Some(0.5), Some(2.0))
    );
    assert_eq!(cmd.overrides.pd_floor, Some(1e-9));
    assert!(matches!(
        parse_command_with_env(["verify"], Some("tiny")),
        Err(CliError::Usage(_))
    ));
    assert!(matches!(
        parse_command_with_env(["--help"], None),
        Err(CliError::Info(_))
    ));
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let (code, stderr) = run_bin(&["simulate", "--frobnicate"], &[]);
    assert_eq!(code, 2);
    assert!(stderr.contains("--frobnicate"));
    assert_eq!(run_bin(&["moving"], &[]).0, 2);
}

#[test]
fn simulate_scalar_phase_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let (e, b, r0) = (0.7, 1.2, 0.9);
    let config = write(dir.path(), "s.json", &scalar_scenario(e, b, r0).to_json());
    for solver in ["factorized", "direct", "series"] {
        let out = dir.path().join(solver);
        let (code, stderr) = run_bin(
            &[
                "simulate",
                "--config",
                &config,
                "--solver",
                solver,
                "--output",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code, 0, "{stderr}");
        let (header, rows) = read_csv(out.join(format!("trajectory_{solver}.csv")));
        assert_eq!(&header[..3], ["t", "k_re_0_0", "k_im_0_0"]);
        assert_eq!(rows.len(), 101);
        let rate = e + b * b / (r0 * r0);
        for row in rows {
            let (t, re, im) = (row[0], row[1], row[2]);
            // Compare on the unit circle to avoid branch cuts of atan2.
            let (c, s) = ((rate * t).cos(), (rate * t).sin());
            let phase_gap = (im * c - re * s).atan2(re * c + im * s);
            assert!(phase_gap.abs() <= 1e-8, "{solver} t={t} gap {phase_gap}");
            assert!(((re * re + im * im).sqrt() - r0).abs() <= 1e-10);
        }
        let (dheader, drows) = read_csv(out.join(format!("diagnostics_{solver}.csv")));
        assert_eq!(
            dheader,
            [
                "t",
                "xi",
                "xi_rate_pred",
                "xi_rate_obs",
                "kk_drift",
                "trace_khk_drift",
                "unitarity_defect"
            ]
        );
        assert_eq!(drows.len(), 101);
        assert_outputs_exist(&out);
    }
}

#[test]
fn overrides_replace_scenario_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "s.json",
        &scalar_scenario(1.0, 1.0, 1.0).to_json(),
    );
    let out = dir.path().join("o");
    let (code, _) = run_bin(
        &[
            "simulate",
            "--config",
            &config,
            "--dt",
            "0.01",
            "--t-end",
            "0.5",
            "--output",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0);
    let (_, rows) = read_csv(out.join("trajectory_factorized.csv"));
    // 50 steps with stride 10.
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.last().unwrap()[0], 0.5);
    let overridden = ScenarioConfig {
        dt: 0.01,
        t_end: 0.5,
        ..scalar_scenario(1.0, 1.0, 1.0)
    };
    assert_eq!(manifest(&out)["scenario_digest"], overridden.digest());
}

#[test]
fn compare_random_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = random_scenario(&mut rng_from_seed(31), 3, 1.0, 1e-3);
    let config = write(dir.path(), "s.json", &cfg.to_json());
    let out = dir.path().join("cmp");
    let (code, stderr) = run_bin(
        &[
            "compare",
            "--config",
            &config,
            "--output",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0, "{stderr}");
    let (header, rows) = read_csv(out.join("compare.csv"));
    assert_eq!(header, ["pair", "max_distance"]);
    // Time-dependent coefficients: no series run, one pair.
    assert_eq!(rows.len(), 1);
    assert!(rows[0][1] <= 1e-6);
    assert_outputs_exist(&out);
}

#[test]
fn compare_includes_series_for_constant_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        t_end: 0.5,
        ..scalar_scenario(0.4, 0.8, 1.1)
    };
    let config = write(dir.path(), "s.json", &cfg.to_json());
    let out = dir.path().join("cmp");
    assert_eq!(
        run_bin(
            &[
                "compare",
                "--config",
                &config,
                "--output",
                out.to_str().unwrap()
            ],
            &[]
        )
        .0,
        0
    );
    let text = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let pairs: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        pairs,
        ["direct-factorized", "direct-series", "factorized-series"]
    );
}

#[test]
fn compare_fails_when_solvers_disagree() {
    // dt = 0.25 leaves the direct solver far from the factorized one.
    let dir = tempfile::tempdir().unwrap();
    let cfg = random_scenario(&mut rng_from_seed(32), 3, 1.0, 0.25);
    let config = write(dir.path(), "s.json", &cfg.to_json());
    let out = dir.path().join("cmp");
    let (code, stderr) = run_bin(
        &[
            "compare",
            "--config",
            &config,
            "--output",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 1);
    assert!(stderr.contains("direct-factorized"));
    assert_eq!(manifest(&out)["status"][0]["passed"], false);
}

#[test]
fn invalid_configs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let not_pd = ScenarioConfig {
        hamiltonian: HermitianProfile::constant(HermitianMatrix::from_real_diag(&[-1.0, 1.0])),
        initial_k: ComplexMatrix::identity(2),
        ..scalar_scenario(1.0, 1.0, 1.0)
    };
    let cases = [
        ("not_pd.json", not_pd.to_json()),
        ("broken.json", "{\"hbar\": 1.0,".to_owned()),
        (
            "bad_dt.json",
            ScenarioConfig {
                dt: 2.0,
                ..scalar_scenario(1.0, 1.0, 1.0)
            }
            .to_json(),
        ),
    ];
    for (name, text) in cases {
        let config = write(dir.path(), name, &text);
        let out = dir.path().join("out");
        let (code, stderr) = run_bin(
            &[
                "simulate",
                "--config",
                &config,
                "--output",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code, 3, "{name}: {stderr}");
    }
    let config = write(
        dir.path(),
        "ok.json",
        &scalar_scenario(1.0, 1.0, 1.0).to_json(),
    );
    let (code, _) = run_bin(
        &[
            "simulate",
            "--config",
            &config,
            "--output",
            dir.path().join("o").to_str().unwrap(),
        ],
        &[("MESODYN_PD_FLOOR", "2")],
    );
    assert_eq!(code, 3);
}

#[test]
fn rank_loss_exits_4_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        hamiltonian: HermitianProfile::constant(HermitianMatrix::from_real_diag(&[0.01, 0.01])),
        field: FieldProfile::constant(3.0),
        initial_k: ComplexMatrix::from_real_diag(&[1.0, 0.6]),
        t_end: 5.0,
        dt: 0.5,
        output_stride: 1,
        ..scalar_scenario(1.0, 1.0, 1.0)
    };
    let config = write(dir.path(), "s.json", &cfg.to_json());
    let out = dir.path().join("out");
    let args = [
        "simulate",
        "--config",
        &config,
        "--solver",
        "direct",
        "--output",
        out.to_str().unwrap(),
    ];
    let (code, stderr) = run_bin(&args, &[("MESODYN_PD_FLOOR", "0.5")]);
    assert_eq!(code, 4, "{stderr}");
    assert!(stderr.contains("near-singular"));
    let (_, rows) = read_csv(out.join("trajectory_direct.csv"));
    assert!(!rows.is_empty() && rows.last().unwrap()[0] < 5.0);
    assert_eq!(manifest(&out)["status"][0]["passed"], false);
    assert_outputs_exist(&out);

    // The factorized solver has no such problem on the same scenario.
    let (code, _) = run_bin(
        &[
            "simulate",
            "--config",
            &config,
            "--output",
            out.to_str().unwrap(),
        ],
        &[("MESODYN_PD_FLOOR", "0.5")],
    );
    assert_eq!(code, 0);
}

#[test]
fn io_failures_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let (code, _) = run_bin(
        &[
            "simulate",
            "--config",
            missing.to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 5);
    let blocker = write(dir.path(), "file", "x");
    let (code, _) = run_bin(&["verify", "--output", &format!("{blocker}/sub")], &[]);
    assert_eq!(code, 5);
}

#[test]
fn critical_emits_matrix_and_residual() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "c.json",
        r#"{"hamiltonian": {"rows": 2, "cols": 2, "re": [1, 0, 0, 2], "im": [0, 0, 0, 0]}, "nu": 3, "b": 1}"#,
    );
    let out = dir.path().join("c");
    assert_eq!(
        run_bin(
            &[
                "critical",
                "--config",
                &config,
                "--output",
                out.to_str().unwrap()
            ],
            &[]
        )
        .0,
        0
    );
    let (header, rows) = read_csv(out.join("critical_point.csv"));
    assert_eq!(header, ["i", "j", "re", "im"]);
    let expected = [0.5f64.sqrt(), 0.0, 0.0, 1.0];
    for (row, e) in rows.iter().zip(expected) {
        assert!((row[2] - e).abs() < 1e-14 && row[3].abs() < 1e-14);
    }
    let (_, res) = read_csv(out.join("critical_residual.csv"));
    assert!(res[0][1] <= 1e-11);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"hamiltonian": {"rows": 1, "cols": 1, "re": [2], "im": [0]}, "nu": 1, "b": 1}"#,
    );
    assert_eq!(
        run_bin(
            &[
                "critical",
                "--config",
                &bad,
                "--output",
                out.to_str().unwrap()
            ],
            &[]
        )
        .0,
        3
    );
}

#[test]
fn flux_emits_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let s = 0.5f64.sqrt();
    let config = write(
        dir.path(),
        "f.json",
        &format!(
            r#"{{"k": {{"rows": 2, "cols": 2, "re": [1, 0, 0, 1], "im": [0, 0, 0, 0]}},
                "upsilon": {{"re": [{s}, {s}], "im": [0, 0]}}, "total_flux": 2}}"#
        ),
    );
    let out = dir.path().join("f");
    assert_eq!(
        run_bin(
            &[
                "flux",
                "--config",
                &config,
                "--output",
                out.to_str().unwrap()
            ],
            &[]
        )
        .0,
        0
    );
    let (header, rows) = read_csv(out.join("flux.csv"));
    assert_eq!(header, ["index", "flux"]);
    assert!(rows.iter().all(|r| (r[1] - 1.0).abs() < 1e-15));

    let zero = write(
        dir.path(),
        "z.json",
        r#"{"k": {"rows": 1, "cols": 1, "re": [0], "im": [0]}, "upsilon": {"re": [1], "im": [0]}, "total_flux": 1}"#,
    );
    assert_eq!(
        run_bin(
            &["flux", "--config", &zero, "--output", out.to_str().unwrap()],
            &[]
        )
        .0,
        3
    );
}

fn moving_scenario_json(t_end: f64) -> String {
    let basis = |rows: usize| {
        let mut re = vec![0.0; rows * 2];
        re[0] = 1.0;
        re[3] = 1.0;
        serde_json::json!({"rows": rows, "cols": 2, "re": re, "im": vec![0.0; rows * 2]})
    };
    serde_json::json!({
        "hamiltonian": {"kind": "constant", "matrix": {
            "rows": 4, "cols": 4,
            "re": [0.5, 0.1, 0, 0, 0.1, 0.9, 0, 0, 0, 0, 1.3, 0.2, 0, 0, 0.2, 1.7],
            "im": [0, 0.05, 0, 0, -0.05, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        }},
        "field": {"kind": "sinusoid", "amplitude": 0.2, "frequency": 0.5, "offset": 0.8},
        "t_end": t_end,
        "dt": 1e-3,
        "output_stride": 10,
        "ambient_dim": 4,
        "rank": 2,
        "psi0": basis(4),
        "phi0": basis(3),
        "coeff_a0": {"rows": 2, "cols": 2, "re": [1.0, 0.2, 0.0, 0.8], "im": [0.1, 0.0, -0.3, 0.0]}
    })
    .to_string()
}

#[test]
fn moving_emits_residual_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "m.json", &moving_scenario_json(1.0));
    for (name, extra) in [("corrected", None), ("literal", Some("--literal-atime"))] {
        let out = dir.path().join(name);
        let mut args = vec![
            "moving",
            "--config",
            &config,
            "--output",
            out.to_str().unwrap(),
        ];
        args.extend(extra);
        let (code, stderr) = run_bin(&args, &[]);
        assert_eq!(code, 0, "{name}: {stderr}");
        let (header, rows) = read_csv(out.join("moving_residual.csv"));
        assert_eq!(
            header,
            ["t", "weak_residual", "image_drift", "radial_drift"]
        );
        assert_eq!(rows.len(), 101);
        assert!(rows.iter().all(|r| r[2] <= 1e-10));
        assert_outputs_exist(&out);
    }
    // The two coefficient forms start from different operators.
    let a = std::fs::read_to_string(dir.path().join("corrected/moving_residual.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("literal/moving_residual.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn verify_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let (code, stderr) = run_bin(&["verify", "--output", out.to_str().unwrap()], &[]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(text.starts_with("check,value,threshold,bound,passed,error\n"));
    assert_eq!(text.lines().count(), 19);
    assert!(text.lines().skip(1).all(|l| l.contains(",true,")));
    let m = manifest(&out);
    assert_eq!(m["outputs"], serde_json::json!(["verify.csv"]));
    assert!(m.get("wall_time").is_none());
    assert!(m["tool_version"].as_str().unwrap().starts_with("mesodyn "));
}
