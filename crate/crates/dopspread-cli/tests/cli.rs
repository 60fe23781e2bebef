//! End-to-end tests of the command-line binary: argument handling, config
//! resolution, CSV shape, determinism, and exit codes.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dopspread"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dopspread"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

/// All lines except the volatile `# generated_unix:` stamp.
fn stable_lines(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with("# generated_unix:"))
        .map(str::to_string)
        .collect()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(3) // config echo, timestamp, header
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn help_version_and_key_listing_exit_cleanly() {
    for args in [&["--help"][..], &["-h"], &[]] {
        let out = run(args);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains("USAGE"));
    }
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("dopspread "));
    for scenario in ["psd", "window", "spread", "weights", "ser", "sweep"] {
        let out = run(&[scenario, "--help-keys"]);
        assert_eq!(code(&out), 0, "help-keys failed for {scenario}");
        assert!(stdout(&out).contains("theta_l_deg") || scenario == "sweep");
        assert!(stdout(&out).lines().count() > 3);
    }
}

#[test]
fn usage_problems_exit_with_code_two() {
    let cases: &[&[&str]] = &[
        &["bogus"],
        &["spread", "--no_such_key", "1"],
        &["spread", "--m", "abc"],
        &["spread", "--m"],
        &["spread", "stray"],
        &["psd", "--grid_points", "1"],
        &["ser", "--snr_db", "20,,40"],
        &["spread", "--weights", "sideways"],
        &["spread", "--window", "hamming"],
        &["spread", "--config", "/nonexistent/path.cfg"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(code(&out), 2, "expected usage failure for {args:?}");
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn domain_problems_exit_with_code_two() {
    let out = run(&["spread", "--theta_l_deg", "90", "--theta_r_deg", "30"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("domain error"));

    // A narrow region with the full-half-plane closed form: support mismatch.
    let out = run(&[
        "window",
        "--window",
        "equi_cos_jakes",
        "--theta_l_deg",
        "60",
        "--theta_r_deg",
        "120",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("domain error"));
}

#[test]
fn numeric_failures_exit_with_code_three() {
    // A kilometre-scale element spacing makes the moment integrand oscillate
    // far beyond the quadrature's panel budget.
    let out = run(&["spread", "--m", "2", "--d_over_lambda", "1e8"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("numeric error"));
}

#[test]
fn bad_thread_count_exits_with_code_two() {
    let out = run_env(&["spread", "--m", "2"], "DOPSPREAD_THREADS", "zero");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("DOPSPREAD_THREADS"));
    let out = run_env(&["spread", "--m", "2"], "DOPSPREAD_THREADS", "0");
    assert_eq!(code(&out), 2);
    let out = run_env(&["spread", "--m", "2"], "DOPSPREAD_THREADS", "1");
    assert_eq!(code(&out), 0);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("dopspread-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("case.cfg");
    std::fs::write(&cfg, "# spacing below default\nm = 8\nd_over_lambda = 0.3\n").unwrap();

    let out = run(&["spread", "--config", cfg.to_str().unwrap(), "--m", "12"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let echo = text.lines().next().unwrap();
    assert!(echo.contains(" m=12 "), "override should win: {echo}");
    assert!(echo.contains(" d_over_lambda=0.3 "), "file value should hold: {echo}");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "12");
    assert_eq!(rows[0][1], "2.9999999999999999e-1");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn output_file_matches_stdout_except_for_the_timestamp() {
    let dir = std::env::temp_dir().join(format!("dopspread-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("w.csv");

    let direct = run(&["weights", "--m", "4"]);
    assert_eq!(code(&direct), 0);
    let to_file = run(&["weights", "--m", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&to_file), 0);
    assert!(stdout(&to_file).is_empty());
    let file_text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(stable_lines(&stdout(&direct)), stable_lines(&file_text));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn repeated_runs_are_identical_except_for_the_timestamp() {
    let args = [
        "ser",
        "--m",
        "4",
        "--rx_m",
        "2",
        "--q",
        "4",
        "--scatterers",
        "16",
        "--frames",
        "2",
        "--snr_db",
        "10,20",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "stderr: {}", stderr(&a));
    assert_eq!(code(&b), 0);
    assert_eq!(stable_lines(&stdout(&a)), stable_lines(&stdout(&b)));
    let rows = data_rows(&stdout(&a));
    assert_eq!(rows.len(), 2, "one row per SNR point");
    assert_eq!(rows[0].len(), 8, "paired equal/optimal columns");
    // A different seed must change the sampled channel.
    let mut seeded: Vec<&str> = args.to_vec();
    seeded.extend(["--seed", "7"]);
    let c = run(&seeded);
    assert_eq!(code(&c), 0);
    assert_ne!(stable_lines(&stdout(&a)), stable_lines(&stdout(&c)));
}

#[test]
fn optimal_weight_magnitudes_match_the_reference_profile() {
    let expected = [0.384, 0.656, 0.876, 1.000, 1.000, 0.876, 0.656, 0.384];
    let out = run(&["weights"]);
    assert_eq!(code(&out), 0);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 8);
    for (row, want) in rows.iter().zip(expected) {
        let got: f64 = row[3].parse().unwrap();
        assert!(
            (got - want).abs() < 5e-3,
            "element {} magnitude {got} vs {want}",
            row[0]
        );
    }
}

#[test]
fn analytic_psd_reports_the_exact_centre_value() {
    // Equal weights give |G(0)|² = 1 and the half-plane cosine window has
    // W(0) = π, so P(0) = π / ω_d = 1 / (2 f_d).
    let out = run(&["psd", "--grid_points", "21", "--f_d_hz", "1000"]);
    assert_eq!(code(&out), 0);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 21);
    let centre = rows
        .iter()
        .find(|r| r[0].parse::<f64>().unwrap() == 0.0)
        .expect("grid should contain 0");
    let value: f64 = centre[1].parse().unwrap();
    assert!((value - 5e-4).abs() < 1e-12, "P(0) = {value}");
}

#[test]
fn window_scenario_marks_divergent_points_as_inf() {
    let out = run(&["window", "--window", "equi_angle_jakes", "--grid_points", "5"]);
    assert_eq!(code(&out), 0);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[2][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[2][1], "inf");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0, "outside support");
}

#[test]
fn monte_carlo_psd_adds_a_numerical_column() {
    let out = run(&[
        "psd",
        "--realizations",
        "4",
        "--n_points",
        "256",
        "--m",
        "2",
        "--q",
        "8",
        "--scatterers",
        "32",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(
        text.lines().nth(2).unwrap(),
        "omega_tilde,psd_numerical,psd_analytic"
    );
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 512, "two points per retained lag");
    for row in &rows {
        assert!(row[1].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn sweep_rows_cover_the_whole_grid_and_optimal_never_loses() {
    let out = run(&[
        "sweep",
        "--m_list",
        "4,8",
        "--d_over_lambda_list",
        "0.25,0.45",
        "--layout_list",
        "equi_cos,equi_angle",
    ]);
    assert_eq!(code(&out), 0);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 8);
    for row in &rows {
        let equal: f64 = row[3].parse().unwrap();
        let optimal: f64 = row[4].parse().unwrap();
        assert!(
            optimal <= equal * (1.0 + 1e-9),
            "optimal spread should not exceed equal: {row:?}"
        );
    }
}

#[test]
fn the_config_header_reproduces_the_file() {
    // The `# config:` line carries every resolved key; feeding those very
    // values back as flags must regenerate the output byte for byte,
    // timestamp aside.
    let first = run(&[
        "weights",
        "--m",
        "6",
        "--d_over_lambda",
        "0.35",
        "--theta_l_deg",
        "20",
        "--theta_r_deg",
        "140",
        "--window",
        "equi_cos_closed",
    ]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let text = stdout(&first);
    let header = text
        .lines()
        .next()
        .expect("output should start with the config echo");
    assert!(header.starts_with("# config: "));

    let mut scenario = None;
    let mut args: Vec<String> = Vec::new();
    for token in header.trim_start_matches("# config: ").split_whitespace() {
        let (key, value) = token.split_once('=').expect("header tokens are key=value");
        if key == "scenario" {
            scenario = Some(value.to_string());
        } else {
            args.push(format!("--{key}"));
            args.push(value.to_string());
        }
    }
    let mut replay: Vec<String> = vec![scenario.expect("header names the scenario")];
    replay.extend(args);
    let replay_refs: Vec<&str> = replay.iter().map(String::as_str).collect();
    let second = run(&replay_refs);
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert_eq!(stable_lines(&text), stable_lines(&stdout(&second)));
}
