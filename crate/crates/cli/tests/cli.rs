use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nhmetro");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn nhmetro(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, out: &Path) -> Output {
    nhmetro(&[
        cmd,
        "--quiet",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn run_example(cmd: &str, name: &str) -> PathBuf {
    let out = scratch(&format!("{name}.csv"));
    let o = run_config(cmd, &configs_dir().join(format!("{name}.json")), &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{name}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    out
}

/// Header plus rows keyed by column name.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let k = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn write_config(name: &str, json: &str) -> PathBuf {
    let p = scratch(name);
    fs::write(&p, json).unwrap();
    p
}

const GOLDEN: [(&str, &str); 12] = [
    ("qfi", "pt_s_qfi"),
    ("qfi", "pt_alpha_qfi"),
    ("qfi", "kappa_qfi"),
    ("qfi", "pt_s_long_time_qfi"),
    ("estimate", "pt_s_estimate"),
    ("estimate", "pt_alpha_estimate"),
    ("estimate", "kappa_estimate"),
    ("estimate", "probe_angle_estimate"),
    ("estimate", "smoke_estimate"),
    ("optimal", "probe_angle_optimal"),
    ("dilate", "pt_dilate"),
    ("dilate", "ramsey_dilate"),
];

/// Set `NHMETRO_BLESS=1` to rewrite the committed CSVs.
#[test]
fn outputs_match_golden_files() {
    let bless = std::env::var_os("NHMETRO_BLESS").is_some();
    for (cmd, name) in GOLDEN {
        let out = run_example(cmd, name);
        let mut files = vec![(out.clone(), golden_dir().join(format!("{name}.csv")))];
        if name == "smoke_estimate" {
            let trials = scratch(&format!("{name}_trials.csv"));
            files.push((trials, golden_dir().join(format!("{name}_trials.csv"))));
        }
        for (got, want) in files {
            let got = fs::read(&got).unwrap();
            if bless {
                fs::write(&want, &got).unwrap();
                continue;
            }
            let want_bytes = fs::read(&want).unwrap_or_else(|_| panic!("missing golden {}", want.display()));
            assert!(got == want_bytes, "{} differs from {}", name, want.display());
        }
    }
}

#[test]
fn qfi_columns_match_tabulated_values() {
    let cases: [(&str, &[f64]); 3] = [
        (
            "pt_s_qfi",
            &[
                0.4682, 0.6406, 0.7624, 0.9236, 1.1933, 1.6875, 2.6743, 4.8245, 9.3179, 13.3574,
            ],
        ),
        (
            "pt_alpha_qfi",
            &[0.4445, 0.8080, 1.2604, 1.8711, 2.7872, 4.3343, 7.2462, 12.4451, 15.5728],
        ),
        (
            "kappa_qfi",
            &[
                0.1110, 0.9762, 1.3985, 1.1274, 1.3392, 2.7642, 3.2765, 2.3565, 2.4002, 4.1726,
            ],
        ),
    ];
    for (name, want) in cases {
        let out = run_example("qfi", name);
        let got = column(&out, "sqrtF");
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-3, "{name}: {g} vs {w}");
        }
        for (f, c) in column(&out, "F").iter().zip(column(&out, "F_closed_form")) {
            assert!((f - c).abs() <= 1e-9 * f.max(1.0));
        }
        assert!(column(&out, "route_deviation").iter().all(|d| *d < 1e-5));
    }
}

#[test]
fn qfi_at_time_zero_is_trivial() {
    let cfg = write_config(
        "t0.json",
        r#"{"model": {"family": "kappa", "kappa": 2}, "time_grid": {"start": 0, "stop": 0, "steps": 1}}"#,
    );
    let out = scratch("t0.csv");
    assert_eq!(run_config("qfi", &cfg, &out).status.code(), Some(0));
    assert_eq!(column(&out, "F"), vec![0.0]);
    assert_eq!(column(&out, "K"), vec![1.0]);
    assert_eq!(column(&out, "I"), vec![0.0]);
}

#[test]
fn probe_sweep_probabilities_and_precision() {
    let want = [
        0.0872, 0.1074, 0.1660, 0.2573, 0.3724, 0.5000, 0.6276, 0.7427, 0.8340, 0.8926, 0.9128,
    ];
    let out = run_example("estimate", "probe_angle_estimate");
    for (g, w) in column(&out, "p_true").iter().zip(want) {
        assert!((g - w).abs() < 1e-3, "{g} vs {w}");
    }
    let phi = column(&out, "phi_deg");
    assert_eq!(phi.first(), Some(&0.0));
    assert_eq!(phi.last(), Some(&45.0));
}

#[test]
fn kappa_estimate_reaches_information_bound() {
    let out = run_example("estimate", "kappa_estimate");
    let precision = column(&out, "precision");
    let last = precision.last().unwrap();
    assert!((last / 4.1726 - 1.0).abs() < 0.1, "{last}");
}

#[test]
fn optimal_sweep_flags_saturation() {
    let out = run_example("optimal", "probe_angle_optimal");
    let residual = column(&out, "residual");
    let precision = column(&out, "precision_ep");
    let sqrt_f = column(&out, "sqrtF");
    // rows are 0°, 4.5°, …, 45°
    assert!(residual[0] < 1e-6 && residual[10] < 1e-6);
    assert!((precision[0] * 0.3813 - 1.0).abs() < 0.01);
    assert!((precision[0] / sqrt_f[0] - 1.0).abs() < 1e-5);
    assert!(residual[4] > 0.01);
    assert!((precision[4] * 1.6165 - 1.0).abs() < 0.01);
}

#[test]
fn dilation_rows_hold_invariants() {
    let out = run_example("dilate", "pt_dilate");
    assert!(column(&out, "fidelity").iter().all(|f| *f >= 1.0 - 1e-8));
    assert!(column(&out, "norm_drift").iter().all(|d| *d < 1e-9));
    let out = run_example("dilate", "ramsey_dilate");
    let p = column(&out, "success_prob");
    assert!(p.iter().all(|x| (x - p[0]).abs() < 1e-12));
}

#[test]
fn smoke_run_emits_two_estimates() {
    let out = run_example("estimate", "smoke_estimate");
    let (_, rows) = read_csv(&scratch("smoke_estimate_trials.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(read_csv(&out).1.len(), 1);
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = configs_dir().join("smoke_estimate.json");
    let (a, b, c) = (scratch("seed_a.csv"), scratch("seed_b.csv"), scratch("seed_c.csv"));
    let args = |out: &Path, seed: &str| {
        nhmetro(&[
            "estimate",
            "--quiet",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ])
    };
    args(&a, "5");
    args(&b, "5");
    args(&c, "6");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn config_errors_exit_one_with_field_path() {
    let cases = [
        (
            r#"{"model": {"family": "pt", "s": 1, "alpha": "pi/4", "estimate": "s"}, "time_grid": {"start": 0, "stop": 1, "steps": 0}}"#,
            "time_grid.steps",
        ),
        (
            r#"{"model": {"family": "kappa", "kappa": 2}, "time_grid": {"start": 0, "stop": 1, "steps": 2}, "colour": 1}"#,
            "colour",
        ),
        (
            r#"{"model": {"family": "kappa", "kappa": "two"}, "time_grid": {"start": 0, "stop": 1, "steps": 2}}"#,
            "kappa",
        ),
        (
            r#"{"model": {"family": "kappa", "kappa": 2}, "time_grid": {"start": -1, "stop": 1, "steps": 2}}"#,
            "time_grid.start",
        ),
        (
            r#"{"model": {"family": "kappa", "kappa": 2}, "probe": {"angle": "18deg"}, "measurement": {"basis": 2}, "time_grid": {"start": 0, "stop": 1, "steps": 2}}"#,
            "measurement.basis",
        ),
    ];
    for (k, (json, path)) in cases.iter().enumerate() {
        let cfg = write_config(&format!("bad{k}.json"), json);
        let o = nhmetro(&["validate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "case {k}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(path), "case {k}: {err}");
    }
    let cfg = configs_dir().join("pt_s_qfi.json");
    let o = nhmetro(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("estimation"));
    assert_eq!(nhmetro(&["qfi"]).status.code(), Some(1));
    assert_eq!(
        nhmetro(&["validate", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(0)
    );
}

#[test]
fn failed_rows_set_exit_status() {
    // at t = 0 the outcome carries no information about s
    let template = r#"{"model": {"family": "pt", "s": 1, "alpha": "pi/4", "estimate": "s"},
        "time_grid": {"start": 0, "stop": STOP, "steps": STEPS},
        "estimation": {"n": 500, "trials": 20, "seed": 1, "bracket": [0.8, 1.2]}}"#;
    let all = write_config("fail_all.json", &template.replace("STOP", "0").replace("STEPS", "1"));
    let out = scratch("fail_all.csv");
    assert_eq!(run_config("estimate", &all, &out).status.code(), Some(2));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows[0].last().unwrap(), "degenerate");
    let stop = format!("{}", 5.0 * PI / 8.0);
    let some = write_config("fail_some.json", &template.replace("STOP", &stop).replace("STEPS", "2"));
    let out = scratch("fail_some.csv");
    assert_eq!(run_config("estimate", &some, &out).status.code(), Some(3));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].last().unwrap(), "ok");
}
