use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rydion_cli::output::{Format, Report, Table};

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/quick.toml")
}

fn rydion(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydion"))
        .env_remove("RYDION_CONFIG")
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn table(out: &Output) -> Table {
    Table::from_csv(&stdout_ok(out)).unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn trap_info_echoes_typical_values() {
    let out = rydion(&reference_config(), &["trap-info", "--format", "json"]);
    let Report::TrapInfo(info) = Report::from_json(&stdout_ok(&out)).unwrap() else {
        panic!("expected a trap_info report");
    };
    assert!(
        (info.grad_rf / 8.46e8 - 1.0).abs() < 0.01,
        "A = {}",
        info.grad_rf
    );
    assert!(
        (info.grad_dc / 6.81e6 - 1.0).abs() < 0.01,
        "B = {}",
        info.grad_dc
    );
    assert!(
        (info.mathieu_q - 0.29).abs() < 0.01,
        "q = {}",
        info.mathieu_q
    );
    assert!((info.secular_x_hz - 1.76e6).abs() < 1.0);
    assert_eq!(info.states.len(), 2);
    assert!(info.warnings.is_empty());
}

#[test]
fn fig1b_slopes_match_stark_theory() {
    let t = table(&rydion(&reference_config(), &["figure", "fig1b"]));
    let n = t.numbers("n").unwrap();
    let sx = slope(&n, &t.numbers("shift_x_hz").unwrap());
    let sy = slope(&n, &t.numbers("shift_y_hz").unwrap());
    assert!((sx + 40.53e3).abs() < 10.0, "x slope {sx}");
    assert!((sy + 42.00e3).abs() < 10.0, "y slope {sy}");

    let bare = table(&rydion(
        &reference_config(),
        &["--no-mm-correction", "figure", "fig1b"],
    ));
    let bx = slope(&n, &bare.numbers("shift_x_hz").unwrap());
    let ratio = sx / bx;
    assert!((1.015..=1.017).contains(&ratio), "correction ratio {ratio}");
}

#[test]
fn mm_limit_reproduces_hand_value() {
    let out = rydion(&reference_config(), &["mm-limit", "--format", "json"]);
    let Report::FieldLimit(f) = Report::from_json(&stdout_ok(&out)).unwrap() else {
        panic!("expected a field_limit report");
    };
    assert!((f.residual_field_v_per_m - 4.8646).abs() < 1e-3);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = quick_config();
    for args in [
        &["spectrum", "synthesize"][..],
        &["figure", "fig2b"],
        &["figure", "fig4"],
        &["rabi"],
    ] {
        let a = stdout_ok(&rydion(&cfg, args));
        let b = stdout_ok(&rydion(&cfg, args));
        assert_eq!(a, b, "{args:?}");
    }
    let a = stdout_ok(&rydion(&cfg, &["--seed", "7", "spectrum", "synthesize"]));
    let b = stdout_ok(&rydion(&cfg, &["--seed", "8", "spectrum", "synthesize"]));
    assert_ne!(a, b);
}

#[test]
fn tables_are_sorted_by_leading_column() {
    let cfg = quick_config();
    for args in [
        &["figure", "fig3"][..],
        &["figure", "fig4"],
        &["spectrum", "synthesize"],
        &["fc-matrix", "--n-max", "5"],
    ] {
        let t = table(&rydion(&cfg, args));
        let lead = t.numbers(&t.columns[0]).unwrap();
        assert!(lead.windows(2).all(|w| w[0] <= w[1]), "{args:?}");
    }
}

#[test]
fn json_output_round_trips_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let scan = dir.path().join("scan.csv");
    let sweep = dir.path().join("sweep.csv");
    stdout_ok(&rydion(
        &cfg,
        &["--out", scan.to_str().unwrap(), "spectrum", "synthesize"],
    ));
    stdout_ok(&rydion(
        &cfg,
        &["--out", sweep.to_str().unwrap(), "figure", "fig2b"],
    ));

    let runs: Vec<Vec<&str>> = vec![
        vec!["trap-info"],
        vec!["stark-shift"],
        vec!["fc-matrix", "--n-max", "4"],
        vec!["spectrum", "synthesize"],
        vec!["spectrum", "fit", "--input", scan.to_str().unwrap()],
        vec!["micromotion-fit", "--input", sweep.to_str().unwrap()],
        vec!["mm-limit"],
        vec!["rabi", "--full"],
        vec!["figure", "fig1b"],
        vec!["figure", "fig2b"],
        vec!["figure", "fig3"],
        vec!["figure", "fig4"],
        vec!["validate"],
    ];
    for mut args in runs {
        args.extend(["--format", "json"]);
        let json = stdout_ok(&rydion(&cfg, &args));
        let report = Report::from_json(&json).unwrap_or_else(|e| panic!("{args:?}: {}", e.message));
        assert_eq!(report.render(Format::Json).unwrap(), json, "{args:?}");

        args.truncate(args.len() - 2);
        let csv = stdout_ok(&rydion(&cfg, &args));
        assert_eq!(report.to_table().to_csv().unwrap(), csv, "{args:?}");
    }
}

#[test]
fn out_flag_writes_what_stdout_would_show() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trap.json");
    let cfg = reference_config();
    let quiet = rydion(
        &cfg,
        &[
            "--format",
            "json",
            "--out",
            path.to_str().unwrap(),
            "trap-info",
        ],
    );
    assert!(stdout_ok(&quiet).is_empty());
    let shown = stdout_ok(&rydion(&cfg, &["--format", "json", "trap-info"]));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), shown);
}

#[test]
fn config_path_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_rydion"))
        .env("RYDION_CONFIG", reference_config())
        .arg("trap-info")
        .output()
        .unwrap();
    assert!(stdout_ok(&out).contains("mathieu_q"));
}

#[test]
fn synthesized_scan_fits_back_to_its_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    let scan = dir.path().join("scan.csv");
    stdout_ok(&rydion(
        &cfg,
        &["--out", scan.to_str().unwrap(), "spectrum", "synthesize"],
    ));
    let out = rydion(
        &cfg,
        &[
            "--format",
            "json",
            "spectrum",
            "fit",
            "--input",
            scan.to_str().unwrap(),
        ],
    );
    let Report::Fit(fit) = Report::from_json(&stdout_ok(&out)).unwrap() else {
        panic!("expected a fit report");
    };
    let get = |name: &str| fit.parameters.iter().find(|p| p.name == name).unwrap();
    for (name, truth) in [("rabi", 60e3), ("linewidth", 150e3), ("background", 500.0)] {
        let p = get(name);
        assert!(
            (p.value - truth).abs() < 5.0 * p.sigma,
            "{name}: {} +- {}",
            p.value,
            p.sigma
        );
    }
    // binomial weighting: reduced chi-square near one
    let reduced = fit.chi_squared / fit.dof as f64;
    assert!((0.8..1.2).contains(&reduced), "chi2/dof {reduced}");
}

#[test]
fn micromotion_fit_finds_the_sweep_null() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config();
    let sweep = dir.path().join("sweep.csv");
    stdout_ok(&rydion(
        &cfg,
        &[
            "--out",
            sweep.to_str().unwrap(),
            "figure",
            "fig2b",
            "--null",
            "0.4",
            "--points",
            "15",
        ],
    ));
    let out = rydion(
        &cfg,
        &[
            "--format",
            "json",
            "micromotion-fit",
            "--input",
            sweep.to_str().unwrap(),
        ],
    );
    let Report::TurningPoint(tp) = Report::from_json(&stdout_ok(&out)).unwrap() else {
        panic!("expected a turning_point report");
    };
    let err = tp.errors.expect("sigma column present");
    assert!(
        (tp.control - 0.4).abs() < 5.0 * err.control,
        "{} +- {}",
        tp.control,
        err.control
    );
}
