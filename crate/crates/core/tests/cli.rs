use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_retrotrack");

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path
}

const BASE: &str = r#"
[geometry]
z = 5000.0
a_gs = 0.1
a_re = 0.05
visibility = 10000.0
w = 10.0
sigma_s = 1.0
rho_refl = 0.5
p_th = 1e-8

[turbulence]
preset = "weak"

[layout.ring]
kind = "circular"
count = 4
radius = 1.4142135623730951
"#;

fn with_sweep(extra: &str, values: &str) -> String {
    format!("{BASE}{extra}\n[sweep]\nvariable = \"p_gs\"\nunit = \"dBm\"\nvalues = [{values}]\n")
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(col).unwrap_or("").to_string()).collect()
}

fn floats(col: &[String]) -> Vec<f64> {
    col.iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn presets_validate() {
    for name in ["fig2", "fig3", "fig4", "fig5"] {
        let path = presets().join(format!("{name}.toml"));
        let out = run(&["validate", "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn empty_sweep_is_a_validation_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &with_sweep("", ""));
    let out_dir = dir.path().join("out");
    let out = run(&["outage", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let body = with_sweep("", "0.0").replace("rho_refl = 0.5", "rho_refl = 0.5\nrho = 0.5");
    let config = write_config(dir.path(), &body);
    let out = run(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scenario.toml:10:") && err.contains("`rho`"), "{err}");
}

#[test]
fn zero_samples_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &with_sweep("", "0.0"));
    let out_dir = dir.path().join("out");
    let out =
        run(&["outage", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--samples", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn manifest_reruns_bit_identically_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &with_sweep("[baseline]\npower_fractions = [1.0, 0.5]\n", "-6.0, -3.0, 0.0"));
    let first = dir.path().join("a");
    let out = run(&[
        "outage",
        "--config",
        config.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
        "--samples",
        "150000",
        "--workers",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let second = dir.path().join("b");
    let manifest = first.join("manifest.toml");
    let out =
        run(&["outage", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--workers", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for file in ["outage_ring.csv", "baseline.csv"] {
        let a = fs::read(first.join(file)).unwrap();
        let b = fs::read(second.join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
    assert!(first.join("timings.csv").exists());
}

#[test]
fn outage_is_monotone_and_fits_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &with_sweep("", "-8.0, -6.0, -4.0, -2.0, 0.0, 2.0"));
    let out_dir = dir.path().join("out");
    let out = run(&[
        "outage",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--mode",
        "analytic-exact",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = out_dir.join("outage_ring.csv");
    let outage = floats(&csv_column(&csv, "outage_analytic"));
    assert!(outage.windows(2).all(|w| w[1] < w[0]), "{outage:?}");
    assert!(csv_column(&csv, "status").iter().all(|s| s == "ok"));
    assert!(csv_column(&csv, "outage_empirical").iter().all(|s| s.is_empty()));
    assert!(!out_dir.join("baseline.csv").exists());
}

#[test]
fn infeasible_fit_marks_rows_and_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let body = with_sweep("", "0.0, 6.0")
        .replace("preset = \"weak\"", "preset = \"moderate\"")
        .replace("count = 4\nradius = 1.4142135623730951", "count = 8\nradius = 1.8477590650225735");
    let config = write_config(dir.path(), &body);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "outage",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--mode",
        "analytic-approx",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let status = csv_column(&out_dir.join("outage_ring.csv"), "status");
    assert_eq!(status.len(), 2);
    assert!(status.iter().all(|s| s.contains("alpha-mu")), "{status:?}");
}

#[test]
fn moment_report_orders_the_approximations() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &with_sweep("[moments]\nratios = [0.1, 0.05, 0.02, 0.01]\n", "0.0"));
    let out_dir = dir.path().join("out");
    let out = run(&["moments", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = out_dir.join("moments_ring.csv");
    let order = csv_column(&csv, "order");
    let approx = floats(&csv_column(&csv, "rel_error_approx"));
    let first = floats(&csv_column(&csv, "rel_error_first_order"));
    assert_eq!(order.len(), 12);
    for k in ["1", "2", "4"] {
        let rows: Vec<usize> = (0..order.len()).filter(|&i| order[i] == k).collect();
        assert_eq!(rows.len(), 4);
        for pair in rows.windows(2) {
            assert!(approx[pair[1]] < approx[pair[0]], "order {k}");
        }
        for &i in &rows {
            assert!(approx[i] < first[i], "order {k} row {i}");
        }
    }
}
