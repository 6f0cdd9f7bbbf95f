use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gsprobe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsprobe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn gsprobe")
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["run", "--set", "model.colour=blue"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.colour"));
    assert!(!dir.path().join("record.json").exists());
}

#[test]
fn stop_field_outside_ramp_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["sweep-stop", "--set", "sweep.b_stop=[1.0, 6.0]"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("sweep_stop.csv").exists());
}

#[test]
fn run_writes_record_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["run", "--set", "model.n_sites=4", "--set", "observable.theta=[\"pi/2\"]"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("record.json")).unwrap()).unwrap();
    let p = record["p_ground"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(record["diagnostics"]["max_norm_drift"].as_f64().unwrap() < 1e-8);

    let echo: toml::Table = fs::read_to_string(dir.path().join("config.toml")).unwrap().parse().unwrap();
    assert_eq!(echo["model"]["n_sites"].as_integer(), Some(4));

    let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let t = column(&series, "t");
    assert!(t.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn couplings_match_small_chain_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["couplings", "--set", "model.n_sites=3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = column(&fs::read_to_string(dir.path().join("positions.csv")).unwrap(), "position");
    let c = 1.25f64.cbrt();
    for (got, want) in x.iter().zip([-c, 0.0, c]) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    let echo: toml::Table = fs::read_to_string(dir.path().join("config.toml")).unwrap().parse().unwrap();
    let beta = echo["model"]["beta"].as_float().unwrap();
    // transverse w^2 = 1 - beta^2 (mu - 1) / 2 over the axial eigenvalues mu = 1, 3, 29/5
    let f = column(&fs::read_to_string(dir.path().join("modes.csv")).unwrap(), "frequency");
    for (got, mu) in f.iter().zip([1.0, 3.0, 5.8]) {
        let want = (1.0 - beta * beta * (mu - 1.0) / 2.0).sqrt();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn power_law_couplings_recover_their_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(
        &["couplings", "--set", "model.couplings=power_law", "--set", "model.alpha=1.3", "--set", "model.n_sites=6"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!((summary["alpha"].as_f64().unwrap() - 1.3).abs() < 1e-9);
    assert!(!dir.path().join("modes.csv").exists());
}

#[test]
fn couplings_reject_two_level_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["couplings", "--set", "model.kind=lz"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_site_gap_has_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(
        &[
            "spectrum",
            "--set",
            "model.n_sites=2",
            "--set",
            "spectrum.b_min=0",
            "--set",
            "spectrum.b_max=3",
            "--set",
            "spectrum.points=13",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let gap = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    for (b, g) in column(&gap, "field").into_iter().zip(column(&gap, "gap")) {
        let want = 2.0 * (1.0 + 4.0 * b * b).sqrt();
        assert!((g - want).abs() < 1e-9, "B = {b}: {g} vs {want}");
    }
}

#[test]
fn two_level_gap_is_smallest_at_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["spectrum", "--set", "model.kind=lz"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gap_summary.json")).unwrap()).unwrap();
    assert!(summary["b_star"].as_f64().unwrap().abs() < 1e-12);
    assert!((summary["gap_star"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn small_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep-tau", "--set", "model.n_sites=4", "--set", "sweep.tau=[0.2, 0.5, 1.0]"];
    let mut runs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(jobs);
        let mut a = args.to_vec();
        a.extend(["--jobs", jobs]);
        let o = gsprobe(&a, &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(fs::read_to_string(out.join("sweep_tau.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let csv = &runs[0];
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
    let p = column(csv, "p_ground");
    // rows are grouped by tau, three angles each
    assert!(p[0] < p[3] && p[3] < p[6]);
}

#[test]
fn figure_subset_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsprobe(&["figures", "--only", "fig2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["figures"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("fig2").join("curves.svg").exists());
    assert!(dir.path().join("fig2").join("curves.gp").exists());
}
