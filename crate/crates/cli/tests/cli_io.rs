use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stochcool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochcool"))
        .args(args)
        .env_remove("STOCHCOOL_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    reader
        .records()
        .map(|r| r.unwrap()[idx].parse().unwrap())
        .collect()
}

#[test]
fn energy_example_in_trap_units() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = stochcool(&[
        "energy",
        "--n-atoms",
        "1e6",
        "--l-th-sq",
        "200",
        "--s",
        "1",
        "--d",
        "0",
        "--out-dir",
        out,
        "--json",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));

    let printed: Value = serde_json::from_slice(&run.stdout).unwrap();
    let written = read_json(&dir.path().join("energy.json"));
    assert_eq!(printed, written);
    let budget = &written["budget"];
    assert!((budget["dt_par_cool"].as_f64().unwrap() + 50.0).abs() < 1e-12);
    let heating = budget["dv_par"].as_f64().unwrap() + budget["dt_par_meas"].as_f64().unwrap();
    assert!((heating - 0.5).abs() < 1e-12);
    assert!(budget["de_total"].as_f64().unwrap() < 0.0);

    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "energy");
    assert_eq!(
        manifest["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|v| *v == "energy.json")
            .count(),
        1
    );
}

#[test]
fn energy_in_si_units_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rb87.json");
    fs::write(
        &config,
        r#"{"physics": {"units": "si", "n_atoms": 1e6, "omega": 628.3185307179586,
            "mass": 1.443160648e-25, "temperature": 1e-6, "r0": 2e-5, "x0": 0, "y0": 0}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let run = stochcool(&[
        "energy",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let report = read_json(&out.join("energy.json"));
    assert_eq!(report["units"], "si");
    let l_th_sq = report["l_th_sq"].as_f64().unwrap();
    assert!((l_th_sq - 417.0).abs() < 1.0, "{l_th_sq}");
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let zero_s = stochcool(&[
        "energy",
        "--n-atoms",
        "100",
        "--l-th-sq",
        "20",
        "--s",
        "0",
        "--out-dir",
        out,
    ]);
    assert_eq!(zero_s.status.code(), Some(2));
    assert!(stderr(&zero_s).contains("`s`"), "{}", stderr(&zero_s));

    let mixed = stochcool(&[
        "energy",
        "--n-atoms",
        "100",
        "--l-th-sq",
        "20",
        "--s",
        "1",
        "--omega",
        "600",
        "--out-dir",
        out,
    ]);
    assert_eq!(mixed.status.code(), Some(2));

    let config = dir.path().join("typo.json");
    fs::write(&config, r#"{"physics": {"n_atom": 100}}"#).unwrap();
    let unknown = stochcool(&[
        "energy",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("n_atom"), "{}", stderr(&unknown));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("base.json");
    fs::write(
        &config,
        r#"{"seed": 9, "physics": {"n_atoms": 100, "l_th_sq": 20, "s": 1, "d": 0.5}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let run = stochcool(&[
        "energy",
        "--config",
        config.to_str().unwrap(),
        "--s",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let report = read_json(&out.join("energy.json"));
    assert_eq!(report["s"], 2.0);
    assert_eq!(report["d"], 0.5);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["physics"]["s"], 2.0);
}

#[test]
fn boundary_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = stochcool(&[
        "boundary",
        "--n-list",
        "1e6",
        "--l-th-sq-list",
        "200,1.5",
        "--out-dir",
        out,
    ]);
    assert!(run.status.success(), "{}", stderr(&run));

    let mut csvs: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    assert_eq!(
        csvs,
        [
            "boundary_longitudinal_only_N1e6_lthsq1.5e0.csv",
            "boundary_longitudinal_only_N1e6_lthsq2e2.csv",
            "boundary_total_N1e6_lthsq1.5e0.csv",
            "boundary_total_N1e6_lthsq2e2.csv",
        ]
    );

    let longitudinal = dir
        .path()
        .join("boundary_longitudinal_only_N1e6_lthsq2e2.csv");
    let total = dir.path().join("boundary_total_N1e6_lthsq2e2.csv");
    let (d_long, d_total) = (csv_column(&longitudinal, "d"), csv_column(&total, "d"));
    assert!(!d_total.is_empty() && d_long.len() >= d_total.len());
    let s_long = csv_column(&longitudinal, "s");
    let s_total = csv_column(&total, "s");
    assert!(s_total[0] > s_long[0]);
    for (s, d) in s_total.iter().zip(&d_total) {
        let k = s_long.iter().position(|x| x == s).unwrap();
        assert!(*d < d_long[k]);
    }

    let empty = fs::read_to_string(dir.path().join("boundary_total_N1e6_lthsq1.5e0.csv")).unwrap();
    assert_eq!(empty, "s,d,mode,N,l_th_sq\n");
    assert!(stderr(&run).contains("warning"));
}

#[test]
fn smin_table_decreases_with_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = stochcool(&["smin", "--n-list", "1e6", "--out-dir", out]);
    assert!(run.status.success(), "{}", stderr(&run));
    let path = dir.path().join("smin.csv");
    let l2 = csv_column(&path, "l_th_sq");
    let s_min = csv_column(&path, "s_min_asymptotic");
    assert!(l2.windows(2).all(|w| w[1] > w[0]));
    assert!(s_min.windows(2).all(|w| w[1] < w[0]));
    assert!(l2[0] > 2.0);
}

#[test]
fn verify_passes_and_the_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    let run = stochcool(&["verify", "--quick", "--out-dir", good.to_str().unwrap()]);
    assert!(run.status.success(), "{}", stderr(&run));
    let report = read_json(&good.join("verify.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["n_failed"], 0);

    let bad = dir.path().join("bad");
    let run = stochcool(&[
        "verify",
        "--quick",
        "--tamper",
        "dt_par_cool=1.001",
        "--out-dir",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("dt_par_cool"), "{}", stderr(&run));
    assert_eq!(read_json(&bad.join("verify.json"))["passed"], false);

    let run = stochcool(&[
        "verify",
        "--quick",
        "--tamper",
        "nonsense",
        "--out-dir",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        stochcool(&[
            "simulate",
            "--n-atoms",
            "100",
            "--l-th-sq",
            "200",
            "--s",
            "1",
            "--d",
            "1",
            "--replicas",
            "4000",
            "--seed",
            "5",
            "--trajectories",
            "3",
            "--out-dir",
            out,
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for path in [&a, &b] {
        let run = args(path.to_str().unwrap());
        assert!(run.status.success(), "{}", stderr(&run));
    }
    for file in ["summary.json", "trajectories.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let summary = read_json(&a.join("summary.json"));
    assert_eq!(summary["prediction_applies"], true);
    for term in ["dv_par", "dt_par", "de_perp", "de_total"] {
        let z = summary["first_step"][term]["z_score"].as_f64().unwrap();
        assert!(z < 4.0, "{term}: z = {z}");
    }
    let replicas = csv_column(&a.join("trajectories.csv"), "replica");
    assert_eq!(replicas, [0.0, 1.0, 2.0]);
}

#[test]
fn repeated_steps_cool_the_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = stochcool(&[
        "simulate",
        "--n-atoms",
        "100",
        "--l-th-sq",
        "200",
        "--s",
        "2",
        "--d",
        "0",
        "--replicas",
        "2000",
        "--steps",
        "50",
        "--trajectories",
        "0",
        "--out-dir",
        out,
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = read_json(&dir.path().join("summary.json"));
    let energies: Vec<f64> = summary["per_step"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["e_total_after"]["mean"].as_f64().unwrap())
        .collect();
    assert_eq!(energies.len(), 50);
    assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
}

#[test]
fn output_directory_defaults_to_the_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_stochcool"))
        .args(["energy", "--n-atoms", "10", "--l-th-sq", "20", "--s", "1"])
        .env("STOCHCOOL_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(dir.path().join("energy").join("energy.json").is_file());
    assert!(dir.path().join("energy").join("manifest.json").is_file());
}

#[test]
fn sweep_grid_matches_single_energy_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    let run = stochcool(&[
        "sweep",
        "--s-values",
        "0.5,2",
        "--d-values",
        "0,1",
        "--n-list",
        "100",
        "--l-th-sq-list",
        "20",
        "--out-dir",
        sweep.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let path = sweep.join("sweep.csv");
    let (s, d, e) = (
        csv_column(&path, "s"),
        csv_column(&path, "d"),
        csv_column(&path, "dE_total"),
    );
    assert_eq!(s.len(), 4);
    for k in 0..4 {
        let single = dir.path().join(format!("e{k}"));
        let run = stochcool(&[
            "energy",
            "--n-atoms",
            "100",
            "--l-th-sq",
            "20",
            "--s",
            &s[k].to_string(),
            "--d",
            &d[k].to_string(),
            "--out-dir",
            single.to_str().unwrap(),
        ]);
        assert!(run.status.success(), "{}", stderr(&run));
        let reference = read_json(&single.join("energy.json"))["budget"]["de_total"]
            .as_f64()
            .unwrap();
        assert!(
            (e[k] - reference).abs() <= 1e-14 * reference.abs(),
            "{} vs {reference}",
            e[k]
        );
    }
}
