//! End-to-end runs of the `timebin` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_timebin");

/// Coarse grid and well-separated decay rates keep each run short and overlap-free.
const FAST_GRID: &str = "
[grid]
steps_per_bin = 200
cells_per_bin = 10
substeps = 4
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("TIMEBIN_THREADS", "1").output().expect("binary runs")
}

fn run_config(subcommand: &str, toml: &str, dir: &Path) -> Output {
    let config = dir.join("scenario.toml");
    std::fs::write(&config, toml).unwrap();
    let out = dir.join("out");
    run(&[subcommand, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Density-matrix source with the given nonzero real entries `(row, col, value)`.
fn density_scenario(entries: &[(usize, usize, f64)]) -> String {
    let mut rho = [[0.0f64; 4]; 4];
    for &(r, c, v) in entries {
        rho[r][c] = v;
        rho[c][r] = v;
    }
    let rows: Vec<String> = rho
        .iter()
        .map(|row| format!("[{}]", row.iter().map(|v| format!("[{v:?}, 0.0]")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!(
        "[source]\nkind = \"wavepacket\"\ngamma_b = 4.0\ngamma_x = 2.0\ndensity = [{}]\n{FAST_GRID}",
        rows.join(", ")
    )
}

#[test]
fn negative_bin_width_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("pair", "[source]\nkind = \"wavepacket\"\nt_bin = -1.0\namplitudes = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]\n", dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_bin"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("single", "seeed = 3\n[source]\nkind = \"wavepacket\"\n", dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn werner_state_concurrence() {
    // p|Φ+⟩⟨Φ+| + (1 − p)/4 with p = 0.8 has C = (3p − 1)/2 = 0.7
    let p = 0.8;
    let (outer, inner) = ((1.0 + p) / 4.0, (1.0 - p) / 4.0);
    let toml = density_scenario(&[(0, 0, outer), (3, 3, outer), (1, 1, inner), (2, 2, inner), (0, 3, p / 2.0)]);
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("pair", &format!("{toml}\n[outputs]\nartifacts = [\"concurrence\"]\n"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = read_json(&dir.path().join("out/concurrence.json"));
    let exact = c["exact"].as_f64().unwrap();
    assert!((exact - 0.7).abs() < 1e-2, "{exact}");
    assert!((c["approx"].as_f64().unwrap() - exact).abs() < 1e-2);
}

#[test]
fn dephased_bell_center_visibility() {
    let toml = density_scenario(&[(0, 0, 0.5), (3, 3, 0.5), (0, 3, 0.3)]);
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("pair", &format!("{toml}\n[outputs]\nartifacts = [\"rho2q\"]\n"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/rho2q.json"));
    let v = doc["center_fit"]["sum_visibility"].as_f64().unwrap();
    assert!((v - 0.6).abs() < 1e-2, "{v}");
}

#[test]
fn pair_runs_are_byte_identical() {
    let toml = density_scenario(&[(0, 0, 0.5), (3, 3, 0.5), (0, 3, 0.5)]);
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        assert!(run_config("pair", &toml, dir.path()).status.success());
    }
    let mut names: Vec<_> =
        std::fs::read_dir(first.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8, "{names:?}");
    for name in names {
        let a = std::fs::read(first.path().join("out").join(&name)).unwrap();
        let b = std::fs::read(second.path().join("out").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let toml =
        format!("[source]\nkind = \"wavepacket\"\ngamma_x = 3.0\namplitudes = [[0.6, 0.0], [0.0, 0.8]]\n{FAST_GRID}");
    let dir = tempfile::tempdir().unwrap();
    assert!(run_config("single", &toml, dir.path()).status.success());
    let resolved = dir.path().join("out/resolved_config.toml");
    let again = dir.path().join("again");
    let out = run(&["single", "--config", resolved.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["rho1q.json", "peaks.csv", "visibility.json", "resolved_config.toml"] {
        assert_eq!(
            std::fs::read(dir.path().join("out").join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
    let rho = read_json(&again.join("rho1q.json"));
    let early = rho["rho"][0][0][0].as_f64().unwrap();
    assert!((early - 0.36).abs() < 1e-3, "{early}");
}

#[test]
fn verify_passes_and_detects_an_injected_sign_flip() {
    let base = density_scenario(&[(0, 0, 0.5), (3, 3, 0.5), (0, 3, 0.5)]);
    let dir = tempfile::tempdir().unwrap();
    let clean = run_config("verify", &format!("{base}\n[verify]\nseeds = 10\n"), dir.path());
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stdout));

    let flipped = format!("{base}\n[verify]\nseeds = 10\ninject_sign_flip = true\nflipped_term = 0\n");
    let out = run_config("verify", &flipped, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL qrt_peak_consistency"));
    assert!(dir.path().join("out/verify.json").exists());
}
