//! Scenario runners behind the `timebin` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{Artifact, ScenarioConfig, SourceConfig, WavepacketConfig};
use crate::error::{Error, Result};
use crate::histogram::{build_histogram, project_antidiagonal, project_diagonal};
use crate::interferometer::PhaseSetting;
use crate::math::ComplexMatrix;
use crate::report::{complex_json, histogram_csv, matrix_json, projection_csv, write_json, write_text, Csv};
use crate::tomography::pair::{
    center_peak, center_scan, compute_gbar, concurrence, concurrence_approx, fit_center_scan, integrate_pair_terms,
    reconstruct_pair, stokes_pair, BASIS,
};
use crate::tomography::single::{
    compute_gbar_single, fit_fringe, integrate_terms, reconstruct, reconstruct_from_peaks,
};
use crate::verify::{cmd_verify, VerifyReport};

/// Exit status for a run that completed with every check passing.
pub const EXIT_OK: i32 = 0;
/// Exit status for a failed check or a numerical failure.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for an unreadable or invalid configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "timebin", version, about = "Time-bin photon tomography simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-photon tomography: fringe scan, density matrix, visibility.
    Single(RunArgs),
    /// Photon-pair tomography: density matrix, peaks, center scan, concurrence, histogram.
    Pair(RunArgs),
    /// Oracle comparison and invariant checks.
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "TIMEBIN_THREADS")]
    pub threads: Option<usize>,
    /// Histogram cell width; must divide the bin width.
    #[arg(long)]
    pub resolution: Option<f64>,
}

/// Headline numbers of a single-photon run.
#[derive(Debug, Clone, Serialize)]
pub struct SingleSummary {
    pub rho: [[[f64; 2]; 2]; 2],
    pub abs_coherence: f64,
    pub visibility: f64,
}

/// Headline numbers of a pair run.
#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub concurrence: f64,
    pub concurrence_approx: f64,
    pub populations: [f64; 4],
    pub abs_coherence: f64,
    pub center_visibility: Option<f64>,
}

fn pairs<const N: usize>(m: &ComplexMatrix) -> [[[f64; 2]; N]; N] {
    std::array::from_fn(|r| std::array::from_fn(|c| [m[(r, c)].re, m[(r, c)].im]))
}

/// Default single-photon scenario, `(|E⟩ + |L⟩)/√2`.
pub fn default_single() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default_pair();
    let a = std::f64::consts::FRAC_1_SQRT_2;
    if let SourceConfig::Wavepacket(WavepacketConfig { amplitudes, .. }) = &mut cfg.source {
        *amplitudes = Some(vec![[a, 0.0], [a, 0.0]]);
    }
    cfg
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Single-photon pipeline; writes `peaks.csv`, `rho1q.json`, `visibility.json`.
pub fn cmd_single(cfg: &ScenarioConfig, out: &Path) -> Result<SingleSummary> {
    let source = cfg.single_source()?;
    let steps = cfg.grid.steps_per_bin;
    prepare_out(out)?;

    let ints = integrate_terms(&*source, steps)?;
    let phases = cfg.phases.phi.values();
    let table = ints.peak_table(&phases);
    let norm = table.p_early + table.p_late;
    if !(norm > 0.0) {
        return Err(Error::NoSignal(format!("outer peaks sum to {norm}")));
    }
    let rho = reconstruct(&compute_gbar_single(&*source, steps)?)?;
    let rho_peaks = reconstruct_from_peaks(&ints)?;
    let samples: Vec<(f64, f64)> = table.p_mid.iter().map(|&(phi, p)| (phi, p / norm)).collect();
    let fit = fit_fringe(&samples).ok();

    if cfg.outputs.wants(Artifact::Peaks) {
        let mut csv = Csv::new(&["phi", "P_E", "P_mid", "P_L"]);
        for &(phi, p) in &samples {
            csv.row(&[phi, table.p_early / norm, p, table.p_late / norm]);
        }
        write_text(out, "peaks.csv", csv.as_str())?;
    }
    if cfg.outputs.wants(Artifact::Rho1q) {
        let doc = json!({
            "basis": ["E", "L"],
            "rho": matrix_json(&rho.rho),
            "coherence": complex_json(rho.coherence()),
            "abs_coherence": rho.coherence().norm(),
            "stokes": rho.stokes(),
            "rho_from_peaks": matrix_json(&rho_peaks.rho),
            "stokes_from_peaks": rho_peaks.stokes(),
        });
        write_json(out, "rho1q.json", &doc)?;
    }
    if cfg.outputs.wants(Artifact::Visibility) {
        let doc = json!({
            "visibility": fit.map(|f| f.visibility),
            "offset": fit.map(|f| f.offset),
            "amplitude": fit.map(|f| f.amplitude),
            "phase": fit.map(|f| f.phase),
            "twice_abs_coherence": 2.0 * rho.coherence().norm(),
        });
        write_json(out, "visibility.json", &doc)?;
    }
    write_text(out, "resolved_config.toml", &cfg.to_toml_string()?)?;
    Ok(SingleSummary {
        rho: pairs::<2>(&rho.rho),
        abs_coherence: rho.coherence().norm(),
        visibility: fit.map_or(f64::NAN, |f| f.visibility),
    })
}

/// Pair pipeline; writes `rho2q.json`, `stokes.csv`, `peaks3x3.csv`,
/// `center_scan.csv`, `concurrence.json`, `histogram.csv`, `projection.csv`.
pub fn cmd_pair(cfg: &ScenarioConfig, out: &Path) -> Result<PairSummary> {
    let source = cfg.pair_source()?;
    let steps = cfg.grid.steps_per_bin;
    prepare_out(out)?;

    let state = reconstruct_pair(&compute_gbar(&*source, steps)?, cfg.outputs.project_physical)?;
    let rho = &state.rho;
    let c_exact = concurrence(rho)?;
    let c_approx = concurrence_approx(rho);

    let ints = integrate_pair_terms(&*source, steps)?;
    let norm = ints.corner_total();
    if !(norm > 0.0) {
        return Err(Error::NoSignal(format!("corner peaks sum to {norm}")));
    }
    let scan = center_scan(&ints, &cfg.phases.phi_b.values(), &cfg.phases.phi_x.values(), norm);
    let fit = fit_center_scan(&scan).ok();

    if cfg.outputs.wants(Artifact::Rho2q) {
        let doc = json!({
            "basis": BASIS,
            "rho": matrix_json(rho),
            "coherence_phase": state.coherence_phase(),
            "projection_distance": state.projection_distance,
            "min_eigenvalue": state.min_eigenvalue()?,
            "center_fit": fit.map(|f| json!({
                "offset": f.offset,
                "sum_visibility": f.sum_visibility(),
                "sum_phase": f.sum_phase(),
                "rms_residual": f.rms_residual,
            })),
        });
        write_json(out, "rho2q.json", &doc)?;
    }
    if cfg.outputs.wants(Artifact::Stokes) {
        let s = stokes_pair(rho);
        let mut csv = Csv::new(&["sigma_B", "sigma_X", "S"]);
        for (j, row) in s.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                csv.row(&[j as f64, k as f64, *v]);
            }
        }
        write_text(out, "stokes.csv", csv.as_str())?;
    }
    if cfg.outputs.wants(Artifact::Peaks3x3) {
        let [phi_b, phi_x] = cfg.phases.histogram;
        let peaks = ints.peaks(&PhaseSetting::new(phi_b, phi_x));
        let mut csv = Csv::new(&["window_B", "P(window_X=0)", "P(window_X=1)", "P(window_X=2)"]);
        for (b, row) in peaks.iter().enumerate() {
            let values: Vec<f64> = row.iter().map(|v| v / norm).collect();
            csv.labeled_row(&b.to_string(), &values);
        }
        write_text(out, "peaks3x3.csv", csv.as_str())?;
    }
    if cfg.outputs.wants(Artifact::CenterScan) {
        let mut csv = Csv::new(&["phi_B", "phi_X", "P_c", "P_c_from_rho"]);
        for p in &scan {
            csv.row(&[p.phi_b, p.phi_x, p.counts, center_peak(rho, p.phi_b, p.phi_x)]);
        }
        write_text(out, "center_scan.csv", csv.as_str())?;
    }
    if cfg.outputs.wants(Artifact::Concurrence) {
        write_json(out, "concurrence.json", &json!({ "exact": c_exact, "approx": c_approx }))?;
    }
    let want_hist = cfg.outputs.wants(Artifact::Histogram);
    let want_proj = cfg.outputs.wants(Artifact::Projection);
    if want_hist || want_proj {
        let [phi_b, phi_x] = cfg.phases.histogram;
        let h = build_histogram(&*source, &PhaseSetting::new(phi_b, phi_x), cfg.grid.cells_per_bin, cfg.grid.substeps)?;
        if want_hist {
            write_text(out, "histogram.csv", histogram_csv(&h, norm).as_str())?;
        }
        if want_proj {
            write_text(
                out,
                "projection.csv",
                projection_csv(&project_diagonal(&h), &project_antidiagonal(&h), norm).as_str(),
            )?;
        }
    }
    write_text(out, "resolved_config.toml", &cfg.to_toml_string()?)?;
    Ok(PairSummary {
        concurrence: c_exact,
        concurrence_approx: c_approx,
        populations: std::array::from_fn(|i| rho[(i, i)].re),
        abs_coherence: rho[(0, 3)].norm(),
        center_visibility: fit.map(|f| f.sum_visibility()),
    })
}

fn load(args: &RunArgs, fallback: fn() -> ScenarioConfig) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_path(path)?,
        None => fallback(),
    };
    if let Some(r) = args.resolution {
        cfg.set_resolution(r)?;
    }
    Ok(cfg)
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

fn print_verify(report: &VerifyReport) {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let (args, command) = match &cli.command {
        Command::Single(a) => (a, "single"),
        Command::Pair(a) => (a, "pair"),
        Command::Verify(a) => (a, "verify"),
    };
    let result = configure_threads(args.threads).and_then(|()| match command {
        "single" => {
            let cfg = load(args, default_single)?;
            let s = cmd_single(&cfg, &args.out)?;
            println!("peaks.csv          middle-peak fringe and outer peaks per phase");
            println!(
                "rho1q.json         density matrix from window-integrated correlations; |rho_EL| = {}",
                s.abs_coherence
            );
            println!("visibility.json    fringe fit; V = {}", s.visibility);
            Ok(EXIT_OK)
        }
        "pair" => {
            let cfg = load(args, ScenarioConfig::default_pair)?;
            let s = cmd_pair(&cfg, &args.out)?;
            println!(
                "rho2q.json         two-photon density matrix; populations {:?}, |rho_EE,LL| = {}",
                s.populations, s.abs_coherence
            );
            println!("stokes.csv         two-qubit Stokes parameters");
            println!("peaks3x3.csv       coincidence peaks by arrival window");
            println!("center_scan.csv    center peak over the phase grid; visibility {:?}", s.center_visibility);
            println!("concurrence.json   exact {} approx {}", s.concurrence, s.concurrence_approx);
            println!("histogram.csv      two-time coincidence histogram");
            println!("projection.csv     histogram summed along t_B + t_X and t_B - t_X");
            Ok(EXIT_OK)
        }
        _ => {
            let cfg = load(args, ScenarioConfig::default_pair)?;
            let report = cmd_verify(&cfg)?;
            print_verify(&report);
            prepare_out(&args.out)?;
            write_json(&args.out, "verify.json", &report)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
