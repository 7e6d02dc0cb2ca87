//! On-demand invariant suite: oracle comparison, term support and peak consistency.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::correlation::{CorrelationEngine, CorrelationRequest, Event, EventOp, Side};
use crate::error::Result;
use crate::interferometer::{expand_pair, expand_pair_with_flip, supported_terms, PhaseSetting, Window};
use crate::math::{hermitian_eigen, ComplexMatrix};
use crate::source::{EmitterModel, TimeBinConfig, WavepacketState};
use crate::tomography::pair::{center_peak, integrate_pair_terms, side_peak};

pub const ORACLE_TOL: f64 = 1e-8;
pub const CONSISTENCY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst deviation observed.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed: value <= tolerance, value, tolerance, detail }
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let data = (0..d * d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    ComplexMatrix::from_vec(d, d, data).expect("square data")
}

/// A random dissipation-free three-level instance: Hamiltonian, state and operator string.
pub fn random_closed_instance(seed: u64) -> (ComplexMatrix, ComplexMatrix, CorrelationRequest) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_matrix(&mut rng, 3).hermitian_part();
    let a = random_matrix(&mut rng, 3);
    let rho = &a * &a.adjoint();
    let rho = rho.scale_real(1.0 / rho.trace().re).hermitian_part();
    let n = rng.gen_range(1..=4);
    let mut events = Vec::new();
    for i in 0..n {
        for side in [Side::Left, Side::Right] {
            // half-unit times make equal-time ties common
            let t = rng.gen_range(0..8) as f64 * 0.5;
            events.push(Event::matrix(t, random_matrix(&mut rng, 3), side, i));
        }
    }
    (h, rho, CorrelationRequest::new(events))
}

/// Brute-force Heisenberg-picture value of a request under a static Hamiltonian.
///
/// Each operator becomes `U†(t) O U(t)` with `U` built from the spectral
/// decomposition of `h`; creation-side operators multiply ρ from the right in
/// order of increasing time, annihilation-side ones from the left.
pub fn heisenberg_value(h: &ComplexMatrix, rho: &ComplexMatrix, request: &CorrelationRequest) -> Result<C64> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let evolve = |t: f64| {
        let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
        &(&vecs * &ComplexMatrix::diag(&phases)) * &vecs.adjoint()
    };
    let heis = |e: &Event| {
        let op = match &e.op {
            EventOp::Matrix(m) => m.clone(),
            EventOp::Channel(c) => c.operator(),
        };
        let u = evolve(e.time);
        &(&u.adjoint() * &op) * &u
    };
    let order = |a: &&Event, b: &&Event| a.time.total_cmp(&b.time).then(a.string_index.cmp(&b.string_index));
    let mut rights: Vec<&Event> = request.events.iter().filter(|e| e.side == Side::Right).collect();
    let mut lefts: Vec<&Event> = request.events.iter().filter(|e| e.side == Side::Left).collect();
    rights.sort_by(order);
    lefts.sort_by(order);
    let mut prod = rho.clone();
    for e in rights {
        prod = &prod * &heis(e).adjoint();
    }
    for e in lefts.iter().rev() {
        prod = &prod * &heis(e);
    }
    Ok(prod.trace())
}

/// Largest `|engine − oracle|` over `count` seeded instances.
pub fn oracle_deviation(first_seed: u64, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in first_seed..first_seed + count as u64 {
        let (h, rho, request) = random_closed_instance(seed);
        let model = EmitterModel::new(h.clone(), vec![], vec![], rho.clone(), 0.0)?;
        let engine = CorrelationEngine::new(model, TimeBinConfig::new(2.0)?, 40)?;
        let v = engine.evaluate(&request)?;
        worst = worst.max((v - heisenberg_value(&h, &rho, &request)?).norm());
    }
    Ok(worst)
}

/// Supported-term counts per window type: corners, sides, center.
pub fn support_counts() -> Result<[Vec<usize>; 3]> {
    let terms = expand_pair(&PhaseSetting::new(0.0, 0.0));
    let mut out: [Vec<usize>; 3] = Default::default();
    for b in 0..3 {
        for x in 0..3 {
            let n = supported_terms(&terms, Window::Pair(b, x))?.len();
            let kind = usize::from(b == 1) + usize::from(x == 1);
            out[kind].push(n);
        }
    }
    Ok(out)
}

/// Largest phase-factor mismatch between each pair term and the adjoint of its partner.
pub fn adjoint_closure_defect(setting: &PhaseSetting) -> f64 {
    let terms = expand_pair(setting);
    let mut worst = 0.0f64;
    for t in &terms {
        let (bd, xd, xp, bp) =
            (t.operators[0].delayed, t.operators[1].delayed, t.operators[2].delayed, t.operators[3].delayed);
        let partner = terms.iter().find(|u| {
            (u.operators[0].delayed, u.operators[1].delayed, u.operators[2].delayed, u.operators[3].delayed)
                == (bp, xp, xd, bd)
        });
        worst = worst.max(partner.map_or(f64::INFINITY, |u| (u.phase_factor - t.phase_factor.conj()).norm()));
    }
    worst
}

/// Pure pair state with complex coherences everywhere, so that a conjugated phase changes the peaks.
pub fn probe_state() -> Result<WavepacketState> {
    let amps = [C64::new(0.6, 0.0), C64::new(0.3, 0.2), C64::new(0.1, -0.3), C64::from_polar(0.5, 0.7)];
    // γT ≥ 20 keeps the mode-overlap bias far below the tolerance
    WavepacketState::from_amplitudes_normalized(amps, 4.0, 2.0, TimeBinConfig::new(10.0)?)
}

/// Largest deviation between window-integrated QRT peaks and the closed-form
/// peak expressions of the probe state, and the largest imaginary residue.
///
/// `flipped` conjugates the phase of one term before summation.
pub fn peak_consistency(steps_per_bin: usize, flipped: Option<usize>) -> Result<(f64, f64)> {
    let source = probe_state()?;
    let rho = source.density().clone();
    let ints = integrate_pair_terms(&source, steps_per_bin)?;
    let norm = ints.corner_total();
    let mut worst = 0.0f64;
    let mut imag = 0.0f64;
    for (phi_b, phi_x) in [(0.7, 1.9), (2.3, -0.4), (-1.1, 0.5), (0.0, 3.0)] {
        let setting = PhaseSetting::new(phi_b, phi_x);
        let terms = match flipped {
            Some(k) => expand_pair_with_flip(&setting, k),
            None => expand_pair(&setting),
        };
        let cells = ints.peaks_complex(&terms);
        worst = worst.max((cells[1][1].re / norm - center_peak(&rho, phi_b, phi_x)).abs());
        worst = worst.max((cells[0][1].re / norm - 2.0 * side_peak(&rho, phi_x)).abs());
        imag = imag.max(cells.iter().flatten().map(|c| c.im.abs() / norm).fold(0.0, f64::max));
    }
    Ok((worst, imag))
}

/// Runs every check; `cfg.verify` selects the seed count and the sign-flip hook.
pub fn cmd_verify(cfg: &ScenarioConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    let dev = oracle_deviation(cfg.seed, cfg.verify.seeds)?;
    checks.push(check(
        "oracle_equivalence",
        dev,
        ORACLE_TOL,
        format!("max |engine - Heisenberg| = {dev:e} over {} seeds", cfg.verify.seeds),
    ));

    let counts = support_counts()?;
    let expected = [1, 4, 16];
    let mismatches =
        counts.iter().zip(expected).map(|(c, e)| c.iter().filter(|&&n| n != e).count()).sum::<usize>() as f64;
    checks.push(check("support_counts", mismatches, 0.0, format!("corner/side/center counts {counts:?}")));

    let closure = adjoint_closure_defect(&PhaseSetting::new(0.9, -2.2));
    checks.push(check("adjoint_closure", closure, 1e-14, format!("max phase mismatch {closure:e}")));

    let flipped = cfg.verify.inject_sign_flip.then_some(cfg.verify.flipped_term);
    let steps = cfg.grid.steps_per_bin.min(300);
    let (worst, imag) = peak_consistency(steps, flipped)?;
    let hook = if flipped.is_some() { " (sign flip injected)" } else { "" };
    checks.push(check(
        "qrt_peak_consistency",
        worst.max(imag),
        CONSISTENCY_TOL,
        format!("max peak deviation {worst:e}, max imaginary residue {imag:e}{hook}"),
    ));

    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let mut cfg = ScenarioConfig::default_pair();
        cfg.verify.seeds = 20;
        let report = cmd_verify(&cfg).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn every_phase_carrying_flip_is_detected() {
        use crate::interferometer::PAIR_TERM_DELAYS;
        // terms with balanced delays in both channels carry no phase, so a flip is a no-op
        let carrying = (0..16).filter(|&k| {
            let [bd, xd, xp, bp] = PAIR_TERM_DELAYS[k];
            bd != bp || xd != xp
        });
        for k in carrying {
            let (worst, imag) = peak_consistency(120, Some(k)).unwrap();
            assert!(worst.max(imag) > CONSISTENCY_TOL, "term {k}: {worst} {imag}");
        }
    }

    #[test]
    fn oracle_detects_a_wrong_value() {
        let (h, rho, r) = random_closed_instance(5);
        let v = heisenberg_value(&h, &rho, &r).unwrap();
        let w = heisenberg_value(&h, &rho, &r.adjoint()).unwrap();
        assert!((v - w.conj()).norm() < 1e-12);
    }
}
