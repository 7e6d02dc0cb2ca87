//! Single-photon time-bin tomography.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{Channel, CorrelationRequest, CorrelationSource};
use crate::error::{Error, Result};
use crate::interferometer::{expand_single, term_support, Window};
use crate::math::{hermitian_eigen, least_squares, pauli, ComplexMatrix, TimeGrid, ZERO};

/// Integrated counts of the early, middle and late peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTable1 {
    pub p_early: f64,
    /// `(φ, P_mid(φ))` for each scanned phase.
    pub p_mid: Vec<(f64, f64)>,
    pub p_late: f64,
}

/// Phase-independent window integrals of the four single-photon terms.
///
/// `terms[k][i]` is term `i` of `expand_single` integrated over window `k`;
/// unsupported combinations are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleTermIntegrals {
    pub terms: [[C64; 4]; 3],
}

impl SingleTermIntegrals {
    /// Counts of window `k` at phase `phi`.
    pub fn window_counts(&self, k: usize, phi: f64) -> f64 {
        expand_single(phi).iter().zip(&self.terms[k]).map(|(t, v)| t.phase_factor * v).sum::<C64>().re
    }

    pub fn peak_table(&self, phases: &[f64]) -> PeakTable1 {
        PeakTable1 {
            p_early: self.window_counts(0, 0.0),
            p_mid: phases.iter().map(|&phi| (phi, self.window_counts(1, phi))).collect(),
            p_late: self.window_counts(2, 0.0),
        }
    }
}

/// Relative inset of a window's closing node.
pub(crate) const EDGE_INSET: f64 = 1e-10;

/// Grid point `k`, with the closing node moved just inside the window so that
/// emission switching on at the next window's start is not counted twice.
pub(crate) fn window_node(grid: &TimeGrid, k: usize) -> f64 {
    if k + 1 == grid.n_steps() {
        grid.t_end() - EDGE_INSET * (grid.t_end() - grid.t_start())
    } else {
        grid.point(k)
    }
}

/// Trapezoid integral of `f` over `[a, b]` with `steps` intervals, evaluated in parallel.
pub(crate) fn integrate_window<F>(a: f64, b: f64, steps: usize, f: F) -> Result<C64>
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    let grid = TimeGrid::new(a, b, steps + 1)?;
    let w = grid.weights();
    let values: Vec<C64> =
        (0..grid.n_steps()).into_par_iter().map(|k| f(window_node(&grid, k))).collect::<Result<_>>()?;
    Ok(values.iter().zip(&w).map(|(v, w)| v * *w).sum())
}

/// Integrates every supported term over every window, `steps_per_bin` intervals per window.
pub fn integrate_terms<S: CorrelationSource + ?Sized>(source: &S, steps_per_bin: usize) -> Result<SingleTermIntegrals> {
    let t_bin = source.time_bins().t_bin;
    let terms = expand_single(0.0);
    let mut out = [[ZERO; 4]; 3];
    for (k, row) in out.iter_mut().enumerate() {
        for (i, term) in terms.iter().enumerate() {
            if !term_support(term, Window::Single(k))? {
                continue;
            }
            let (a, b) = (k as f64 * t_bin, (k + 1) as f64 * t_bin);
            row[i] = integrate_window(a, b, steps_per_bin, |t| source.correlate_supported(&term.request(t, t, t_bin)))?;
        }
    }
    Ok(SingleTermIntegrals { terms: out })
}

/// Early, middle (per phase) and late peak counts.
pub fn integrate_peaks<S: CorrelationSource + ?Sized>(
    source: &S,
    phases: &[f64],
    steps_per_bin: usize,
) -> Result<PeakTable1> {
    Ok(integrate_terms(source, steps_per_bin)?.peak_table(phases))
}

/// Normalized 2×2 density matrix in the (E, L) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix1Q {
    pub rho: ComplexMatrix,
}

impl DensityMatrix1Q {
    pub fn coherence(&self) -> C64 {
        self.rho[(0, 1)]
    }

    /// `[S0, S1, S2, S3]` with `S_j = Tr(σ_j ρ)`.
    pub fn stokes(&self) -> [f64; 4] {
        std::array::from_fn(|j| (&pauli(j) * &self.rho).trace().re)
    }

    pub fn from_stokes(s: [f64; 4]) -> Self {
        let mut rho = ComplexMatrix::zeros(2, 2);
        for (j, sj) in s.iter().enumerate() {
            rho = &rho + &pauli(j).scale_real(0.5 * sj);
        }
        Self { rho }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*hermitian_eigen(&self.rho)?.0.last().expect("2x2 has eigenvalues"))
    }
}

/// `G̅_{jk} = ∫₀ᵀ ⟨a_k†(t) a_j(t)⟩ dt` with `a_E(t) = a(t)` and `a_L(t) = a(t + T)`.
pub fn compute_gbar_single<S: CorrelationSource + ?Sized>(source: &S, steps_per_bin: usize) -> Result<ComplexMatrix> {
    let t_bin = source.time_bins().t_bin;
    let mut g = ComplexMatrix::zeros(2, 2);
    for (j, k) in [(0, 0), (0, 1), (1, 1)] {
        let (sj, sk) = (j as f64 * t_bin, k as f64 * t_bin);
        g[(j, k)] = integrate_window(0.0, t_bin, steps_per_bin, |t| {
            source.correlate_supported(&CorrelationRequest::two_time(Channel::X, t + sk, t + sj))
        })?;
    }
    g[(1, 0)] = g[(0, 1)].conj();
    Ok(g)
}

/// `ρ = G̅ / Tr G̅` after Hermitization.
pub fn reconstruct(gbar: &ComplexMatrix) -> Result<DensityMatrix1Q> {
    if gbar.rows() != 2 || !gbar.is_square() {
        return Err(Error::Dimension("single-photon G̅ must be 2x2".into()));
    }
    let h = gbar.hermitian_part();
    let tr = h.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NoSignal(format!("G̅ trace is {tr}")));
    }
    Ok(DensityMatrix1Q { rho: h.scale_real(1.0 / tr) })
}

/// Density matrix from peak counts: `S1`, `S2` from the middle peak at 0 and π/2, `S3` from the outer peaks.
pub fn reconstruct_from_peaks(integrals: &SingleTermIntegrals) -> Result<DensityMatrix1Q> {
    let (pe, pl) = (integrals.window_counts(0, 0.0), integrals.window_counts(2, 0.0));
    let n = pe + pl;
    if !(n > 0.0) {
        return Err(Error::NoSignal(format!("outer peaks sum to {n}")));
    }
    let s1 = integrals.window_counts(1, 0.0) / n - 1.0;
    let s2 = integrals.window_counts(1, FRAC_PI_2) / n - 1.0;
    let s3 = (pe - pl) / n;
    Ok(DensityMatrix1Q::from_stokes([1.0, s1, s2, s3]))
}

/// Fit of `P(φ) = c₀ + c₁ cos(φ − φ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
}

pub fn fit_fringe(samples: &[(f64, f64)]) -> Result<FringeFit> {
    let mut phases: Vec<f64> = samples.iter().map(|(p, _)| p.rem_euclid(std::f64::consts::TAU)).collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if phases.len() < 3 {
        return Err(Error::NoCounts(format!("fringe fit needs 3 distinct phases, got {}", phases.len())));
    }
    let design: Vec<Vec<f64>> = samples.iter().map(|&(p, _)| vec![1.0, p.cos(), p.sin()]).collect();
    let y: Vec<f64> = samples.iter().map(|&(_, v)| v).collect();
    let c = least_squares(&design, &y)?;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(c[0] > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NoCounts(format!("fringe offset {} is not positive", c[0])));
    }
    let amplitude = c[1].hypot(c[2]);
    Ok(FringeFit { offset: c[0], amplitude, phase: c[2].atan2(c[1]), visibility: amplitude / c[0] })
}

/// Visibility of the middle peak over a phase scan.
pub fn visibility(samples: &[(f64, f64)]) -> Result<f64> {
    Ok(fit_fringe(samples)?.visibility)
}

/// `G(τ_m) = Σ_j |Ω₀(j·dt)| G¹(j·dt + τ_m) dt` with `τ_m = lags[m]·dt`.
///
/// `g1[k]` samples `G¹(k·dt)`; samples past the end count as zero.
pub fn trigger_correlate(g1: &[f64], trigger: &[f64], dt: f64, lags: &[usize]) -> Vec<f64> {
    lags.iter()
        .map(|&lag| {
            trigger.iter().enumerate().map(|(j, w)| w.abs() * g1.get(j + lag).copied().unwrap_or(0.0)).sum::<f64>() * dt
        })
        .collect()
}

/// Detector rate `G¹(t, φ)` sampled at `t = k·T/steps_per_bin` over all observed windows.
pub fn g1_trace<S: CorrelationSource + ?Sized>(source: &S, phi: f64, steps_per_bin: usize) -> Result<Vec<f64>> {
    let bins = source.time_bins();
    let n = steps_per_bin * bins.n_bins_observed + 1;
    let dt = bins.t_bin / steps_per_bin as f64;
    let terms = expand_single(phi);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let mut sum = ZERO;
            for term in &terms {
                sum += term.phase_factor * source.correlate_supported(&term.request(t, t, bins.t_bin))?;
            }
            Ok(sum.re)
        })
        .collect()
}

/// Default scan: `n` equally spaced phases on `[0, 2π)`.
pub fn default_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ONE;
    use crate::source::{SinglePhotonWavepacket, TimeBinConfig};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn bins() -> TimeBinConfig {
        TimeBinConfig::new(10.0).unwrap()
    }

    /// Equal-weight superposition; `γT = 20` keeps the early/late mode overlap at `e^{-10}`.
    fn superposition(phase: f64) -> SinglePhotonWavepacket {
        superposition_with_rate(phase, 2.0)
    }

    fn superposition_with_rate(phase: f64, gamma: f64) -> SinglePhotonWavepacket {
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        SinglePhotonWavepacket::from_amplitudes(a, a * C64::from_polar(1.0, phase), gamma, bins()).unwrap()
    }

    #[test]
    fn reconstruct_trivial_cases() {
        let r = reconstruct(&ComplexMatrix::diag(&[ONE, ZERO])).unwrap();
        assert_eq!(r.rho, ComplexMatrix::diag(&[ONE, ZERO]));
        let r = reconstruct(&ComplexMatrix::identity(2)).unwrap();
        assert!(r.rho.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        assert!(matches!(reconstruct(&ComplexMatrix::zeros(2, 2)), Err(Error::NoSignal(_))));
    }

    #[test]
    fn early_only_emission() {
        let s = SinglePhotonWavepacket::from_amplitudes(ONE, ZERO, 1.0, bins()).unwrap();
        let table = integrate_peaks(&s, &default_phases(12), 400).unwrap();
        // only the e^{-γT} tail reaches the late window
        assert!(table.p_late.abs() < 1e-4);
        for (_, p) in &table.p_mid {
            // the early mode's tail overlaps the delayed copy by e^{-γT/2}
            assert!((p - table.p_early).abs() < 2.01 * (-5.0f64).exp() * table.p_early);
        }
    }

    #[test]
    fn ideal_superposition_peaks() {
        let s = superposition(0.0);
        let ints = integrate_terms(&s, 600).unwrap();
        let table = ints.peak_table(&[0.0, PI]);
        assert!((table.p_early - table.p_late).abs() < 1e-4);
        let (max, min) = (table.p_mid[0].1, table.p_mid[1].1);
        assert!(min < 1e-3 * max);
        let rho = reconstruct(&compute_gbar_single(&s, 600).unwrap()).unwrap();
        assert!((rho.coherence().norm() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn early_tail_biases_coherence_by_mode_overlap() {
        // late amplitude i/√2: the tail adds a real part to a purely imaginary coherence
        let input = C64::new(0.0, -0.5);
        let rho = reconstruct(&compute_gbar_single(&superposition_with_rate(FRAC_PI_2, 1.0), 600).unwrap()).unwrap();
        let bias = (rho.coherence() - input).re;
        let overlap = (-5.0f64).exp();
        assert!((bias - 0.5 * overlap).abs() < 0.1 * overlap, "bias {bias}");
        let rho = reconstruct(&compute_gbar_single(&superposition(FRAC_PI_2), 600).unwrap()).unwrap();
        assert!((rho.coherence() - input).norm() < 1e-4);
    }

    #[test]
    fn both_routes_and_visibility_agree_over_relative_phases() {
        for k in 0..8 {
            let phase = k as f64 * PI / 4.0;
            let s = superposition(phase);
            let ints = integrate_terms(&s, 600).unwrap();
            let direct = reconstruct(&compute_gbar_single(&s, 600).unwrap()).unwrap();
            let via_peaks = reconstruct_from_peaks(&ints).unwrap();
            assert!(direct.rho.max_abs_diff(&via_peaks.rho) < 1e-3, "phase {phase}");
            let v = visibility(&ints.peak_table(&default_phases(12)).p_mid).unwrap();
            assert!((v - 2.0 * direct.coherence().norm()).abs() < 1e-3);
            assert!((direct.coherence().arg() - (-phase)).sin().abs() < 1e-3);
        }
    }

    #[test]
    fn partially_coherent_visibility() {
        let rho = ComplexMatrix::from_rows(&[
            &[C64::new(0.5, 0.0), C64::new(0.25, 0.0)],
            &[C64::new(0.25, 0.0), C64::new(0.5, 0.0)],
        ]);
        let s = SinglePhotonWavepacket::from_density(rho, 2.0, bins()).unwrap();
        let ints = integrate_terms(&s, 600).unwrap();
        let v = visibility(&ints.peak_table(&default_phases(12)).p_mid).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
        let mixed =
            SinglePhotonWavepacket::from_density(ComplexMatrix::identity(2).scale_real(0.5), 2.0, bins()).unwrap();
        let v = visibility(&integrate_terms(&mixed, 200).unwrap().peak_table(&default_phases(12)).p_mid).unwrap();
        assert!(v.abs() < 1e-4);
    }

    #[test]
    fn fringe_fit_needs_three_phases() {
        assert!(matches!(fit_fringe(&[(0.0, 1.0), (1.0, 2.0), (TAU_PLUS, 1.0)]), Err(Error::NoCounts(_))));
        assert!(matches!(fit_fringe(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), Err(Error::NoCounts(_))));
    }

    const TAU_PLUS: f64 = std::f64::consts::TAU;

    #[test]
    fn fringe_fit_recovers_parameters() {
        let samples: Vec<(f64, f64)> =
            default_phases(12).into_iter().map(|p| (p, 2.0 + 1.5 * (p - 0.7).cos())).collect();
        let f = fit_fringe(&samples).unwrap();
        assert!((f.offset - 2.0).abs() < 1e-12 && (f.amplitude - 1.5).abs() < 1e-12 && (f.phase - 0.7).abs() < 1e-12);
        assert!((f.visibility - 0.75).abs() < 1e-12);
    }

    #[test]
    fn trigger_sifting() {
        let dt = 0.01;
        let g1: Vec<f64> = (0..500).map(|k| (k as f64 * dt).sin().abs()).collect();
        let lags: Vec<usize> = (0..400).step_by(7).collect();
        let delta = trigger_correlate(&g1, &[1.0 / dt], dt, &lags);
        for (m, &lag) in lags.iter().enumerate() {
            assert!((delta[m] - g1[lag]).abs() < 1e-12);
        }
        let eps_steps = 3;
        let box_out = trigger_correlate(&g1, &vec![1.0; eps_steps], dt, &lags);
        for (m, &lag) in lags.iter().enumerate() {
            assert!((box_out[m] - eps_steps as f64 * dt * g1[lag]).abs() < 1e-3);
        }
    }

    #[test]
    fn trigger_trace_shows_three_peaks() {
        let s = superposition(0.0);
        let steps = 100;
        let g1 = g1_trace(&s, 0.0, steps).unwrap();
        // one-sided envelope: emission follows the trigger
        let trigger: Vec<f64> = (0..10).map(|j| (-(j as f64).powi(2) / 4.0).exp()).collect();
        let lags: Vec<usize> = (0..g1.len()).collect();
        let g2 = trigger_correlate(&g1, &trigger, 0.1, &lags);
        let is_max = |k: usize| (k == 0 || g2[k] > g2[k - 1]) && g2[k] >= g2[k + 1] && g2[k] > 1e-3;
        let maxima: Vec<usize> = (0..g2.len() - 1).filter(|&k| is_max(k)).collect();
        assert_eq!(maxima.len(), 3, "{maxima:?}");
        for (w, &k) in maxima.iter().enumerate() {
            assert!(k >= w * steps && k < (w + 1) * steps);
        }
    }
}
