use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{hermitian_eigen, ComplexMatrix, ONE};

/// Ground state index.
pub const LEVEL_G: usize = 0;
/// Exciton index.
pub const LEVEL_X: usize = 1;
/// Biexciton index.
pub const LEVEL_B: usize = 2;
pub const CASCADE_DIM: usize = 3;

/// Truncation of Gaussian envelopes, in units of the standard deviation.
pub const GAUSSIAN_CUTOFF: f64 = 5.0;

/// σ_B = |X⟩⟨B|, the biexciton-photon transition.
pub fn sigma_b() -> ComplexMatrix {
    ComplexMatrix::ket_bra(CASCADE_DIM, LEVEL_X, LEVEL_B)
}

/// σ_X = |G⟩⟨X|, the exciton-photon transition.
pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::ket_bra(CASCADE_DIM, LEVEL_G, LEVEL_X)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    #[default]
    Gaussian,
    Rectangular,
}

/// Which pair of levels a pulse couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    /// Effective two-photon resonant coupling G ↔ B.
    #[serde(rename = "gb")]
    GroundBiexciton,
    #[serde(rename = "gx")]
    GroundExciton,
}

impl Transition {
    fn levels(self) -> (usize, usize) {
        match self {
            Transition::GroundBiexciton => (LEVEL_G, LEVEL_B),
            Transition::GroundExciton => (LEVEL_G, LEVEL_X),
        }
    }
}

/// Resonant classical drive. `width` is the standard deviation for Gaussian
/// envelopes and the full duration for rectangular ones; `area` is ∫Ω dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub center: f64,
    pub area: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub envelope: Envelope,
    pub width: f64,
    pub transition: Transition,
}

impl Pulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidModel(format!("pulse width must be positive, got {}", self.width)));
        }
        if !(self.center.is_finite() && self.area.is_finite() && self.phase.is_finite()) {
            return Err(Error::InvalidModel("pulse parameters must be finite".into()));
        }
        Ok(())
    }

    /// Support of the envelope; zero outside.
    pub fn support(&self) -> (f64, f64) {
        match self.envelope {
            Envelope::Gaussian => {
                (self.center - GAUSSIAN_CUTOFF * self.width, self.center + GAUSSIAN_CUTOFF * self.width)
            }
            Envelope::Rectangular => (self.center - 0.5 * self.width, self.center + 0.5 * self.width),
        }
    }

    /// Rabi frequency Ω(t), normalised so the truncated envelope integrates to `area`.
    pub fn rabi(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => self.area / self.width,
            Envelope::Gaussian => {
                let norm =
                    (2.0 * std::f64::consts::PI).sqrt() * self.width * erf(GAUSSIAN_CUTOFF / std::f64::consts::SQRT_2);
                let x = (t - self.center) / self.width;
                self.area * (-0.5 * x * x).exp() / norm
            }
        }
    }

    /// Magnitude of the envelope, used as the trigger reference Ω₀(t).
    pub fn envelope_magnitude(&self, t: f64) -> f64 {
        self.rabi(t).abs()
    }
}

impl Pulse {
    /// Gaussian pulse of standard deviation `width` centered at `center`.
    pub fn gaussian(center: f64, area: f64, width: f64, transition: Transition) -> Self {
        Self { center, area, phase: 0.0, envelope: Envelope::Gaussian, width, transition }
    }
}

/// One Gaussian pulse per bin, each centered `GAUSSIAN_CUTOFF` widths after the
/// bin start so the truncated envelope lies inside its bin.
pub fn bin_start_pulses(t_bin: f64, n_bins: usize, area: f64, width: f64, transition: Transition) -> Vec<Pulse> {
    (0..n_bins).map(|k| Pulse::gaussian(k as f64 * t_bin + GAUSSIAN_CUTOFF * width, area, width, transition)).collect()
}

// Maclaurin series below 3, erfc continued fraction above.
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        // Maclaurin series
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        // erfc continued fraction (Lentz)
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 * 0.5;
            d = x + a * d;
            d = 1.0 / d;
            c = x + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseChannel {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

/// Driven, damped few-level emitter.
#[derive(Debug, Clone)]
pub struct EmitterModel {
    dim: usize,
    hamiltonian_static: ComplexMatrix,
    pulses: Vec<Pulse>,
    collapse_channels: Vec<CollapseChannel>,
    initial_state: ComplexMatrix,
    initial_time: f64,
}

/// Parameters of the G–X–B cascade in natural units (γ_X = 1 by convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub gamma_b: f64,
    pub gamma_x: f64,
    /// Pure dephasing of the excited levels; 0 for radiatively limited emitters.
    #[serde(default)]
    pub dephasing: f64,
    pub pulses: Vec<Pulse>,
}

impl EmitterModel {
    pub fn new(
        hamiltonian_static: ComplexMatrix,
        pulses: Vec<Pulse>,
        collapse_channels: Vec<CollapseChannel>,
        initial_state: ComplexMatrix,
        initial_time: f64,
    ) -> Result<Self> {
        let dim = hamiltonian_static.rows();
        if !hamiltonian_static.is_square() || dim == 0 || dim > 4 {
            return Err(Error::InvalidModel(format!(
                "static Hamiltonian must be square with dimension 1..=4, got {}x{}",
                hamiltonian_static.rows(),
                hamiltonian_static.cols()
            )));
        }
        if !hamiltonian_static.is_hermitian(1e-12) {
            return Err(Error::InvalidModel("static Hamiltonian is not Hermitian".into()));
        }
        for p in &pulses {
            p.validate()?;
            let (lo, hi) = p.transition.levels();
            if lo.max(hi) >= dim {
                return Err(Error::InvalidModel(format!(
                    "pulse addresses level {} in a {dim}-level model",
                    lo.max(hi)
                )));
            }
        }
        for c in &collapse_channels {
            if !(c.rate >= 0.0 && c.rate.is_finite()) {
                return Err(Error::InvalidModel(format!("collapse rate must be >= 0, got {}", c.rate)));
            }
            if c.operator.rows() != dim || !c.operator.is_square() {
                return Err(Error::InvalidModel("collapse operator dimension mismatch".into()));
            }
        }
        if initial_state.rows() != dim || !initial_state.is_square() {
            return Err(Error::InvalidModel("initial state dimension mismatch".into()));
        }
        if !initial_state.is_hermitian(1e-10) {
            return Err(Error::InvalidModel("initial state is not Hermitian".into()));
        }
        if (initial_state.trace() - ONE).norm() > 1e-10 {
            return Err(Error::InvalidModel(format!("initial state trace is {}, expected 1", initial_state.trace())));
        }
        let (eigs, _) = hermitian_eigen(&initial_state)?;
        if eigs.iter().any(|&l| l < -1e-10) {
            return Err(Error::InvalidModel("initial state is not positive semidefinite".into()));
        }
        if !initial_time.is_finite() {
            return Err(Error::InvalidModel("initial time must be finite".into()));
        }
        Ok(Self { dim, hamiltonian_static, pulses, collapse_channels, initial_state, initial_time })
    }

    /// Three-level cascade B → X → G starting in |G⟩ at t = 0.
    pub fn cascade(params: &CascadeParams) -> Result<Self> {
        if !(params.gamma_b > 0.0 && params.gamma_x > 0.0) {
            return Err(Error::InvalidModel("cascade decay rates must be positive".into()));
        }
        if params.dephasing < 0.0 {
            return Err(Error::InvalidModel("dephasing rate must be >= 0".into()));
        }
        let mut channels = vec![
            CollapseChannel { operator: sigma_b(), rate: params.gamma_b },
            CollapseChannel { operator: sigma_x(), rate: params.gamma_x },
        ];
        if params.dephasing > 0.0 {
            for level in [LEVEL_X, LEVEL_B] {
                channels.push(CollapseChannel {
                    operator: ComplexMatrix::ket_bra(CASCADE_DIM, level, level),
                    rate: params.dephasing,
                });
            }
        }
        Self::new(
            ComplexMatrix::zeros(CASCADE_DIM, CASCADE_DIM),
            params.pulses.clone(),
            channels,
            ComplexMatrix::ket_bra(CASCADE_DIM, LEVEL_G, LEVEL_G),
            0.0,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn collapse_channels(&self) -> &[CollapseChannel] {
        &self.collapse_channels
    }

    pub fn initial_state(&self) -> &ComplexMatrix {
        &self.initial_state
    }

    pub fn initial_time(&self) -> f64 {
        self.initial_time
    }

    pub fn hamiltonian_static(&self) -> &ComplexMatrix {
        &self.hamiltonian_static
    }

    pub fn with_initial_state(self, rho: ComplexMatrix) -> Result<Self> {
        Self::new(self.hamiltonian_static, self.pulses, self.collapse_channels, rho, self.initial_time)
    }

    pub fn is_driven(&self, t: f64) -> bool {
        self.pulses.iter().any(|p| p.rabi(t) != 0.0)
    }

    /// H(t) in the frame rotating with the (resonant) drives.
    pub fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        let mut h = self.hamiltonian_static.clone();
        for p in &self.pulses {
            let omega = p.rabi(t);
            if omega == 0.0 {
                continue;
            }
            let (lo, hi) = p.transition.levels();
            let coupling = C64::from_polar(0.5 * omega, p.phase);
            h[(hi, lo)] += coupling;
            h[(lo, hi)] += coupling.conj();
        }
        h
    }

    /// Envelope of the first pulse in time, reused as the trigger reference.
    pub fn trigger_pulse(&self) -> Option<&Pulse> {
        self.pulses.iter().min_by(|a, b| a.center.total_cmp(&b.center))
    }
}

/// Superoperator of dρ/dt = −i[H(t), ρ] + Σ γ (CρC† − ½{C†C, ρ}) acting on
/// column-stacked vec(ρ).
pub fn build_liouvillian(model: &EmitterModel, t: f64) -> ComplexMatrix {
    liouvillian_with(model, &model.hamiltonian(t))
}

/// Generator with every drive switched off.
pub fn free_liouvillian(model: &EmitterModel) -> ComplexMatrix {
    liouvillian_with(model, &model.hamiltonian_static)
}

fn liouvillian_with(model: &EmitterModel, h: &ComplexMatrix) -> ComplexMatrix {
    let d = model.dim;
    let id = ComplexMatrix::identity(d);
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (&id.kron(h) - &h.transpose().kron(&id)).scale(minus_i);
    for c in &model.collapse_channels {
        if c.rate == 0.0 {
            continue;
        }
        let cdc = &c.operator.adjoint() * &c.operator;
        let jump = c.operator.conj().kron(&c.operator);
        let anti = &id.kron(&cdc) + &cdc.transpose().kron(&id);
        let term = &jump - &anti.scale_real(0.5);
        l = &l + &term.scale_real(c.rate);
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ZERO;

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(GAUSSIAN_CUTOFF / std::f64::consts::SQRT_2) - 0.999_999_426_696_856_3).abs() < 1e-14);
    }

    #[test]
    fn pulse_area_integrates() {
        for envelope in [Envelope::Gaussian, Envelope::Rectangular] {
            let p = Pulse {
                center: 2.0,
                area: 1.3,
                phase: 0.0,
                envelope,
                width: 0.2,
                transition: Transition::GroundBiexciton,
            };
            let n = 200_000;
            let (lo, hi) = (0.0, 4.0);
            let h = (hi - lo) / n as f64;
            let area: f64 = (0..n).map(|k| p.rabi(lo + (k as f64 + 0.5) * h) * h).sum();
            assert!((area - 1.3).abs() < 1e-6, "{envelope:?}: {area}");
        }
    }

    #[test]
    fn closed_zero_hamiltonian_gives_zero_generator() {
        let m = EmitterModel::new(ComplexMatrix::zeros(3, 3), vec![], vec![], ComplexMatrix::ket_bra(3, 0, 0), 0.0)
            .unwrap();
        assert_eq!(build_liouvillian(&m, 0.3).max_abs(), 0.0);
    }

    #[test]
    fn single_decay_channel_rate() {
        let gamma = 0.7;
        let m = EmitterModel::new(
            ComplexMatrix::zeros(2, 2),
            vec![],
            vec![CollapseChannel { operator: ComplexMatrix::ket_bra(2, 0, 1), rate: gamma }],
            ComplexMatrix::ket_bra(2, 1, 1),
            0.0,
        )
        .unwrap();
        let l = build_liouvillian(&m, 0.0);
        let drho = ComplexMatrix::unvectorize(&l.mul_vec(&m.initial_state().vectorize()), 2, 2);
        assert!((drho[(1, 1)].re + gamma).abs() < 1e-15);
        assert!((drho[(0, 0)].re - gamma).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_is_trace_preserving() {
        let pulse = Pulse {
            center: 0.0,
            area: 2.0,
            phase: 0.4,
            envelope: Envelope::Gaussian,
            width: 0.3,
            transition: Transition::GroundBiexciton,
        };
        let m =
            EmitterModel::cascade(&CascadeParams { gamma_b: 2.0, gamma_x: 1.0, dephasing: 0.3, pulses: vec![pulse] })
                .unwrap();
        let l = build_liouvillian(&m, 0.1);
        let rho = ComplexMatrix::from_rows(&[
            &[C64::new(0.5, 0.0), C64::new(0.1, 0.2), ZERO],
            &[C64::new(0.1, -0.2), C64::new(0.3, 0.0), C64::new(0.05, 0.0)],
            &[ZERO, C64::new(0.05, 0.0), C64::new(0.2, 0.0)],
        ]);
        let drho = ComplexMatrix::unvectorize(&l.mul_vec(&rho.vectorize()), 3, 3);
        assert!(drho.trace().norm() < 1e-14);
        assert!(drho.is_hermitian(1e-14));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let bad_rate = EmitterModel::new(
            ComplexMatrix::zeros(2, 2),
            vec![],
            vec![CollapseChannel { operator: ComplexMatrix::ket_bra(2, 0, 1), rate: -1.0 }],
            ComplexMatrix::ket_bra(2, 1, 1),
            0.0,
        );
        assert!(matches!(bad_rate, Err(Error::InvalidModel(_))));
        let bad_trace = EmitterModel::new(ComplexMatrix::zeros(2, 2), vec![], vec![], ComplexMatrix::identity(2), 0.0);
        assert!(matches!(bad_trace, Err(Error::InvalidModel(_))));
        let bad_h =
            EmitterModel::new(ComplexMatrix::ket_bra(2, 0, 1), vec![], vec![], ComplexMatrix::ket_bra(2, 0, 0), 0.0);
        assert!(matches!(bad_h, Err(Error::InvalidModel(_))));
    }
}
