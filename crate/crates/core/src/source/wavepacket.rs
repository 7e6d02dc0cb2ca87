use num_complex::Complex64 as C64;

use crate::correlation::{Channel, CorrelationRequest, CorrelationSource, EventOp, Side};
use crate::error::{Error, Result};
use crate::math::{hermitian_eigen, ComplexMatrix, ZERO};
use crate::source::TimeBinConfig;

const NORM_TOL: f64 = 1e-9;

/// Exponential mode of a photon emitted at the start of bin `bin`.
fn mode(gamma: f64, t_bin: f64, bin: usize, t: f64) -> f64 {
    let s = t - bin as f64 * t_bin;
    if s < 0.0 {
        0.0
    } else {
        gamma.sqrt() * (-0.5 * gamma * s).exp()
    }
}

/// Overlap of the early and late modes, `⟨φ_i|φ_j⟩`.
fn overlap(gamma: f64, t_bin: f64, i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        (-0.5 * gamma * t_bin).exp()
    }
}

fn check_density(rho: &ComplexMatrix, dim: usize) -> Result<()> {
    if rho.rows() != dim || !rho.is_square() {
        return Err(Error::Dimension(format!("density matrix must be {dim}x{dim}")));
    }
    if !rho.is_hermitian(NORM_TOL) {
        return Err(Error::InvalidModel("density matrix is not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidModel(format!("density matrix trace is {}", rho.trace().re)));
    }
    let (eigs, _) = hermitian_eigen(rho)?;
    if eigs.iter().any(|&l| l < -NORM_TOL) {
        return Err(Error::InvalidModel("density matrix is not positive semidefinite".into()));
    }
    Ok(())
}

fn check_rate(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidModel(format!("decay rate must be positive, got {gamma}")));
    }
    Ok(())
}

/// Per-side times of each channel, or `None` if the request cannot be non-zero.
struct Tally {
    left: Vec<(Channel, f64)>,
    right: Vec<(Channel, f64)>,
}

fn tally(request: &CorrelationRequest) -> Result<Tally> {
    let mut t = Tally { left: vec![], right: vec![] };
    for e in &request.events {
        let EventOp::Channel(c) = e.op else {
            return Err(Error::UnsupportedEvent("wavepacket sources only answer photon-channel events".into()));
        };
        match e.side {
            Side::Left => t.left.push((c, e.time)),
            Side::Right => t.right.push((c, e.time)),
        }
    }
    Ok(t)
}

fn time_of(events: &[(Channel, f64)], c: Channel) -> Option<f64> {
    events.iter().find(|(ch, _)| *ch == c).map(|&(_, t)| t)
}

fn count(events: &[(Channel, f64)], c: Channel) -> usize {
    events.iter().filter(|(ch, _)| *ch == c).count()
}

/// Two-photon time-bin state with independent exponential B and X modes.
///
/// `rho` is indexed `(b, x)` with `b, x ∈ {early, late}` in the order EE, EL, LE,
/// LL, the biexciton photon first.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    rho: ComplexMatrix,
    gamma_b: f64,
    gamma_x: f64,
    bins: TimeBinConfig,
}

impl WavepacketState {
    /// Pure state from `[α_EE, α_EL, α_LE, α_LL]`, which must be normalized.
    pub fn from_amplitudes(amplitudes: [C64; 4], gamma_b: f64, gamma_x: f64, bins: TimeBinConfig) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidModel(format!("amplitudes have squared norm {norm}, expected 1")));
        }
        Self::from_density(ComplexMatrix::projector(&amplitudes), gamma_b, gamma_x, bins)
    }

    /// As `from_amplitudes`, rescaling to unit norm first.
    pub fn from_amplitudes_normalized(
        amplitudes: [C64; 4],
        gamma_b: f64,
        gamma_x: f64,
        bins: TimeBinConfig,
    ) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidModel("amplitudes are all zero".into()));
        }
        Self::from_amplitudes(amplitudes.map(|a| a / norm), gamma_b, gamma_x, bins)
    }

    /// Mixed two-photon state in the EE, EL, LE, LL basis.
    pub fn from_density(rho: ComplexMatrix, gamma_b: f64, gamma_x: f64, bins: TimeBinConfig) -> Result<Self> {
        check_density(&rho, 4)?;
        check_rate(gamma_b)?;
        check_rate(gamma_x)?;
        Ok(Self { rho, gamma_b, gamma_x, bins })
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.gamma_b, self.gamma_x)
    }

    fn gamma(&self, c: Channel) -> f64 {
        match c {
            Channel::B => self.gamma_b,
            Channel::X => self.gamma_x,
        }
    }

    fn phi(&self, c: Channel, bin: usize, t: f64) -> f64 {
        mode(self.gamma(c), self.bins.t_bin, bin, t)
    }

    /// Closed-form value of a photon-channel correlator.
    pub fn analytic_correlator(&self, request: &CorrelationRequest) -> Result<C64> {
        let t = tally(request)?;
        for c in [Channel::B, Channel::X] {
            let (l, r) = (count(&t.left, c), count(&t.right, c));
            if l != r || l > 1 {
                return Ok(ZERO);
            }
        }
        let idx = |b: usize, x: usize| 2 * b + x;
        let (lb, lx) = (time_of(&t.left, Channel::B), time_of(&t.left, Channel::X));
        let (rb, rx) = (time_of(&t.right, Channel::B), time_of(&t.right, Channel::X));
        // weight of a channel on one side: mode value if measured, else 1
        let w = |c: Channel, at: Option<f64>, bin: usize| at.map_or(1.0, |t| self.phi(c, bin, t));
        let mut sum = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                let ket = w(Channel::B, lb, i) * w(Channel::X, lx, j);
                if ket == 0.0 {
                    continue;
                }
                for k in 0..2 {
                    for l in 0..2 {
                        // unmeasured channels are traced out through the mode overlap
                        let bra_b = if rb.is_some() {
                            w(Channel::B, rb, k)
                        } else {
                            overlap(self.gamma_b, self.bins.t_bin, k, i)
                        };
                        let bra_x = if rx.is_some() {
                            w(Channel::X, rx, l)
                        } else {
                            overlap(self.gamma_x, self.bins.t_bin, l, j)
                        };
                        sum += self.rho[(idx(i, j), idx(k, l))] * (ket * bra_b * bra_x);
                    }
                }
            }
        }
        Ok(sum)
    }
}

impl CorrelationSource for WavepacketState {
    fn correlate(&self, request: &CorrelationRequest) -> Result<C64> {
        self.analytic_correlator(request)
    }

    fn time_bins(&self) -> TimeBinConfig {
        self.bins
    }
}

/// Single-photon time-bin state on channel X, `rho` in the early/late basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonWavepacket {
    rho: ComplexMatrix,
    gamma: f64,
    bins: TimeBinConfig,
}

impl SinglePhotonWavepacket {
    pub fn from_amplitudes(early: C64, late: C64, gamma: f64, bins: TimeBinConfig) -> Result<Self> {
        let norm = early.norm_sqr() + late.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidModel(format!("amplitudes have squared norm {norm}, expected 1")));
        }
        Self::from_density(ComplexMatrix::projector(&[early, late]), gamma, bins)
    }

    pub fn from_density(rho: ComplexMatrix, gamma: f64, bins: TimeBinConfig) -> Result<Self> {
        check_density(&rho, 2)?;
        check_rate(gamma)?;
        Ok(Self { rho, gamma, bins })
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn analytic_correlator(&self, request: &CorrelationRequest) -> Result<C64> {
        let t = tally(request)?;
        if count(&t.left, Channel::B) + count(&t.right, Channel::B) > 0 {
            return Ok(ZERO);
        }
        let (Some(u), Some(s)) = (time_of(&t.left, Channel::X), time_of(&t.right, Channel::X)) else {
            return Ok(if t.left.is_empty() && t.right.is_empty() { self.rho.trace() } else { ZERO });
        };
        if t.left.len() != 1 || t.right.len() != 1 {
            return Ok(ZERO);
        }
        let mut sum = ZERO;
        for j in 0..2 {
            for l in 0..2 {
                let w = mode(self.gamma, self.bins.t_bin, j, u) * mode(self.gamma, self.bins.t_bin, l, s);
                sum += self.rho[(j, l)] * w;
            }
        }
        Ok(sum)
    }
}

impl CorrelationSource for SinglePhotonWavepacket {
    fn correlate(&self, request: &CorrelationRequest) -> Result<C64> {
        self.analytic_correlator(request)
    }

    fn time_bins(&self) -> TimeBinConfig {
        self.bins
    }
}
