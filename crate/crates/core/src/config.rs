//! Scenario files: a TOML description of the source, phase scans, grids and outputs.
//!
//! Units are natural: the exciton decay rate is 1 by convention and all times
//! are in units of its inverse.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationEngine, CorrelationSource};
use crate::error::{Error, Result};
use crate::histogram::{DEFAULT_CELLS_PER_BIN, DEFAULT_SUBSTEPS};
use crate::math::ComplexMatrix;
use crate::source::{CascadeParams, EmitterModel, Pulse, SinglePhotonWavepacket, TimeBinConfig, WavepacketState};

/// Tolerance on `cells_per_bin` when derived from a cell width.
const RESOLUTION_TOL: f64 = 1e-9;
/// Squared-norm deviation above which amplitudes are renormalized with a warning.
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub source: SourceConfig,
    #[serde(default)]
    pub phases: PhaseConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceConfig {
    Lindblad(LindbladConfig),
    Wavepacket(WavepacketConfig),
}

/// Driven cascade solved with the master equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladConfig {
    #[serde(default = "default_t_bin")]
    pub t_bin: f64,
    #[serde(default = "default_gamma_b")]
    pub gamma_b: f64,
    #[serde(default = "default_gamma_x")]
    pub gamma_x: f64,
    #[serde(default)]
    pub dephasing: f64,
    pub pulses: Vec<Pulse>,
}

/// Closed-form exponential wavepackets in a given time-bin state.
///
/// Give either `amplitudes` (pure state, `[re, im]` per basis state) or
/// `density` (rows of `[re, im]` entries). Two entries describe a single
/// photon in (E, L); four describe a pair in (EE, EL, LE, LL).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavepacketConfig {
    #[serde(default = "default_t_bin")]
    pub t_bin: f64,
    #[serde(default = "default_gamma_b")]
    pub gamma_b: f64,
    #[serde(default = "default_gamma_x")]
    pub gamma_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<Vec<[f64; 2]>>>,
}

fn default_t_bin() -> f64 {
    10.0
}
fn default_gamma_b() -> f64 {
    2.0
}
fn default_gamma_x() -> f64 {
    1.0
}

/// A list of angles or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    List(Vec<f64>),
    Linspace {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        endpoint: bool,
    },
}

impl PhaseSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            PhaseSpec::List(ref v) => v.clone(),
            PhaseSpec::Linspace { start, stop, count, endpoint } => {
                let div = if endpoint { count.saturating_sub(1).max(1) } else { count.max(1) };
                (0..count).map(|k| start + (stop - start) * k as f64 / div as f64).collect()
            }
        }
    }

    fn full_turn(count: usize) -> Self {
        PhaseSpec::Linspace { start: 0.0, stop: TAU, count, endpoint: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    /// Single-photon fringe scan.
    #[serde(default = "default_phi")]
    pub phi: PhaseSpec,
    /// Center-peak scan axes.
    #[serde(default = "default_pair_axis")]
    pub phi_b: PhaseSpec,
    #[serde(default = "default_pair_axis")]
    pub phi_x: PhaseSpec,
    /// `(φ_B, φ_X)` of the coincidence histogram.
    #[serde(default)]
    pub histogram: [f64; 2],
}

fn default_phi() -> PhaseSpec {
    PhaseSpec::full_turn(16)
}
fn default_pair_axis() -> PhaseSpec {
    PhaseSpec::full_turn(8)
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { phi: default_phi(), phi_b: default_pair_axis(), phi_x: default_pair_axis(), histogram: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Propagation steps and quadrature intervals per time bin.
    #[serde(default = "default_steps")]
    pub steps_per_bin: usize,
    /// Histogram cells per time bin.
    #[serde(default = "default_cells")]
    pub cells_per_bin: usize,
    /// Quadrature intervals per histogram cell.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_steps() -> usize {
    600
}
fn default_cells() -> usize {
    DEFAULT_CELLS_PER_BIN
}
fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { steps_per_bin: default_steps(), cells_per_bin: default_cells(), substeps: default_substeps() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Peaks,
    Rho1q,
    Visibility,
    Rho2q,
    Stokes,
    Peaks3x3,
    CenterScan,
    Concurrence,
    Histogram,
    Projection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifacts to write; empty means every artifact of the subcommand.
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
    /// Project the reconstructed pair state onto the physical set.
    #[serde(default)]
    pub project_physical: bool,
}

impl OutputConfig {
    pub fn wants(&self, a: Artifact) -> bool {
        self.artifacts.is_empty() || self.artifacts.contains(&a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random dissipation-free instances in the oracle comparison.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Conjugate the phase of one pair term before the consistency check.
    #[serde(default)]
    pub inject_sign_flip: bool,
    #[serde(default)]
    pub flipped_term: usize,
}

fn default_seeds() -> usize {
    100
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seeds: default_seeds(), inject_sign_flip: false, flipped_term: 0 }
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(field, format!("must be positive, got {v}")))
    }
}

fn complex_of(pair: &[f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

impl ScenarioConfig {
    /// Parses and validates; amplitude vectors are renormalized with a warning.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets the histogram cell width; it must divide the bin width.
    pub fn set_resolution(&mut self, resolution: f64) -> Result<()> {
        check_positive("resolution", resolution)?;
        let cells = self.t_bin() / resolution;
        let rounded = cells.round();
        if rounded < 1.0 || (cells - rounded).abs() > RESOLUTION_TOL * cells {
            return Err(config_err(
                "resolution",
                format!("{resolution} does not divide the bin width {}", self.t_bin()),
            ));
        }
        self.grid.cells_per_bin = rounded as usize;
        Ok(())
    }

    pub fn t_bin(&self) -> f64 {
        match &self.source {
            SourceConfig::Lindblad(c) => c.t_bin,
            SourceConfig::Wavepacket(c) => c.t_bin,
        }
    }

    pub fn bins(&self) -> Result<TimeBinConfig> {
        TimeBinConfig::new(self.t_bin())
    }

    fn normalize(&mut self) {
        if let SourceConfig::Wavepacket(WavepacketConfig { amplitudes: Some(a), .. }) = &mut self.source {
            let norm2: f64 = a.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum();
            if norm2 > 0.0 && norm2.is_finite() && (norm2 - 1.0).abs() > NORM_TOL {
                log::warn!("source.amplitudes: squared norm {norm2}, renormalizing");
                let s = norm2.sqrt();
                for p in a.iter_mut() {
                    p[0] /= s;
                    p[1] /= s;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.source {
            SourceConfig::Lindblad(c) => {
                check_positive("source.t_bin", c.t_bin)?;
                check_positive("source.gamma_b", c.gamma_b)?;
                check_positive("source.gamma_x", c.gamma_x)?;
                if !(c.dephasing >= 0.0 && c.dephasing.is_finite()) {
                    return Err(config_err("source.dephasing", format!("must be >= 0, got {}", c.dephasing)));
                }
                if c.pulses.is_empty() {
                    return Err(config_err("source.pulses", "at least one pulse is required"));
                }
                for (k, p) in c.pulses.iter().enumerate() {
                    check_positive(&format!("source.pulses[{k}].width"), p.width)?;
                    p.validate().map_err(|e| config_err(&format!("source.pulses[{k}]"), e))?;
                }
            }
            SourceConfig::Wavepacket(c) => {
                check_positive("source.t_bin", c.t_bin)?;
                check_positive("source.gamma_b", c.gamma_b)?;
                check_positive("source.gamma_x", c.gamma_x)?;
                match (&c.amplitudes, &c.density) {
                    (Some(a), None) => {
                        if a.len() != 2 && a.len() != 4 {
                            return Err(config_err(
                                "source.amplitudes",
                                format!("needs 2 or 4 entries, got {}", a.len()),
                            ));
                        }
                        let norm2: f64 = a.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum();
                        if !(norm2 > 0.0 && norm2.is_finite()) {
                            return Err(config_err("source.amplitudes", "must not all vanish"));
                        }
                    }
                    (None, Some(d)) => {
                        if (d.len() != 2 && d.len() != 4) || d.iter().any(|r| r.len() != d.len()) {
                            return Err(config_err("source.density", "must be a square 2x2 or 4x4 array"));
                        }
                    }
                    _ => return Err(config_err("source", "give exactly one of amplitudes or density")),
                }
                self.wavepacket_density().map(|_| ())?;
            }
        }
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(config_err(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("grid.steps_per_bin", self.grid.steps_per_bin)?;
        positive("grid.cells_per_bin", self.grid.cells_per_bin)?;
        positive("grid.substeps", self.grid.substeps)?;
        for (field, spec) in [
            ("phases.phi", &self.phases.phi),
            ("phases.phi_b", &self.phases.phi_b),
            ("phases.phi_x", &self.phases.phi_x),
        ] {
            let v = spec.values();
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(config_err(field, "needs at least one finite angle"));
            }
        }
        if self.verify.flipped_term >= 16 {
            return Err(config_err(
                "verify.flipped_term",
                format!("must be below 16, got {}", self.verify.flipped_term),
            ));
        }
        Ok(())
    }

    /// Density matrix of a wavepacket source, or `None` for a Lindblad source.
    pub fn wavepacket_density(&self) -> Result<Option<ComplexMatrix>> {
        let SourceConfig::Wavepacket(c) = &self.source else {
            return Ok(None);
        };
        let rho = match (&c.amplitudes, &c.density) {
            (Some(a), _) => ComplexMatrix::projector(&a.iter().map(complex_of).collect::<Vec<_>>()),
            (None, Some(d)) => {
                let n = d.len();
                let data = (0..n * n).map(|k| complex_of(&d[k / n][k % n])).collect();
                ComplexMatrix::from_vec(n, n, data).map_err(|e| config_err("source.density", e))?
            }
            (None, None) => return Err(config_err("source", "give exactly one of amplitudes or density")),
        };
        Ok(Some(rho))
    }

    fn engine(&self, c: &LindbladConfig) -> Result<CorrelationEngine> {
        let params =
            CascadeParams { gamma_b: c.gamma_b, gamma_x: c.gamma_x, dephasing: c.dephasing, pulses: c.pulses.clone() };
        let model = EmitterModel::cascade(&params).map_err(|e| config_err("source", e))?;
        CorrelationEngine::new(model, self.bins()?, self.grid.steps_per_bin)
    }

    /// Source of the single-photon pipeline, read on the exciton channel.
    pub fn single_source(&self) -> Result<Box<dyn CorrelationSource>> {
        match &self.source {
            SourceConfig::Lindblad(c) => Ok(Box::new(self.engine(c)?)),
            SourceConfig::Wavepacket(c) => {
                let rho = self.wavepacket_density()?.expect("wavepacket source");
                if rho.rows() != 2 {
                    return Err(config_err("source", "single-photon scenarios need 2 amplitudes or a 2x2 density"));
                }
                let s = SinglePhotonWavepacket::from_density(rho, c.gamma_x, self.bins()?)
                    .map_err(|e| config_err("source", e))?;
                Ok(Box::new(s))
            }
        }
    }

    /// Source of the pair pipeline.
    pub fn pair_source(&self) -> Result<Box<dyn CorrelationSource>> {
        match &self.source {
            SourceConfig::Lindblad(c) => Ok(Box::new(self.engine(c)?)),
            SourceConfig::Wavepacket(c) => {
                let rho = self.wavepacket_density()?.expect("wavepacket source");
                if rho.rows() != 4 {
                    return Err(config_err("source", "pair scenarios need 4 amplitudes or a 4x4 density"));
                }
                let s = WavepacketState::from_density(rho, c.gamma_b, c.gamma_x, self.bins()?)
                    .map_err(|e| config_err("source", e))?;
                Ok(Box::new(s))
            }
        }
    }

    /// Bell pair `(|EE⟩ + |LL⟩)/√2` from exponential wavepackets at default rates.
    pub fn default_pair() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            seed: 0,
            source: SourceConfig::Wavepacket(WavepacketConfig {
                t_bin: default_t_bin(),
                gamma_b: default_gamma_b(),
                gamma_x: default_gamma_x(),
                amplitudes: Some(vec![[a, 0.0], [0.0, 0.0], [0.0, 0.0], [a, 0.0]]),
                density: None,
            }),
            phases: PhaseConfig::default(),
            grid: GridConfig::default(),
            outputs: OutputConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"
seed = 3

[source]
kind = "wavepacket"
t_bin = 10.0
amplitudes = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]

[phases]
phi_b = { start = 0.0, stop = 6.283185307179586, count = 4 }
phi_x = [0.0, 1.0]
"#;

    #[test]
    fn parses_and_renormalizes() {
        let cfg = ScenarioConfig::from_toml_str(PAIR).unwrap();
        let SourceConfig::Wavepacket(w) = &cfg.source else { panic!() };
        let a = w.amplitudes.as_ref().unwrap();
        assert!((a[0][0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cfg.phases.phi_b.values().len(), 4);
        assert_eq!(cfg.phases.phi_x.values(), vec![0.0, 1.0]);
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.pair_source().unwrap().time_bins().t_bin, 10.0);
        assert!(cfg.single_source().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ScenarioConfig::from_toml_str(PAIR).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let lindblad = r#"
[source]
kind = "lindblad"
pulses = [{ center = 1.0, area = 0.05, width = 0.2, transition = "gb" }]
"#;
        let cfg = ScenarioConfig::from_toml_str(lindblad).unwrap();
        assert_eq!(cfg, ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap());
        let d = ScenarioConfig::default_pair();
        assert_eq!(d, ScenarioConfig::from_toml_str(&d.to_toml_string().unwrap()).unwrap());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = PAIR.replace("t_bin = 10.0", "t_bin = -1.0");
        let msg = ScenarioConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("source.t_bin"), "{msg}");
        let msg = ScenarioConfig::from_toml_str("[source]\nkind = \"wavepacket\"\nt_bin = ").unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let msg =
            ScenarioConfig::from_toml_str(&format!("{PAIR}\n[grid]\nsteps_per_bin = 0\n")).unwrap_err().to_string();
        assert!(msg.contains("grid.steps_per_bin"), "{msg}");
        let msg = ScenarioConfig::from_toml_str(&format!("{PAIR}\n[grid]\nbogus = 1\n")).unwrap_err().to_string();
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn resolution_must_divide_the_bin() {
        let mut cfg = ScenarioConfig::default_pair();
        cfg.set_resolution(0.5).unwrap();
        assert_eq!(cfg.grid.cells_per_bin, 20);
        assert!(cfg.set_resolution(0.3).is_err());
        assert!(cfg.set_resolution(-1.0).is_err());
    }

    #[test]
    fn linspace_endpoint_handling() {
        let open = PhaseSpec::Linspace { start: 0.0, stop: 1.0, count: 4, endpoint: false };
        assert_eq!(open.values(), vec![0.0, 0.25, 0.5, 0.75]);
        let closed = PhaseSpec::Linspace { start: 0.0, stop: 1.0, count: 3, endpoint: true };
        assert_eq!(closed.values(), vec![0.0, 0.5, 1.0]);
    }
}
