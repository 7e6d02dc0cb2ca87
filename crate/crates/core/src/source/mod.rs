//! Photon sources: a driven three-level cascade and closed-form wavepackets.

pub mod emitter;
pub mod propagate;
pub mod wavepacket;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emitter::{
    bin_start_pulses, build_liouvillian, free_liouvillian, sigma_b, sigma_x, CascadeParams, CollapseChannel,
    EmitterModel, Envelope, Pulse, Transition, CASCADE_DIM, LEVEL_B, LEVEL_G, LEVEL_X,
};
pub use propagate::{propagate, Propagator};
pub use wavepacket::{SinglePhotonWavepacket, WavepacketState};

/// Partition of the time axis into back-to-back bins starting at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinConfig {
    /// Bin width, equal to the bin separation.
    pub t_bin: f64,
    pub n_bins_observed: usize,
}

impl TimeBinConfig {
    pub fn new(t_bin: f64) -> Result<Self> {
        if !(t_bin > 0.0 && t_bin.is_finite()) {
            return Err(Error::InvalidModel(format!("bin width must be positive, got {t_bin}")));
        }
        Ok(Self { t_bin, n_bins_observed: 3 })
    }

    /// Window `k` as `[kT, (k+1)T]`.
    pub fn window(&self, k: usize) -> Result<(f64, f64)> {
        if k >= self.n_bins_observed {
            return Err(Error::Window(format!("window {k} outside the {} observed bins", self.n_bins_observed)));
        }
        Ok((k as f64 * self.t_bin, (k + 1) as f64 * self.t_bin))
    }

    pub fn horizon(&self) -> f64 {
        self.n_bins_observed as f64 * self.t_bin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_tile_the_axis() {
        let b = TimeBinConfig::new(10.0).unwrap();
        assert_eq!(b.window(0).unwrap(), (0.0, 10.0));
        assert_eq!(b.window(2).unwrap(), (20.0, 30.0));
        assert!(matches!(b.window(3), Err(Error::Window(_))));
        assert_eq!(b.horizon(), 30.0);
        assert!(TimeBinConfig::new(0.0).is_err());
    }
}
