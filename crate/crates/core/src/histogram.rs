//! Two-time coincidence histograms and their projections onto a single time axis.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{correlate_node, CorrelationSource};
use crate::error::{Error, Result};
use crate::interferometer::{expand_pair, supported_terms, PhaseSetting, Window};
use crate::tomography::pair::rect_node;

/// Number of time bins on each histogram axis.
pub const N_WINDOWS: usize = 3;

/// Default histogram cells per time bin and quadrature intervals per cell.
pub const DEFAULT_CELLS_PER_BIN: usize = 60;
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Coincidence counts on a square `(t_B, t_X)` grid over `[0, 3T]²`.
///
/// `intensities[i][j]` is the mass of the cell with `t_B` in cell `i` and `t_X`
/// in cell `j`. Each cell is a trapezoid integral over `substeps²` intervals, so
/// the cells of a block sum to the block's composite integral with
/// `cells_per_bin · substeps` intervals per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeHistogram {
    pub resolution: f64,
    pub cells_per_bin: usize,
    pub intensities: Vec<Vec<f64>>,
}

impl TwoTimeHistogram {
    /// Cells per axis.
    pub fn size(&self) -> usize {
        self.intensities.len()
    }

    /// Cell centers along either axis.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.size()).map(|i| (i as f64 + 0.5) * self.resolution).collect()
    }

    pub fn total(&self) -> f64 {
        self.intensities.iter().flatten().sum()
    }

    /// Masses of the nine `[kT, (k+1)T]²` blocks, indexed `[b][x]`.
    pub fn block_sums(&self) -> [[f64; N_WINDOWS]; N_WINDOWS] {
        let n = self.cells_per_bin;
        let mut out = [[0.0; N_WINDOWS]; N_WINDOWS];
        for (i, row) in self.intensities.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i / n][j / n] += v;
            }
        }
        out
    }

    pub fn min_intensity(&self) -> f64 {
        self.intensities.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Coincidences binned along one combination of the two arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedHistogram {
    /// Bin centers.
    pub axis: Vec<f64>,
    pub intensities: Vec<f64>,
    pub resolution: f64,
}

impl ProjectedHistogram {
    pub fn total(&self) -> f64 {
        self.intensities.iter().sum()
    }

    /// Mass in `count` consecutive segments of width `period` starting at `start`.
    ///
    /// A bin belongs to the segment containing its center; bins outside all
    /// segments are dropped.
    pub fn segment_masses(&self, start: f64, period: f64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        for (&t, &v) in self.axis.iter().zip(&self.intensities) {
            // a relative nudge keeps centers lying on a boundary in the later segment
            let s = ((t - start) / period + 1e-9).floor();
            if s >= 0.0 && (s as usize) < count {
                out[s as usize] += v;
            }
        }
        out
    }

    /// Axis positions of strict local maxima whose height exceeds `threshold · max`.
    pub fn local_maxima(&self, threshold: f64) -> Vec<f64> {
        let v = &self.intensities;
        let top = v.iter().copied().fold(0.0, f64::max);
        let at = |k: usize| v.get(k).copied().unwrap_or(0.0);
        (0..v.len())
            .filter(|&k| v[k] > threshold * top && v[k] > if k == 0 { 0.0 } else { at(k - 1) } && v[k] >= at(k + 1))
            .map(|k| self.axis[k])
            .collect()
    }
}

/// Pointwise coincidences at `setting`, cell-integrated on a grid of
/// `cells_per_bin` cells per time bin with `substeps` quadrature intervals per cell.
///
/// Each block sums only the terms supported on it, so block sums equal
/// `pair_peak_table` at `cells_per_bin · substeps` steps per bin.
pub fn build_histogram<S: CorrelationSource + ?Sized>(
    source: &S,
    setting: &PhaseSetting,
    cells_per_bin: usize,
    substeps: usize,
) -> Result<TwoTimeHistogram> {
    if cells_per_bin == 0 || substeps == 0 {
        return Err(Error::Window("histogram needs at least one cell and one substep per bin".into()));
    }
    let t_bin = source.time_bins().t_bin;
    let terms = expand_pair(setting);
    let steps = cells_per_bin * substeps;
    let h = t_bin / steps as f64;
    let n = N_WINDOWS * cells_per_bin;
    let mut intensities = vec![vec![0.0; n]; n];
    for b in 0..N_WINDOWS {
        for x in 0..N_WINDOWS {
            let idx = supported_terms(&terms, Window::Pair(b, x))?;
            let span = |k: usize| (k as f64 * t_bin, (k + 1) as f64 * t_bin);
            let nodes: Vec<Vec<f64>> = (0..=steps)
                .into_par_iter()
                .map(|p| {
                    let t1 = rect_node(span(b), steps, p);
                    (0..=steps)
                        .map(|q| {
                            let t2 = rect_node(span(x), steps, q);
                            let mut sum = C64::new(0.0, 0.0);
                            for &i in &idx {
                                sum +=
                                    terms[i].phase_factor * correlate_node(source, &terms[i].request(t1, t2, t_bin))?;
                            }
                            Ok(sum.re)
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            for ci in 0..cells_per_bin {
                for cj in 0..cells_per_bin {
                    intensities[b * cells_per_bin + ci][x * cells_per_bin + cj] =
                        cell_mass(&nodes, ci * substeps, cj * substeps, substeps) * h * h;
                }
            }
        }
    }
    Ok(TwoTimeHistogram { resolution: t_bin / cells_per_bin as f64, cells_per_bin, intensities })
}

/// Unscaled tensor trapezoid sum over the `sub × sub` node block at `(p0, q0)`.
fn cell_mass(nodes: &[Vec<f64>], p0: usize, q0: usize, sub: usize) -> f64 {
    let w = |k: usize| if k == 0 || k == sub { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for a in 0..=sub {
        let row = &nodes[p0 + a];
        let s: f64 = (0..=sub).map(|c| w(c) * row[q0 + c]).sum();
        total += w(a) * s;
    }
    total
}

/// Sums cells along lines of constant `t_B + t_X`; bin `k` collects cells with `i + j = k`.
pub fn project_diagonal(h: &TwoTimeHistogram) -> ProjectedHistogram {
    let n = h.size();
    let mut intensities = vec![0.0; 2 * n - 1];
    for (i, row) in h.intensities.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            intensities[i + j] += v;
        }
    }
    let axis = (0..2 * n - 1).map(|k| (k as f64 + 1.0) * h.resolution).collect();
    ProjectedHistogram { axis, intensities, resolution: h.resolution }
}

/// Sums cells along lines of constant `t_B − t_X`; bin `k` collects cells with `i − j = k − (n − 1)`.
pub fn project_antidiagonal(h: &TwoTimeHistogram) -> ProjectedHistogram {
    let n = h.size();
    let mut intensities = vec![0.0; 2 * n - 1];
    for (i, row) in h.intensities.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            intensities[i + n - 1 - j] += v;
        }
    }
    let axis = (0..2 * n - 1).map(|k| (k as f64 - (n - 1) as f64) * h.resolution).collect();
    ProjectedHistogram { axis, intensities, resolution: h.resolution }
}

/// Five peak masses of the diagonal projection, one per `[kT, (k+1)T)` segment.
pub fn diagonal_peaks(p: &ProjectedHistogram, t_bin: f64) -> Vec<f64> {
    p.segment_masses(0.0, t_bin, 5)
}

/// Five peak masses of the anti-diagonal projection, segments centered on `kT`, `k = −2..=2`.
pub fn antidiagonal_peaks(p: &ProjectedHistogram, t_bin: f64) -> Vec<f64> {
    p.segment_masses(-2.5 * t_bin, t_bin, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ComplexMatrix, ZERO};
    use crate::source::{TimeBinConfig, WavepacketState};
    use crate::tomography::pair::pair_peak_table;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    const CELLS: usize = 20;
    const SUB: usize = 5;

    // γT ≥ 20 keeps the early modes' overlap with the next window below 1e-4
    fn source(amps: [C64; 4]) -> WavepacketState {
        WavepacketState::from_amplitudes_normalized(amps, 4.0, 2.0, TimeBinConfig::new(10.0).unwrap()).unwrap()
    }

    fn bell() -> WavepacketState {
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        source([a, ZERO, ZERO, a])
    }

    fn el_le() -> WavepacketState {
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        source([ZERO, a, a, ZERO])
    }

    #[test]
    fn block_sums_equal_peak_table() {
        let s = bell();
        let setting = PhaseSetting::new(0.4, 1.3);
        let h = build_histogram(&s, &setting, CELLS, SUB).unwrap();
        let table = pair_peak_table(&s, &setting, CELLS * SUB).unwrap();
        let blocks = h.block_sums();
        for b in 0..3 {
            for x in 0..3 {
                assert!((blocks[b][x] - table[b][x]).abs() < 1e-12, "block ({b},{x})");
            }
        }
        assert!(h.min_intensity() > -1e-9);
    }

    #[test]
    fn early_early_fills_only_the_lower_blocks() {
        let s = source([C64::new(1.0, 0.0), ZERO, ZERO, ZERO]);
        let blocks = build_histogram(&s, &PhaseSetting::new(0.7, 2.1), CELLS, SUB).unwrap().block_sums();
        let reference = blocks[0][0];
        for b in 0..3 {
            for x in 0..3 {
                if b < 2 && x < 2 {
                    assert!((blocks[b][x] - reference).abs() < 1e-3 * reference);
                } else {
                    assert!(blocks[b][x].abs() < 1e-6 * reference, "block ({b},{x}) = {}", blocks[b][x]);
                }
            }
        }
    }

    #[test]
    fn bell_center_block_vanishes_at_opposite_phase_sum() {
        let s = bell();
        let h = build_histogram(&s, &PhaseSetting::new(PI / 3.0, 2.0 * PI / 3.0), CELLS, SUB).unwrap();
        let blocks = h.block_sums();
        assert!(blocks[1][1] < 1e-3 * blocks[0][0], "center {}", blocks[1][1]);
    }

    #[test]
    fn corner_blocks_do_not_depend_on_phase() {
        let s = source([C64::new(0.5, 0.1), C64::new(0.3, -0.2), C64::new(0.1, 0.4), C64::new(0.6, 0.0)]);
        let reference = build_histogram(&s, &PhaseSetting::new(0.0, 0.0), 6, 4).unwrap().block_sums();
        for k in 1..6 {
            let setting = PhaseSetting::new(k as f64 * 1.1, k as f64 * -0.7);
            let blocks = build_histogram(&s, &setting, 6, 4).unwrap().block_sums();
            for (b, x) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
                assert!((blocks[b][x] - reference[b][x]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projections_conserve_mass() {
        let h = build_histogram(&el_le(), &PhaseSetting::new(0.2, 0.9), 8, 3).unwrap();
        let total = h.total();
        assert!((project_diagonal(&h).total() - total).abs() < 1e-12 * total);
        assert!((project_antidiagonal(&h).total() - total).abs() < 1e-12 * total);
    }

    #[test]
    fn bell_diagonal_shows_five_peaks_with_population_outer_peaks() {
        let s = bell();
        let h = build_histogram(&s, &PhaseSetting::new(0.0, 0.0), CELLS, SUB).unwrap();
        let p = project_diagonal(&h);
        let maxima = p.local_maxima(0.05);
        assert_eq!(maxima.len(), 5, "{maxima:?}");
        for w in maxima.windows(2) {
            assert!((w[1] - w[0] - 10.0).abs() < 1.0);
        }
        let peaks = diagonal_peaks(&p, 10.0);
        let blocks = h.block_sums();
        assert!((peaks[0] - blocks[0][0]).abs() < 2e-3 * peaks[0]);
        assert!((peaks[4] - blocks[2][2]).abs() < 2e-3 * peaks[4]);
        assert!((peaks[0] - peaks[4]).abs() < 1e-6 * peaks[0]);
    }

    #[test]
    fn diagonal_double_counts_the_off_diagonal_corners() {
        let s = el_le();
        let h = build_histogram(&s, &PhaseSetting::new(0.0, 0.0), CELLS, SUB).unwrap();
        let blocks = h.block_sums();
        let total = h.total();
        let diag = diagonal_peaks(&project_diagonal(&h), 10.0);
        let excess = (diag[2] - blocks[1][1]) / total;
        let corners = (blocks[0][2] + blocks[2][0]) / total;
        assert!((excess - corners).abs() < 1e-3, "excess {excess}, corners {corners}");
        assert!(diag[0] < 1e-6 * total && diag[4] < 1e-6 * total, "{diag:?}");

        let anti = project_antidiagonal(&h);
        assert_eq!(anti.local_maxima(0.05).len(), 5);
        let peaks = antidiagonal_peaks(&anti, 10.0);
        assert!(peaks.iter().all(|&m| m > 0.05 * total), "{peaks:?}");
    }

    #[test]
    fn early_early_antidiagonal_is_centered() {
        let s = source([C64::new(1.0, 0.0), ZERO, ZERO, ZERO]);
        let h = build_histogram(&s, &PhaseSetting::new(0.0, 0.0), CELLS, SUB).unwrap();
        let peaks = antidiagonal_peaks(&project_antidiagonal(&h), 10.0);
        assert!(peaks[2] > peaks[1] && peaks[2] > peaks[3]);
        assert!(peaks[0] < 1e-3 * h.total() && peaks[4] < 1e-3 * h.total(), "{peaks:?}");
    }

    #[test]
    fn rejects_empty_grid() {
        let m = ComplexMatrix::ket_bra(4, 0, 0);
        let s = WavepacketState::from_density(m, 2.0, 1.0, TimeBinConfig::new(10.0).unwrap()).unwrap();
        assert!(matches!(build_histogram(&s, &PhaseSetting::new(0.0, 0.0), 0, 1), Err(Error::Window(_))));
    }
}
