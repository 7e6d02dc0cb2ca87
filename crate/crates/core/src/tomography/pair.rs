//! Two-photon time-bin tomography.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{correlate_node, Channel, CorrelationRequest, CorrelationSource, Event};
use crate::error::{Error, Result};
use crate::interferometer::{expand_pair, supported_terms, DelayTerm, PhaseSetting, Window};
use crate::math::{hermitian_eigen, hermitian_function, least_squares, pauli, ComplexMatrix, ZERO};
use crate::tomography::single::EDGE_INSET;

/// Basis labels in matrix order; the biexciton bin comes first.
pub const BASIS: [&str; 4] = ["EE", "EL", "LE", "LL"];

/// Row/column pairs of the ten independent entries (diagonal and upper triangle).
pub const INDEPENDENT: [(usize, usize); 10] =
    [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Window-integrated second-order correlations, `G̅_{ij,kl}` at row `2i+j`, column `2k+l`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbarEntries {
    pub matrix: ComplexMatrix,
}

impl GbarEntries {
    /// Completes the lower triangle by conjugation.
    pub fn from_independent(values: [C64; 10]) -> Self {
        let mut m = ComplexMatrix::zeros(4, 4);
        for (&(r, c), v) in INDEPENDENT.iter().zip(values) {
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
        for i in 0..4 {
            m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        }
        Self { matrix: m }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// Node `k` of `steps` equal intervals on `span`; the closing node sits just
/// inside the window, see `window_node`.
pub(crate) fn rect_node(span: (f64, f64), steps: usize, k: usize) -> f64 {
    let (a, b) = span;
    if k == steps {
        b - EDGE_INSET * (b - a)
    } else {
        a + k as f64 * (b - a) / steps as f64
    }
}

/// Tensor-product trapezoid integral of `m` functions over a rectangle, rows in parallel.
///
/// `f(t1, t2, out)` writes the `m` integrand values at one node.
fn integrate_rect<F>(t1: (f64, f64), t2: (f64, f64), steps: usize, m: usize, f: F) -> Result<Vec<C64>>
where
    F: Fn(f64, f64, &mut [C64]) -> Result<()> + Sync,
{
    if steps == 0 {
        return Err(Error::Dimension("quadrature needs at least one step".into()));
    }
    let h1 = (t1.1 - t1.0) / steps as f64;
    let h2 = (t2.1 - t2.0) / steps as f64;
    let weight = |k: usize| if k == 0 || k == steps { 0.5 } else { 1.0 };
    let rows: Vec<Vec<C64>> = (0..=steps)
        .into_par_iter()
        .map(|a| {
            let x = rect_node(t1, steps, a);
            let mut acc = vec![ZERO; m];
            let mut buf = vec![ZERO; m];
            for b in 0..=steps {
                let y = rect_node(t2, steps, b);
                f(x, y, &mut buf)?;
                let w = weight(b);
                for (s, v) in acc.iter_mut().zip(&buf) {
                    *s += v * w;
                }
            }
            let w = weight(a) * h1 * h2;
            Ok(acc.into_iter().map(|v| v * w).collect())
        })
        .collect::<Result<_>>()?;
    let mut total = vec![ZERO; m];
    for row in rows {
        for (s, v) in total.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(total)
}

/// `⟨a_{B,k}†(t1) a_{X,l}†(t2) a_{X,j}(t2) a_{B,i}(t1)⟩` with late operators shifted by `+T`.
pub fn gbar_request(row: usize, col: usize, t1: f64, t2: f64, t_bin: f64) -> CorrelationRequest {
    let (i, j, k, l) = (row / 2, row % 2, col / 2, col % 2);
    let shift = |bin: usize| bin as f64 * t_bin;
    CorrelationRequest::new(vec![
        Event::left(t1 + shift(i), Channel::B, 0),
        Event::left(t2 + shift(j), Channel::X, 1),
        Event::right(t1 + shift(k), Channel::B, 0),
        Event::right(t2 + shift(l), Channel::X, 1),
    ])
}

/// The ten independent window integrals over `[0, T]²`, `steps_per_bin` intervals per axis.
///
/// Coinciding same-side operators (the `t1 = t2` boundary between the two
/// time orderings) are handled by `correlate_node`, so each ordering branch is
/// integrated with its own one-sided boundary value.
pub fn compute_gbar<S: CorrelationSource + ?Sized>(source: &S, steps_per_bin: usize) -> Result<GbarEntries> {
    let t_bin = source.time_bins().t_bin;
    let sums = integrate_rect((0.0, t_bin), (0.0, t_bin), steps_per_bin, INDEPENDENT.len(), |t1, t2, out| {
        for (slot, &(r, c)) in out.iter_mut().zip(INDEPENDENT.iter()) {
            *slot = correlate_node(source, &gbar_request(r, c, t1, t2, t_bin))?;
        }
        Ok(())
    })?;
    let values: [C64; 10] = sums.try_into().expect("ten entries");
    Ok(GbarEntries::from_independent(values))
}

/// Normalized two-photon density matrix in the EE, EL, LE, LL basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix2Q {
    pub rho: ComplexMatrix,
    /// Frobenius distance moved by the physicality projection, when applied.
    pub projection_distance: Option<f64>,
}

impl DensityMatrix2Q {
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        if rho.rows() != 4 || !rho.is_square() {
            return Err(Error::Dimension("two-photon density matrix must be 4x4".into()));
        }
        Ok(Self { rho, projection_distance: None })
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.rho[(row, col)]
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*hermitian_eigen(&self.rho)?.0.last().expect("4x4 has eigenvalues"))
    }

    /// Relative phase of the EE/LL coherence, `arg ρ_{LL,EE}`.
    pub fn coherence_phase(&self) -> f64 {
        self.rho[(3, 0)].arg()
    }
}

/// Eigenvalue clipping followed by renormalization; returns the projected state and the distance moved.
pub fn project_physical(rho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let clipped = hermitian_function(&rho.hermitian_part(), |l| l.max(0.0))?;
    let tr = clipped.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NoSignal("no positive spectral weight left after clipping".into()));
    }
    let projected = clipped.scale_real(1.0 / tr);
    let distance = (&projected - rho).norm_frobenius();
    Ok((projected, distance))
}

/// `ρ = G̅ / Tr G̅` after Hermitization; with `project`, states with an eigenvalue
/// below `−1e−6` are moved to the nearest physical state and the distance is recorded.
pub fn reconstruct_pair(gbar: &GbarEntries, project: bool) -> Result<DensityMatrix2Q> {
    let h = gbar.matrix.hermitian_part();
    let tr = h.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NoSignal(format!("G̅ trace is {tr}")));
    }
    let mut out = DensityMatrix2Q::new(h.scale_real(1.0 / tr))?;
    if project && out.min_eigenvalue()? < -1e-6 {
        let (p, d) = project_physical(&out.rho)?;
        out.rho = p;
        out.projection_distance = Some(d);
    }
    Ok(out)
}

/// `S_{jk} = Tr[(σ_j ⊗ σ_k) ρ]`.
pub fn stokes_pair(rho: &ComplexMatrix) -> [[f64; 4]; 4] {
    std::array::from_fn(|j| std::array::from_fn(|k| (&pauli(j).kron(&pauli(k)) * rho).trace().re))
}

/// `ρ = ¼ Σ S_{jk} σ_j ⊗ σ_k`.
pub fn rho_from_stokes(s: &[[f64; 4]; 4]) -> ComplexMatrix {
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (j, row) in s.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            rho = &rho + &pauli(j).kron(&pauli(k)).scale_real(0.25 * v);
        }
    }
    rho
}

/// `⟨|EΦ⟩⟨EΦ|⟩ = ½(ρ_{EE,EE} + ρ_{EL,EL} + 2 Re(e^{iφ_X} ρ_{EE,EL}))`.
pub fn side_peak(rho: &ComplexMatrix, phi_x: f64) -> f64 {
    0.5 * (rho[(0, 0)].re + rho[(1, 1)].re + 2.0 * (C64::from_polar(1.0, phi_x) * rho[(0, 1)]).re)
}

/// Full center-peak expansion `Σ ρ_{ij,kl} e^{iφ_B(e_i − e_k)} e^{iφ_X(e_j − e_l)}`,
/// with `e = 1` for an early index and 0 for a late one.
pub fn center_peak(rho: &ComplexMatrix, phi_b: f64, phi_x: f64) -> f64 {
    let early = |bin: usize| if bin == 0 { 1.0 } else { 0.0 };
    let mut sum = ZERO;
    for r in 0..4 {
        for c in 0..4 {
            let angle = phi_b * (early(r / 2) - early(c / 2)) + phi_x * (early(r % 2) - early(c % 2));
            sum += rho[(r, c)] * C64::from_polar(1.0, angle);
        }
    }
    sum.re
}

/// Reduced center-peak form `2cos²((φ_B + φ_X − φ)/2)|ρ_{EE,LL}| + ρ_{EL,EL} + ρ_{LE,LE}`,
/// with `φ = arg ρ_{LL,EE}`.
pub fn center_peak_reduced(rho: &ComplexMatrix, phi_b: f64, phi_x: f64) -> f64 {
    let phi = rho[(3, 0)].arg();
    let c = ((phi_b + phi_x - phi) / 2.0).cos();
    2.0 * c * c * rho[(0, 3)].norm() + rho[(1, 1)].re + rho[(2, 2)].re
}

/// Two-qubit spin flip `(σ_y ⊗ σ_y) ρ* (σ_y ⊗ σ_y)`.
pub fn spin_flip(rho: &ComplexMatrix) -> ComplexMatrix {
    let yy = pauli(2).kron(&pauli(2));
    &(&yy * &rho.conj()) * &yy
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`, with `λ²` the eigenvalues of `ρρ̃`.
///
/// The spectrum is taken from the Hermitian similar matrix `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &ComplexMatrix) -> Result<f64> {
    let s = hermitian_function(&rho.hermitian_part(), |l| l.max(0.0).sqrt())?;
    let m = &(&s * &spin_flip(rho)) * &s;
    let (eigs, _) = hermitian_eigen(&m.hermitian_part())?;
    let l: Vec<f64> = eigs.iter().map(|e| e.max(0.0).sqrt()).collect();
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

/// `max(0, 2|ρ_{EE,LL}| − ρ_{EL,EL} − ρ_{LE,LE})`.
pub fn concurrence_approx(rho: &ComplexMatrix) -> f64 {
    (2.0 * rho[(0, 3)].norm() - rho[(1, 1)].re - rho[(2, 2)].re).clamp(0.0, 1.0)
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let s = hermitian_function(&rho.hermitian_part(), |l| l.max(0.0).sqrt())?;
    let m = (&(&s * sigma) * &s).hermitian_part();
    let (eigs, _) = hermitian_eigen(&m)?;
    let root: f64 = eigs.iter().map(|e| e.max(0.0).sqrt()).sum();
    Ok(root * root)
}

/// Phase-independent integrals of every supported pair term over every cell.
///
/// `cells[b][x]` lists `(term index, integral)` for the cell with the B time in
/// window `b` and the X time in window `x`; term indices refer to `expand_pair`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTermIntegrals {
    pub cells: [[Vec<(usize, C64)>; 3]; 3],
}

impl PairTermIntegrals {
    /// Cell counts for a term table produced by `expand_pair` (or a variant in the same order).
    pub fn peaks_with(&self, terms: &[DelayTerm]) -> [[f64; 3]; 3] {
        std::array::from_fn(|b| {
            std::array::from_fn(|x| self.cells[b][x].iter().map(|(i, v)| terms[*i].phase_factor * v).sum::<C64>().re)
        })
    }

    pub fn peaks(&self, setting: &PhaseSetting) -> [[f64; 3]; 3] {
        self.peaks_with(&expand_pair(setting))
    }

    /// Complex cell sums before taking the real part; imaginary parts vanish for a closed term set.
    pub fn peaks_complex(&self, terms: &[DelayTerm]) -> [[C64; 3]; 3] {
        std::array::from_fn(|b| {
            std::array::from_fn(|x| self.cells[b][x].iter().map(|(i, v)| terms[*i].phase_factor * v).sum::<C64>())
        })
    }

    /// Sum of the four corner cells, the normalization that maps corners onto populations.
    pub fn corner_total(&self) -> f64 {
        let p = self.peaks(&PhaseSetting::new(0.0, 0.0));
        p[0][0] + p[0][2] + p[2][0] + p[2][2]
    }
}

/// Integrates every supported pair term over its cells with `steps_per_bin` intervals per axis.
pub fn integrate_pair_terms<S: CorrelationSource + ?Sized>(
    source: &S,
    steps_per_bin: usize,
) -> Result<PairTermIntegrals> {
    let t_bin = source.time_bins().t_bin;
    let terms = expand_pair(&PhaseSetting::new(0.0, 0.0));
    let mut cells: [[Vec<(usize, C64)>; 3]; 3] = Default::default();
    for (b, row) in cells.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let idx = supported_terms(&terms, Window::Pair(b, x))?;
            let span = |k: usize| (k as f64 * t_bin, (k + 1) as f64 * t_bin);
            let sums = integrate_rect(span(b), span(x), steps_per_bin, idx.len(), |t1, t2, out| {
                for (slot, &i) in out.iter_mut().zip(&idx) {
                    *slot = correlate_node(source, &terms[i].request(t1, t2, t_bin))?;
                }
                Ok(())
            })?;
            *cell = idx.into_iter().zip(sums).collect();
        }
    }
    Ok(PairTermIntegrals { cells })
}

/// 3×3 coincidence peaks at one phase setting.
pub fn pair_peak_table<S: CorrelationSource + ?Sized>(
    source: &S,
    setting: &PhaseSetting,
    steps_per_bin: usize,
) -> Result<[[f64; 3]; 3]> {
    Ok(integrate_pair_terms(source, steps_per_bin)?.peaks(setting))
}

/// One point of a center-peak phase scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub phi_b: f64,
    pub phi_x: f64,
    pub counts: f64,
}

/// Center-cell counts over the grid `phases_b × phases_x`, divided by `norm`.
pub fn center_scan(integrals: &PairTermIntegrals, phases_b: &[f64], phases_x: &[f64], norm: f64) -> Vec<ScanPoint> {
    let mut out = Vec::with_capacity(phases_b.len() * phases_x.len());
    for &phi_b in phases_b {
        for &phi_x in phases_x {
            let counts = integrals.peaks(&PhaseSetting::new(phi_b, phi_x))[1][1] / norm;
            out.push(ScanPoint { phi_b, phi_x, counts });
        }
    }
    out
}

/// Least-squares fit of a center scan on the harmonics of `φ_B`, `φ_X`, `φ_B + φ_X` and `φ_B − φ_X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterFit {
    pub offset: f64,
    /// `(cos, sin)` coefficients of `φ_B`, `φ_X`, `φ_B + φ_X`, `φ_B − φ_X`.
    pub harmonics: [[f64; 2]; 4],
    pub rms_residual: f64,
}

impl CenterFit {
    /// Fringe visibility along `φ_B + φ_X`.
    pub fn sum_visibility(&self) -> f64 {
        self.harmonics[2][0].hypot(self.harmonics[2][1]) / self.offset
    }

    pub fn sum_phase(&self) -> f64 {
        self.harmonics[2][1].atan2(self.harmonics[2][0])
    }
}

pub fn fit_center_scan(scan: &[ScanPoint]) -> Result<CenterFit> {
    let row = |p: &ScanPoint| {
        let (b, x) = (p.phi_b, p.phi_x);
        vec![1.0, b.cos(), b.sin(), x.cos(), x.sin(), (b + x).cos(), (b + x).sin(), (b - x).cos(), (b - x).sin()]
    };
    let design: Vec<Vec<f64>> = scan.iter().map(row).collect();
    let y: Vec<f64> = scan.iter().map(|p| p.counts).collect();
    let c = least_squares(&design, &y)?;
    let ss: f64 = design
        .iter()
        .zip(&y)
        .map(|(r, v)| {
            let fit: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            (fit - v).powi(2)
        })
        .sum();
    if !(c[0] > 0.0) {
        return Err(Error::NoCounts(format!("center scan offset {} is not positive", c[0])));
    }
    Ok(CenterFit {
        offset: c[0],
        harmonics: [[c[1], c[2]], [c[3], c[4]], [c[5], c[6]], [c[7], c[8]]],
        rms_residual: (ss / scan.len() as f64).sqrt(),
    })
}
