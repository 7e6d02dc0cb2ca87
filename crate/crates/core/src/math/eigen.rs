use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::math::matrix::{ComplexMatrix, ZERO};

const MAX_GENERAL_DIM: usize = 4;
const ITERATIONS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of a small square matrix.
///
/// Reduces to upper Hessenberg form with Householder reflections, then runs
/// single-shift complex QR with Wilkinson shifts and deflation. `tol` is the
/// relative size below which a subdiagonal entry counts as zero.
pub fn eig_values(a: &ComplexMatrix, tol: f64) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("eig_values needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n > MAX_GENERAL_DIM {
        return Err(Error::Dimension(format!("eig_values supports dimension <= {MAX_GENERAL_DIM}, got {n}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let tol = tol.max(f64::EPSILON);
    let mut h = hessenberg(a);
    let budget = ITERATIONS_PER_EIGENVALUE * n;
    let mut values = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iterations = 0usize;
    let mut since_deflation = 0usize;

    while hi > 0 {
        // locate the start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if h[(lo, lo - 1)].norm() <= tol * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values.push(h[(hi, hi)]);
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        iterations += 1;
        since_deflation += 1;
        if iterations > budget {
            let residual = (1..=hi).map(|k| h[(k, k - 1)].norm()).fold(0.0, f64::max);
            return Err(Error::NoConvergence { iterations, residual });
        }

        let shift = if since_deflation.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(&mut h, lo, hi, shift);
    }
    values.push(h[(0, 0)]);
    values.reverse();
    Ok(values)
}

fn hessenberg(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // H <- (I - 2vv†) H
        for j in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(r, vr)| vr.conj() * h[(k + 1 + r, j)]).sum();
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= vr * dot * 2.0;
            }
        }
        // H <- H (I - 2vv†)
        for i in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(r, vr)| h[(i, k + 1 + r)] * vr).sum();
            for (r, vr) in v.iter().enumerate() {
                h[(i, k + 1 + r)] -= dot * vr.conj() * 2.0;
            }
        }
    }
    h
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: C64) {
    for k in lo..=hi {
        h[(k, k)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (a, b) = (h[(k, k)], h[(k + 1, k)]);
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (C64::new(1.0, 0.0), ZERO) } else { (a / r, b / r) };
        for j in k..=hi {
            let (x, y) = (h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = c.conj() * x + s.conj() * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rotations.push((c, s));
    }
    for (offset, (c, s)) in rotations.into_iter().enumerate() {
        let k = lo + offset;
        for i in lo..=(k + 1).min(hi) {
            let (x, y) = (h[(i, k)], h[(i, k + 1)]);
            h[(i, k)] = x * c + y * s;
            h[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for k in lo..=hi {
        h[(k, k)] += shift;
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in descending order with the matching orthonormal
/// eigenvectors as the columns of the returned matrix.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("hermitian_eigen needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.norm_frobenius().max(f64::MIN_POSITIVE);
    let max_sweeps = 100;
    let mut converged = false;

    for _ in 0..max_sweeps {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| m[(p, q)].norm_sqr()).sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns p, q of U = diag(1, e^{-iθ}) · [[c, s], [-s, c]]
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;
                // M <- M U (columns)
                for i in 0..n {
                    let (x, y) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = x * upp + y * uqp;
                    m[(i, q)] = x * upq + y * uqq;
                }
                // M <- U† M (rows)
                for j in 0..n {
                    let (x, y) = (m[(p, j)], m[(q, j)]);
                    m[(p, j)] = upp.conj() * x + uqp.conj() * y;
                    m[(q, j)] = upq.conj() * x + uqq.conj() * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = x * upp + y * uqp;
                    v[(i, q)] = x * upq + y * uqq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| m[(p, q)].norm_sqr()).sum();
        return Err(Error::NoConvergence { iterations: max_sweeps, residual: off.sqrt() });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = v[(i, src)];
        }
    }
    Ok((values, vectors))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(a)?;
    let n = a.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let fl = f(lambda);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += vectors[(i, k)] * vectors[(j, k)].conj() * fl;
            }
        }
    }
    Ok(out)
}
