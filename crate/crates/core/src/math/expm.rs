use crate::error::{Error, Result};
use crate::math::matrix::ComplexMatrix;

const MAX_DIM: usize = 16;
const MAX_TERMS: usize = 60;

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
///
/// The input is scaled by 2⁻ˢ until its 1-norm is at most ½, the series is summed
/// until the next term is below `tol` relative to the partial sum, and the result
/// is squared `s` times. A zero matrix returns the identity exactly.
pub fn matrix_exp(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("matrix_exp needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n > MAX_DIM {
        return Err(Error::Dimension(format!("matrix_exp supports dimension <= {MAX_DIM}, got {n}")));
    }
    if !a.is_finite() {
        return Err(Error::Dimension("matrix_exp input has non-finite entries".into()));
    }
    let tol = tol.max(f64::EPSILON);

    let norm = a.norm_one();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale_real(0.5f64.powi(squarings as i32));

    let mut sum = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum = &sum + &term;
        if term.norm_one() <= tol * sum.norm_one() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::matrix::{I, ONE, ZERO};
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Plain power series, independent of the scaling path.
    fn taylor_oracle(a: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let n = a.rows();
        let mut sum = ComplexMatrix::identity(n);
        let mut term = ComplexMatrix::identity(n);
        for k in 1..terms {
            term = (&term * a).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> ComplexMatrix {
        let data = (0..n * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let m = ComplexMatrix::from_vec(n, n, data).unwrap();
        let s = norm / m.norm_one();
        m.scale_real(s)
    }

    #[test]
    fn zero_gives_identity_exactly() {
        let e = matrix_exp(&ComplexMatrix::zeros(2, 2), 1e-14).unwrap();
        assert_eq!(e, ComplexMatrix::identity(2));
    }

    #[test]
    fn diagonal_exponential() {
        let a = ComplexMatrix::diag(&[I * PI, ZERO]);
        let e = matrix_exp(&a, 1e-15).unwrap();
        let expected = ComplexMatrix::diag(&[-ONE, ONE]);
        assert!(e.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn matches_thirty_term_taylor_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 1.0);
            let e = matrix_exp(&a, 1e-15).unwrap();
            let oracle = taylor_oracle(&a, 30);
            assert!(e.max_abs_diff(&oracle) < 1e-12, "deviation {}", e.max_abs_diff(&oracle));
        }
    }

    #[test]
    fn commuting_sum_factorises() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d1: Vec<C64> = (0..4).map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect();
            let d2: Vec<C64> = (0..4).map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect();
            let (a, b) = (ComplexMatrix::diag(&d1), ComplexMatrix::diag(&d2));
            let lhs = matrix_exp(&(&a + &b), 1e-15).unwrap();
            let rhs = &matrix_exp(&a, 1e-15).unwrap() * &matrix_exp(&b, 1e-15).unwrap();
            let scale = lhs.max_abs().max(1.0);
            assert!(lhs.max_abs_diff(&rhs) / scale < 1e-10);
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(matrix_exp(&ComplexMatrix::zeros(2, 3), 1e-12), Err(Error::Dimension(_))));
    }

    #[test]
    fn large_norm_generator_is_accurate() {
        // exp of a rotation generator with large angle stays unitary
        let theta = 37.3;
        let a = ComplexMatrix::from_real_rows(&[&[0.0, -theta], &[theta, 0.0]]);
        let e = matrix_exp(&a, 1e-15).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]]);
        assert!(e.max_abs_diff(&expected) < 1e-11);
    }
}
