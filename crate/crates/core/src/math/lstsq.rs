use crate::error::{Error, Result};

/// Linear least squares `min ‖X c − y‖` through the normal equations.
///
/// Only used for the handful of harmonic basis functions in fringe fits,
/// where the design is well conditioned.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    if design.len() != y.len() || design.is_empty() {
        return Err(Error::Dimension(format!("{} design rows for {} observations", design.len(), y.len())));
    }
    let p = design[0].len();
    if design.iter().any(|row| row.len() != p) {
        return Err(Error::Dimension("ragged design matrix".into()));
    }
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    // Gaussian elimination with partial pivoting on the augmented system
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::NoCounts(format!("singular fit design (column {col})")));
        }
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Ok((0..p).map(|i| a[i][p] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_model() {
        let xs: Vec<f64> = (0..9).map(|k| k as f64 * 0.7).collect();
        let design: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x.cos(), x.sin()]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 + 0.5 * x.cos() - 0.25 * x.sin()).collect();
        let c = least_squares(&design, &y).unwrap();
        for (got, want) in c.iter().zip([2.0, 0.5, -0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_design_is_reported() {
        let design = vec![vec![1.0, 1.0]; 4];
        assert!(least_squares(&design, &[1.0; 4]).is_err());
    }
}
