use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of `[t_start, t_end]` with `n_steps` points (both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::Dimension(format!("time grid needs t_end > t_start, got [{t_start}, {t_end}]")));
        }
        if n_steps < 2 {
            return Err(Error::Dimension(format!("time grid needs at least 2 points, got {n_steps}")));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_steps - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(|k| self.point(k))
    }

    /// Trapezoid weights, spacing included.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_steps).map(|k| if k == 0 || k + 1 == self.n_steps { 0.5 * h } else { h }).collect()
    }
}

/// Composite trapezoidal rule over the grid.
pub fn integrate(values: &[C64], grid: &TimeGrid) -> Result<C64> {
    if values.len() != grid.n_steps() {
        return Err(Error::Dimension(format!(
            "{} samples supplied for a grid of {} points",
            values.len(),
            grid.n_steps()
        )));
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

pub fn integrate_real(values: &[f64], grid: &TimeGrid) -> Result<f64> {
    if values.len() != grid.n_steps() {
        return Err(Error::Dimension(format!(
            "{} samples supplied for a grid of {} points",
            values.len(),
            grid.n_steps()
        )));
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(v: impl Iterator<Item = f64>) -> Vec<C64> {
        v.map(|x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn constant_and_linear_are_exact() {
        let g = TimeGrid::new(0.0, 7.5, 13).unwrap();
        let ones = real(g.points().map(|_| 1.0));
        assert!((integrate(&ones, &g).unwrap().re - 7.5).abs() < 1e-13);

        for n in [2, 3, 10, 101] {
            let g = TimeGrid::new(0.0, 1.0, n).unwrap();
            let lin = real(g.points());
            assert!((integrate(&lin, &g).unwrap().re - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn decaying_exponential() {
        let g = TimeGrid::new(0.0, 5.0, 1001).unwrap();
        let f = real(g.points().map(|t| (-t).exp()));
        let exact = 1.0 - (-5.0f64).exp();
        assert!((integrate(&f, &g).unwrap().re - exact).abs() < 1e-5);
    }

    #[test]
    fn second_order_convergence() {
        let err = |n| {
            let g = TimeGrid::new(0.0, 2.0, n).unwrap();
            let f = real(g.points().map(|t| t.sin()));
            (integrate(&f, &g).unwrap().re - (1.0 - 2.0f64.cos())).abs()
        };
        let ratio = err(51) / err(101);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(matches!(integrate(&[C64::new(1.0, 0.0)], &g), Err(Error::Dimension(_))));
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            f in prop::collection::vec(-10.0..10.0f64, 17),
            g in prop::collection::vec(-10.0..10.0f64, 17),
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
        ) {
            let grid = TimeGrid::new(-1.0, 2.0, 17).unwrap();
            let fv = real(f.iter().copied());
            let gv = real(g.iter().copied());
            let combo: Vec<C64> = fv.iter().zip(&gv).map(|(x, y)| x * a + y * b).collect();
            let lhs = integrate(&combo, &grid).unwrap();
            let rhs = integrate(&fv, &grid).unwrap() * a + integrate(&gv, &grid).unwrap() * b;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
