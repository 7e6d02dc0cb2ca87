use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::math::{matrix_exp, ComplexMatrix};
use crate::source::emitter::{build_liouvillian, free_liouvillian, EmitterModel};

const EXP_TOL: f64 = 1e-15;
/// Relative distance (in steps) below which a time snaps onto the grid.
const SNAP: f64 = 1e-7;

enum Segment {
    /// Steps governed by the drive-free generator.
    Free { start: usize, end: usize },
    Driven {
        start: usize,
        end: usize,
        generators: Vec<ComplexMatrix>,
        steps: Vec<ComplexMatrix>,
        /// `prefix[m]` maps grid point `start` to `start + m`.
        prefix: Vec<ComplexMatrix>,
        /// `suffix[m]` maps grid point `start + m` to `end`.
        suffix: Vec<ComplexMatrix>,
    },
}

impl Segment {
    fn bounds(&self) -> (usize, usize) {
        match *self {
            Segment::Free { start, end } | Segment::Driven { start, end, .. } => (start, end),
        }
    }
}

/// Evolution under the master equation with the Liouvillian held constant on
/// each step of a uniform grid (evaluated at the step midpoint).
///
/// Drive-free stretches are collapsed into single exponentials of the constant
/// generator, and driven stretches keep cumulative products, so propagating
/// between two grid points costs a handful of matrix-vector products.
pub struct Propagator {
    dim: usize,
    t0: f64,
    dt: f64,
    n_steps: usize,
    free_generator: ComplexMatrix,
    free_powers: Vec<ComplexMatrix>,
    segments: Vec<Segment>,
    /// Segment index for each step.
    step_segment: Vec<usize>,
}

impl Propagator {
    /// Grid `t0, t0 + dt, …` covering at least `[t0, t_end]`.
    pub fn new(model: &EmitterModel, t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Dimension(format!("propagation step must be positive, got {dt}")));
        }
        if !(t_end >= t0) {
            return Err(Error::Ordering(format!("propagation window [{t0}, {t_end}] is reversed")));
        }
        let n_steps = (((t_end - t0) / dt) - SNAP).ceil().max(0.0) as usize;
        let dim = model.dim();

        let free_generator = free_liouvillian(model);

        let mut segments: Vec<Segment> = Vec::new();
        let mut step_segment = Vec::with_capacity(n_steps);
        let mut k = 0;
        while k < n_steps {
            let driven = |k: usize| model.is_driven(t0 + (k as f64 + 0.5) * dt);
            let start = k;
            let is_driven = driven(k);
            while k < n_steps && driven(k) == is_driven {
                k += 1;
            }
            let end = k;
            let idx = segments.len();
            step_segment.extend(std::iter::repeat_n(idx, end - start));
            if is_driven {
                let generators: Vec<ComplexMatrix> =
                    (start..end).map(|j| build_liouvillian(model, t0 + (j as f64 + 0.5) * dt)).collect();
                let steps =
                    generators.iter().map(|g| matrix_exp(&g.scale_real(dt), EXP_TOL)).collect::<Result<Vec<_>>>()?;
                let d2 = dim * dim;
                let mut prefix = vec![ComplexMatrix::identity(d2)];
                for s in &steps {
                    let next = s * prefix.last().unwrap();
                    prefix.push(next);
                }
                let mut suffix = vec![ComplexMatrix::identity(d2)];
                for s in steps.iter().rev() {
                    let next = suffix.last().unwrap() * s;
                    suffix.push(next);
                }
                suffix.reverse();
                segments.push(Segment::Driven { start, end, generators, steps, prefix, suffix });
            } else {
                segments.push(Segment::Free { start, end });
            }
        }

        let longest_free = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Free { start, end } => Some(end - start),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let one_step = matrix_exp(&free_generator.scale_real(dt), EXP_TOL)?;
        let mut free_powers = vec![ComplexMatrix::identity(dim * dim)];
        for m in 1..=longest_free.max(1) {
            // direct exponentials every 64 steps keep round-off from accumulating
            let next = if m % 64 == 0 {
                matrix_exp(&free_generator.scale_real(dt * m as f64), EXP_TOL)?
            } else {
                &one_step * &free_powers[m - 1]
            };
            free_powers.push(next);
        }

        Ok(Self { dim, t0, dt, n_steps, free_generator, free_powers, segments, step_segment })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.n_steps as f64 * self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn grid_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Grid index if `t` lies on the grid (within a relative tolerance).
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let r = x.round();
        ((x - r).abs() < SNAP && r >= 0.0 && r as usize <= self.n_steps).then_some(r as usize)
    }

    /// Grid index at or below `t` and the remaining offset.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if let Some(k) = self.grid_index(t) {
            return Ok((k, 0.0));
        }
        let x = (t - self.t0) / self.dt;
        if x < 0.0 || x > self.n_steps as f64 {
            return Err(Error::Ordering(format!(
                "time {t} outside the propagation window [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        let k = x.floor() as usize;
        Ok((k, t - self.grid_time(k)))
    }

    fn step_generator(&self, k: usize) -> &ComplexMatrix {
        match &self.segments[self.step_segment[k]] {
            Segment::Free { .. } => &self.free_generator,
            Segment::Driven { start, generators, .. } => &generators[k - start],
        }
    }

    fn partial(&self, k: usize, duration: f64, v: &[C64]) -> Result<Vec<C64>> {
        if duration == 0.0 {
            return Ok(v.to_vec());
        }
        let e = matrix_exp(&self.step_generator(k).scale_real(duration), EXP_TOL)?;
        Ok(e.mul_vec(v))
    }

    /// One grid step, `k → k + 1`.
    pub fn step(&self, k: usize, v: &[C64]) -> Vec<C64> {
        match &self.segments[self.step_segment[k]] {
            Segment::Free { .. } => self.free_powers[1].mul_vec(v),
            Segment::Driven { start, steps, .. } => steps[k - start].mul_vec(v),
        }
    }

    /// Grid point `ka` to grid point `kb` (`ka <= kb`).
    pub fn between_grid(&self, ka: usize, kb: usize, v: &[C64]) -> Vec<C64> {
        debug_assert!(ka <= kb && kb <= self.n_steps);
        let mut v = v.to_vec();
        if ka == kb {
            return v;
        }
        let mut seg = self.step_segment[ka];
        let mut k = ka;
        while k < kb {
            let segment = &self.segments[seg];
            let (s, e) = segment.bounds();
            let to = e.min(kb);
            v = match segment {
                Segment::Free { .. } => self.free_powers[to - k].mul_vec(&v),
                Segment::Driven { steps, prefix, suffix, .. } => {
                    if k == s {
                        prefix[to - s].mul_vec(&v)
                    } else if to == e {
                        suffix[k - s].mul_vec(&v)
                    } else {
                        let mut w = v;
                        for j in k..to {
                            w = steps[j - s].mul_vec(&w);
                        }
                        w
                    }
                }
            };
            k = to;
            seg += 1;
        }
        v
    }

    /// Propagates a column-stacked matrix from `ta` to `tb`.
    pub fn propagate_vec(&self, v: &[C64], ta: f64, tb: f64) -> Result<Vec<C64>> {
        if tb < ta {
            if ta - tb <= SNAP * self.dt {
                return Ok(v.to_vec());
            }
            return Err(Error::Ordering(format!("cannot propagate backwards from {ta} to {tb}")));
        }
        let (ka, fa) = self.locate(ta)?;
        let (kb, fb) = self.locate(tb)?;
        if ka == kb {
            return self.partial(ka, fb - fa, v);
        }
        let (mut v, ka) = if fa > 0.0 { (self.partial(ka, self.dt - fa, v)?, ka + 1) } else { (v.to_vec(), ka) };
        v = self.between_grid(ka, kb, &v);
        if fb > 0.0 {
            v = self.partial(kb, fb, &v)?;
        }
        Ok(v)
    }

    pub fn propagate(&self, state: &ComplexMatrix, ta: f64, tb: f64) -> Result<ComplexMatrix> {
        if state.rows() != self.dim || !state.is_square() {
            return Err(Error::Dimension(format!(
                "state is {}x{}, model dimension {}",
                state.rows(),
                state.cols(),
                self.dim
            )));
        }
        let v = self.propagate_vec(&state.vectorize(), ta, tb)?;
        Ok(ComplexMatrix::unvectorize(&v, self.dim, self.dim))
    }
}

/// Evolves `state` from `t0` to `t1` with `grid_density` piecewise-constant
/// steps per unit time, grid anchored at `t0`.
pub fn propagate(
    state: &ComplexMatrix,
    model: &EmitterModel,
    t0: f64,
    t1: f64,
    grid_density: usize,
) -> Result<ComplexMatrix> {
    if t1 < t0 {
        return Err(Error::Ordering(format!("propagate needs t1 >= t0, got {t0} -> {t1}")));
    }
    if grid_density == 0 {
        return Err(Error::Dimension("grid density must be positive".into()));
    }
    if t1 == t0 {
        return Ok(state.clone());
    }
    let p = Propagator::new(model, t0, t1, 1.0 / grid_density as f64)?;
    p.propagate(state, t0, t1)
}
