//! Multi-time correlation functions by the quantum regression recipe.

use std::cmp::Ordering;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ComplexMatrix, TimeGrid, ZERO};
use crate::source::{sigma_b, sigma_x, EmitterModel, Propagator, TimeBinConfig};

/// Photon channel of the cascade: the upper (biexciton) or lower (exciton) transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    B,
    X,
}

impl Channel {
    /// Lowering operator standing in for the photon annihilator.
    pub fn operator(self) -> ComplexMatrix {
        match self {
            Channel::B => sigma_b(),
            Channel::X => sigma_x(),
        }
    }
}

/// Side of the evolving matrix an operator multiplies.
///
/// `Left` holds the annihilation-side string, applied as `O·M`. `Right` holds
/// the creation-side string, applied as `M·O†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOp {
    Channel(Channel),
    Matrix(ComplexMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub op: EventOp,
    pub side: Side,
    /// Position in the written operator string; smaller sits closer to ρ.
    pub string_index: usize,
}

impl Event {
    pub fn left(time: f64, channel: Channel, string_index: usize) -> Self {
        Self { time, op: EventOp::Channel(channel), side: Side::Left, string_index }
    }

    pub fn right(time: f64, channel: Channel, string_index: usize) -> Self {
        Self { time, op: EventOp::Channel(channel), side: Side::Right, string_index }
    }

    pub fn matrix(time: f64, op: ComplexMatrix, side: Side, string_index: usize) -> Self {
        Self { time, op: EventOp::Matrix(op), side, string_index }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.side.cmp(&other.side))
            .then(self.string_index.cmp(&other.string_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRequest {
    pub events: Vec<Event>,
    pub initial_time: f64,
}

impl CorrelationRequest {
    pub fn new(events: Vec<Event>) -> Self {
        Self { events, initial_time: 0.0 }
    }

    /// `⟨a†(s) a(u)⟩` on one channel.
    pub fn two_time(channel: Channel, s: f64, u: f64) -> Self {
        Self::new(vec![Event::left(u, channel, 0), Event::right(s, channel, 0)])
    }

    /// Request whose value is the complex conjugate of this one.
    pub fn adjoint(&self) -> Self {
        let events = self
            .events
            .iter()
            .map(|e| Event {
                side: match e.side {
                    Side::Left => Side::Right,
                    Side::Right => Side::Left,
                },
                ..e.clone()
            })
            .collect();
        Self { events, initial_time: self.initial_time }
    }

    pub fn earliest(&self) -> f64 {
        self.events.iter().map(|e| e.time).fold(f64::INFINITY, f64::min)
    }

    pub fn latest(&self) -> f64 {
        self.events.iter().map(|e| e.time).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Events in application order.
    pub fn sorted(&self) -> Vec<&Event> {
        let mut events: Vec<&Event> = self.events.iter().collect();
        events.sort_by(|a, b| a.order(b));
        events
    }
}

/// Anything that can answer correlation requests over the observed bins.
pub trait CorrelationSource: Sync {
    fn correlate(&self, request: &CorrelationRequest) -> Result<C64>;

    fn time_bins(&self) -> TimeBinConfig;

    /// Same as `correlate`, except that any event at negative time yields exactly zero.
    fn correlate_supported(&self, request: &CorrelationRequest) -> Result<C64> {
        if request.events.iter().any(|e| e.time < 0.0) {
            return Ok(ZERO);
        }
        self.correlate(request)
    }
}

/// Relative tolerance for treating two event times as equal.
const COINCIDENCE: f64 = 1e-12;

fn has_same_side_coincidence(request: &CorrelationRequest) -> bool {
    let events = &request.events;
    events.iter().enumerate().any(|(a, ea)| {
        events[a + 1..].iter().any(|eb| {
            ea.side == eb.side && (ea.time - eb.time).abs() <= COINCIDENCE * ea.time.abs().max(eb.time.abs()).max(1.0)
        })
    })
}

/// Value of a request used as a quadrature node.
///
/// Where two operators on the same side share a time, the time-ordered
/// correlator jumps; the node then takes the mean of the two one-sided limits,
/// i.e. of both operator orders at the common time.
pub fn correlate_node<S: CorrelationSource + ?Sized>(source: &S, request: &CorrelationRequest) -> Result<C64> {
    if !has_same_side_coincidence(request) {
        return source.correlate_supported(request);
    }
    let max_index = request.events.iter().map(|e| e.string_index).max().unwrap_or(0);
    let reversed = CorrelationRequest {
        events: request
            .events
            .iter()
            .map(|e| Event { string_index: max_index - e.string_index, ..e.clone() })
            .collect(),
        initial_time: request.initial_time,
    };
    Ok(0.5 * (source.correlate_supported(request)? + source.correlate_supported(&reversed)?))
}

/// Regression engine for a Lindblad model, with ρ(t) cached on the propagation grid.
pub struct CorrelationEngine {
    model: EmitterModel,
    bins: TimeBinConfig,
    propagator: Propagator,
    states: Vec<Vec<C64>>,
    channel_ops: [ComplexMatrix; 2],
}

impl CorrelationEngine {
    /// Engine covering the observed bins with `steps_per_bin` grid steps per bin.
    pub fn new(model: EmitterModel, bins: TimeBinConfig, steps_per_bin: usize) -> Result<Self> {
        if steps_per_bin == 0 {
            return Err(Error::Dimension("steps per bin must be positive".into()));
        }
        let dt = bins.t_bin / steps_per_bin as f64;
        Self::with_horizon(model, bins, bins.horizon(), dt)
    }

    pub fn with_horizon(model: EmitterModel, bins: TimeBinConfig, horizon: f64, dt: f64) -> Result<Self> {
        let t0 = model.initial_time();
        let propagator = Propagator::new(&model, t0, horizon.max(t0), dt)?;
        let mut states = Vec::with_capacity(propagator.n_steps() + 1);
        states.push(model.initial_state().vectorize());
        for k in 0..propagator.n_steps() {
            let next = propagator.step(k, &states[k]);
            states.push(next);
        }
        let channel_ops = [Channel::B.operator(), Channel::X.operator()];
        Ok(Self { model, bins, propagator, states, channel_ops })
    }

    pub fn model(&self) -> &EmitterModel {
        &self.model
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// ρ(t) from the grid cache.
    pub fn state_at(&self, t: f64) -> Result<ComplexMatrix> {
        let d = self.model.dim();
        Ok(ComplexMatrix::unvectorize(&self.state_vec(t)?, d, d))
    }

    fn state_vec(&self, t: f64) -> Result<Vec<C64>> {
        let (k, offset) = self.propagator.locate(t)?;
        if offset == 0.0 {
            return Ok(self.states[k].clone());
        }
        self.propagator.propagate_vec(&self.states[k], self.propagator.grid_time(k), t)
    }

    fn operator<'a>(&'a self, op: &'a EventOp) -> Result<&'a ComplexMatrix> {
        let m = match op {
            EventOp::Channel(Channel::B) => &self.channel_ops[0],
            EventOp::Channel(Channel::X) => &self.channel_ops[1],
            EventOp::Matrix(m) => m,
        };
        let d = self.model.dim();
        if m.rows() != d || m.cols() != d {
            return Err(Error::Dimension(format!("event operator is {}x{}, model dimension {d}", m.rows(), m.cols())));
        }
        Ok(m)
    }

    pub fn evaluate(&self, request: &CorrelationRequest) -> Result<C64> {
        if request.events.is_empty() {
            return Err(Error::UnsupportedEvent("correlation request has no events".into()));
        }
        let floor = request.initial_time.max(self.model.initial_time());
        if let Some(e) = request.events.iter().find(|e| e.time < floor) {
            return Err(Error::Ordering(format!("event at {} precedes the initial time {floor}", e.time)));
        }
        let d = self.model.dim();
        let events = request.sorted();
        let mut t = events[0].time;
        let mut v = self.state_vec(t)?;
        for e in events {
            v = self.propagator.propagate_vec(&v, t, e.time)?;
            t = e.time;
            let op = self.operator(&e.op)?;
            v = apply(op, e.side, &v, d);
        }
        Ok((0..d).map(|i| v[i * d + i]).sum())
    }
}

/// Multiplies the column-stacked `d×d` matrix `v` by `op` on the given side.
fn apply(op: &ComplexMatrix, side: Side, v: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    match side {
        Side::Left => {
            for c in 0..d {
                for r in 0..d {
                    out[c * d + r] = (0..d).map(|k| op[(r, k)] * v[c * d + k]).sum();
                }
            }
        }
        Side::Right => {
            // (M·O†)[r][c] = Σ_k M[r][k] conj(O[c][k])
            for c in 0..d {
                for r in 0..d {
                    out[c * d + r] = (0..d).map(|k| v[k * d + r] * op[(c, k)].conj()).sum();
                }
            }
        }
    }
    out
}

impl CorrelationSource for CorrelationEngine {
    fn correlate(&self, request: &CorrelationRequest) -> Result<C64> {
        self.evaluate(request)
    }

    fn time_bins(&self) -> TimeBinConfig {
        self.bins
    }
}

/// One-shot evaluation with `grid_density` steps per unit time.
pub fn evaluate(request: &CorrelationRequest, model: &EmitterModel, grid_density: usize) -> Result<C64> {
    if grid_density == 0 {
        return Err(Error::Dimension("grid density must be positive".into()));
    }
    let horizon = request.latest().max(model.initial_time());
    let bins = TimeBinConfig::new(horizon.max(1.0))?;
    let engine = CorrelationEngine::with_horizon(model.clone(), bins, horizon, 1.0 / grid_density as f64)?;
    engine.evaluate(request)
}

/// `⟨a†(t − conjugate_shift) a(t − shift)⟩` at every point of `window`.
///
/// Points where a shifted time is negative are exactly zero.
pub fn g1_grid<S: CorrelationSource + ?Sized>(
    source: &S,
    channel: Channel,
    window: &TimeGrid,
    shift: f64,
    conjugate_shift: f64,
) -> Result<Vec<C64>> {
    let horizon = source.time_bins().horizon();
    if window.t_start() < 0.0 || window.t_end() > horizon * (1.0 + 1e-12) {
        return Err(Error::Window(format!("window [{}, {}] outside [0, {horizon}]", window.t_start(), window.t_end())));
    }
    (0..window.n_steps())
        .into_par_iter()
        .map(|k| {
            let t = window.point(k);
            source.correlate_supported(&CorrelationRequest::two_time(channel, t - conjugate_shift, t - shift))
        })
        .collect()
}
