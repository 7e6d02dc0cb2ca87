//! Term expansion under the unbalanced interferometer substitution
//! `a(t) → a(t) + e^{iφ} a(t − T)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlation::{Channel, CorrelationRequest, Event};
use crate::error::{Error, Result};

/// Phase-plate settings of the two interferometers. Single-photon scans use `phi_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetting {
    pub phi_b: f64,
    pub phi_x: f64,
}

impl PhaseSetting {
    pub fn new(phi_b: f64, phi_x: f64) -> Self {
        Self { phi_b, phi_x }
    }

    pub fn single(phi: f64) -> Self {
        Self { phi_b: 0.0, phi_x: phi }
    }

    pub fn phase(&self, channel: Channel) -> f64 {
        match channel {
            Channel::B => self.phi_b,
            Channel::X => self.phi_x,
        }
    }

    /// Both angles mapped into `[0, 2π)`.
    pub fn reduced(&self) -> Self {
        let tau = std::f64::consts::TAU;
        Self { phi_b: self.phi_b.rem_euclid(tau), phi_x: self.phi_x.rem_euclid(tau) }
    }
}

/// One field operator of an expanded term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShiftedOperator {
    pub channel: Channel,
    /// Creation-side operator.
    pub dagger: bool,
    /// Argument taken at `t − T` (the long arm).
    pub delayed: bool,
}

/// A correlator with shifted arguments and its interferometer phase factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub phase_factor: C64,
    /// Operators in written order, creation side first.
    pub operators: Vec<ShiftedOperator>,
}

/// Which observation windows a term is integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Window index of the single detected channel.
    Single(usize),
    /// Window indices of the B and X detection times.
    Pair(usize, usize),
}

impl Window {
    fn index(&self, channel: Channel) -> usize {
        match (*self, channel) {
            (Window::Single(k), _) => k,
            (Window::Pair(b, _), Channel::B) => b,
            (Window::Pair(_, x), Channel::X) => x,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Window::Single(k) => k < 3,
            Window::Pair(b, x) => b < 3 && x < 3,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Window(format!("{self:?} is not one of the observed windows")))
        }
    }
}

impl DelayTerm {
    fn from_shifts(operators: Vec<ShiftedOperator>, setting: &PhaseSetting) -> Self {
        // the long arm adds e^{iφ} to the annihilation side and e^{−iφ} to the creation side
        let angle: f64 = operators
            .iter()
            .filter(|o| o.delayed)
            .map(|o| if o.dagger { -1.0 } else { 1.0 } * setting.phase(o.channel))
            .sum();
        Self { phase_factor: C64::from_polar(1.0, angle), operators }
    }

    pub fn channels(&self) -> Vec<Channel> {
        let mut c: Vec<Channel> = self.operators.iter().map(|o| o.channel).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Delay pattern as `(creation delayed, annihilation delayed)` for `channel`.
    pub fn delays(&self, channel: Channel) -> (bool, bool) {
        let find = |dagger| self.operators.iter().any(|o| o.channel == channel && o.dagger == dagger && o.delayed);
        (find(true), find(false))
    }

    /// True when the term interferes, i.e. some channel is delayed on one side only.
    pub fn is_cross(&self) -> bool {
        self.channels().into_iter().any(|c| {
            let (d, p) = self.delays(c);
            d != p
        })
    }

    /// The correlator at detection times `t_b` and `t_x` for bin separation `t_bin`.
    pub fn request(&self, t_b: f64, t_x: f64, t_bin: f64) -> CorrelationRequest {
        let events = self
            .operators
            .iter()
            .map(|o| {
                let t = match o.channel {
                    Channel::B => t_b,
                    Channel::X => t_x,
                } - if o.delayed { t_bin } else { 0.0 };
                // cascade order at equal times: the B operator sits next to ρ
                let idx = match o.channel {
                    Channel::B => 0,
                    Channel::X => 1,
                };
                if o.dagger {
                    Event::right(t, o.channel, idx)
                } else {
                    Event::left(t, o.channel, idx)
                }
            })
            .collect();
        CorrelationRequest::new(events)
    }
}

/// The four single-channel terms in the order
/// `⟨a†(t)a(t)⟩`, `e^{−iφ}⟨a†(t−T)a(t)⟩`, `e^{iφ}⟨a†(t)a(t−T)⟩`, `⟨a†(t−T)a(t−T)⟩`.
pub fn expand_single(phi: f64) -> Vec<DelayTerm> {
    let setting = PhaseSetting::single(phi);
    [(false, false), (true, false), (false, true), (true, true)]
        .into_iter()
        .map(|(dd, pd)| {
            let ops = vec![
                ShiftedOperator { channel: Channel::X, dagger: true, delayed: dd },
                ShiftedOperator { channel: Channel::X, dagger: false, delayed: pd },
            ];
            DelayTerm::from_shifts(ops, &setting)
        })
        .collect()
}

/// Delay flags `(B†, X†, X, B)` of the sixteen pair terms in their conventional listing order.
pub const PAIR_TERM_DELAYS: [[bool; 4]; 16] = [
    [false, false, true, true],
    [false, false, false, true],
    [false, true, true, true],
    [false, true, false, true],
    [false, false, true, false],
    [true, false, true, true],
    [false, false, false, false],
    [false, true, true, false],
    [true, false, false, true],
    [true, true, true, true],
    [false, true, false, false],
    [true, true, false, true],
    [true, false, true, false],
    [true, false, false, false],
    [true, true, true, false],
    [true, true, false, false],
];

fn pair_term(delays: [bool; 4], setting: &PhaseSetting) -> DelayTerm {
    let [bd, xd, xp, bp] = delays;
    let ops = vec![
        ShiftedOperator { channel: Channel::B, dagger: true, delayed: bd },
        ShiftedOperator { channel: Channel::X, dagger: true, delayed: xd },
        ShiftedOperator { channel: Channel::X, dagger: false, delayed: xp },
        ShiftedOperator { channel: Channel::B, dagger: false, delayed: bp },
    ];
    DelayTerm::from_shifts(ops, setting)
}

/// The sixteen two-photon terms, ordered as `PAIR_TERM_DELAYS`.
pub fn expand_pair(setting: &PhaseSetting) -> Vec<DelayTerm> {
    PAIR_TERM_DELAYS.iter().map(|&d| pair_term(d, setting)).collect()
}

/// Test hook: `expand_pair` with the phase factor of term `flipped` conjugated.
pub fn expand_pair_with_flip(setting: &PhaseSetting, flipped: usize) -> Vec<DelayTerm> {
    let mut terms = expand_pair(setting);
    if let Some(t) = terms.get_mut(flipped) {
        t.phase_factor = t.phase_factor.conj();
    }
    terms
}

/// Whether every shifted argument of `term` can lie in `[0, 2T]` on a set of
/// positive measure inside `window`.
pub fn term_support(term: &DelayTerm, window: Window) -> Result<bool> {
    window.validate()?;
    Ok(term.channels().into_iter().all(|c| {
        let k = window.index(c) as f64;
        let (d, p) = term.delays(c);
        let shifts = [d as u8 as f64, p as u8 as f64];
        // in units of T: t ∈ [k, k+1] with t − s ∈ [0, 2] for both shifts
        let lo = k.max(shifts[0].max(shifts[1]));
        let hi = (k + 1.0).min(2.0 + shifts[0].min(shifts[1]));
        hi > lo
    }))
}

/// Terms of `terms` supported on `window`.
pub fn supported_terms(terms: &[DelayTerm], window: Window) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        if term_support(t, window)? {
            out.push(i);
        }
    }
    Ok(out)
}
