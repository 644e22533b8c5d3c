//! Energy–power transforms: convex envelopes that decide servability.
//!
//! The *burst-power profile* of a fleet state maps a duration `u` to the
//! total power the fleet could sustain for at least `u` hours, every store
//! at full rate until it empties. Clipping that profile above a power `p`
//! and integrating gives the store transform `e_S(p)`: the energy the fleet
//! can deliver through the portion of its power above `p`. Doing the same
//! to a demand signal over a window gives the demand transform `e_D(p)`.
//!
//! Both transforms are convex, weakly decreasing, piecewise-linear and zero
//! beyond their last knot. Their pointwise gap is what makes them useful:
//! the least unserved energy any dispatch can achieve over the window —
//! cross-charging included — equals `max_p (e_D(p) - e_S(p))`, the maximum
//! being attained at a knot of either curve. A fleet can fully serve a
//! demand if and only if its store transform dominates the demand transform
//! everywhere.
//!
//! Infinite horizons reduce to this finite-window calculus: past the last
//! time the demand is positive, both transforms freeze, so evaluating at the
//! final demand breakpoint decides the infinite-horizon question.

use crate::model::{Fleet, FleetState, ModelError, StepSignal};
use crate::policies::discharge_groups;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "demand is negative ({value} MW at t = {time} h); transforms need a pure-demand window"
    )]
    NegativeDemand { time: f64, value: f64 },
    #[error("invalid knots: {0}")]
    InvalidKnots(String),
}

/// A weakly decreasing step function of duration `u >= 0`: level `levels[j]`
/// holds on `(breakpoints[j-1], breakpoints[j]]` (with an implicit 0 on the
/// left of the first segment boundary), and 0 beyond the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    /// Empty profile: identically zero.
    pub fn zero() -> Self {
        StepFunction {
            breakpoints: Vec::new(),
            levels: Vec::new(),
        }
    }

    /// Segment ends, strictly increasing, hours.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Power level per segment, weakly decreasing, MW.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Value at duration `u` (clamped to the first level at `u <= 0`,
    /// 0 beyond the last breakpoint).
    pub fn value(&self, u: f64) -> f64 {
        if self.levels.is_empty() {
            return 0.0;
        }
        if u <= self.breakpoints[0] {
            return self.levels[0];
        }
        match self.breakpoints.partition_point(|&b| b < u) {
            j if j >= self.levels.len() => 0.0,
            j => self.levels[j],
        }
    }

    /// Total area under the profile, MWh.
    pub fn integral(&self) -> f64 {
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (b, l) in self.breakpoints.iter().zip(&self.levels) {
            acc += (b - prev) * l;
            prev = *b;
        }
        acc
    }

    /// Area of the part of the profile above power `p`, MWh.
    pub fn integral_above(&self, p: f64) -> f64 {
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (b, l) in self.breakpoints.iter().zip(&self.levels) {
            acc += (b - prev) * (l - p).max(0.0);
            prev = *b;
        }
        acc
    }
}

/// A convex, weakly decreasing, piecewise-linear function of power `p >= 0`,
/// identically zero from its last knot onwards. The first knot always sits
/// at `p = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlConvex {
    knots: Vec<(f64, f64)>,
}

impl PwlConvex {
    /// The zero function, as produced by an all-empty fleet or an empty
    /// demand window.
    pub fn zero() -> Self {
        PwlConvex {
            knots: vec![(0.0, 0.0)],
        }
    }

    /// Builds a transform from `(power, energy)` knots, validating every
    /// structural invariant: first knot at 0, strictly increasing powers
    /// (knots closer than `eps` are merged), weakly decreasing energies,
    /// weakly increasing slopes, final energy 0.
    pub fn from_knots(knots: Vec<(f64, f64)>, eps: f64) -> Result<Self, TransformsError> {
        if knots.is_empty() {
            return Err(TransformsError::InvalidKnots("no knots".into()));
        }
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
        for (p, e) in knots {
            if !p.is_finite() || !e.is_finite() {
                return Err(TransformsError::InvalidKnots(format!(
                    "non-finite knot ({p}, {e})"
                )));
            }
            match merged.last() {
                Some(&(lp, le)) if p - lp <= eps => {
                    if (e - le).abs() > eps.max(1e-9 * (1.0 + le.abs())) {
                        return Err(TransformsError::InvalidKnots(format!(
                            "coincident powers {lp} and {p} with different energies {le} and {e}"
                        )));
                    }
                }
                Some(&(lp, _)) if p <= lp => {
                    return Err(TransformsError::InvalidKnots(format!(
                        "powers not increasing at {p}"
                    )));
                }
                _ => merged.push((p, e)),
            }
        }
        if merged[0].0.abs() > eps {
            return Err(TransformsError::InvalidKnots(format!(
                "first knot must sit at power 0, got {}",
                merged[0].0
            )));
        }
        merged[0].0 = 0.0;
        let last = merged.last_mut().unwrap();
        if last.1.abs() > eps.max(1e-9 * (1.0 + last.1.abs())) {
            return Err(TransformsError::InvalidKnots(format!(
                "final knot energy must be 0, got {}",
                last.1
            )));
        }
        last.1 = 0.0;
        let mut prev_slope = f64::NEG_INFINITY;
        for w in merged.windows(2) {
            let (p0, e0) = w[0];
            let (p1, e1) = w[1];
            if e1 > e0 + eps.max(1e-9 * (1.0 + e0.abs())) {
                return Err(TransformsError::InvalidKnots(format!(
                    "energies increase between p = {p0} and p = {p1}"
                )));
            }
            let slope = (e1 - e0) / (p1 - p0);
            let slack = 1e-9 * (1.0 + prev_slope.abs());
            if slope + slack < prev_slope {
                return Err(TransformsError::InvalidKnots(format!(
                    "not convex: slope drops from {prev_slope} to {slope} at p = {p0}"
                )));
            }
            prev_slope = slope;
        }
        Ok(PwlConvex { knots: merged })
    }

    /// The `(power, energy)` knots, powers strictly increasing from 0.
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Value at power `p` (clamped at `p = 0` on the left, 0 beyond the
    /// last knot).
    pub fn eval(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        let last = self.knots.last().unwrap();
        if p >= last.0 {
            return if self.knots.len() == 1 { last.1 } else { 0.0 };
        }
        let j = self.knots.partition_point(|&(kp, _)| kp <= p);
        // j >= 1 because knots[0].0 == 0 <= p, and j < len because p < last
        let (p0, e0) = self.knots[j - 1];
        let (p1, e1) = self.knots[j];
        e0 + (e1 - e0) * (p - p0) / (p1 - p0)
    }

    /// Power of the last knot: beyond it the function is identically 0.
    pub fn last_power(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    /// Value at `p = 0` (total energy for a store transform).
    pub fn at_zero(&self) -> f64 {
        self.knots[0].1
    }

    /// True if `self(p) >= other(p) - slack` for every `p >= 0`. Both
    /// functions are piecewise linear, so checking the union of knots is
    /// exact.
    pub fn dominates(&self, other: &PwlConvex, slack: f64) -> bool {
        let (power, gap) = max_gap(other, self);
        let _ = power;
        gap <= slack
    }
}

/// Largest pointwise gap `upper(p) - lower(p)` over `p >= 0`, together with
/// a power attaining it. Both curves are piecewise linear and eventually
/// vanish, so the maximum sits at a knot and is never negative; when
/// neither curve exceeds the other the gap is 0, attained in the flat tail.
pub fn max_gap(upper: &PwlConvex, lower: &PwlConvex) -> (f64, f64) {
    let mut best_p = upper.last_power().max(lower.last_power());
    let mut best = 0.0;
    let mut consider = |p: f64| {
        let g = upper.eval(p) - lower.eval(p);
        if g > best {
            best = g;
            best_p = p;
        }
    };
    for &(p, _) in upper.knots() {
        consider(p);
    }
    for &(p, _) in lower.knots() {
        consider(p);
    }
    (best_p, best)
}

/// The burst-power profile of a fleet state: the total power the fleet can
/// sustain for at least `u` hours. Weakly decreasing in `u`; empty stores
/// (energy within `eps` of 0) contribute nothing.
pub fn burst_power_profile(fleet: &Fleet, state: &FleetState, eps: f64) -> StepFunction {
    let groups = discharge_groups(fleet, &state.energies, eps);
    if groups.is_empty() {
        return StepFunction::zero();
    }
    // groups are longest-first; ascending segments accumulate suffix power
    let mut breakpoints = Vec::with_capacity(groups.len());
    let mut levels = Vec::with_capacity(groups.len());
    let total: f64 = groups.iter().map(|g| g.power).sum();
    let mut above = total;
    for g in groups.iter().rev() {
        breakpoints.push(g.duration);
        levels.push(above);
        above -= g.power;
    }
    StepFunction {
        breakpoints,
        levels,
    }
}

/// Cumulative-power breakpoints of the descending-duration ordering: 0, then
/// the running power total after each duration group. These are exactly the
/// powers at which the store transform kinks; the set only ever loses points
/// as a greedy discharge progresses.
pub fn duration_breakpoints(fleet: &Fleet, state: &FleetState, eps: f64) -> Vec<f64> {
    let groups = discharge_groups(fleet, &state.energies, eps);
    let mut out = Vec::with_capacity(groups.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for g in &groups {
        acc += g.power;
        out.push(acc);
    }
    out
}

/// Store transform `e_S(p)`: energy deliverable through the portion of the
/// fleet's burst power above `p`, as a function of `p`.
pub fn store_transform(fleet: &Fleet, state: &FleetState, eps: f64) -> PwlConvex {
    let profile = burst_power_profile(fleet, state, eps);
    if profile.levels().is_empty() {
        return PwlConvex::zero();
    }
    let powers = duration_breakpoints(fleet, state, eps);
    let knots: Vec<(f64, f64)> = powers
        .into_iter()
        .map(|p| (p, profile.integral_above(p)))
        .collect();
    PwlConvex::from_knots(knots, eps).expect("profile-derived knots are structurally valid")
}

/// Demand transform `e_D(p)` over the window `[t0, t1]`: energy of the part
/// of the demand above power `p`. Negative demand segments contribute
/// nothing (they are surplus, not demand).
pub fn demand_transform(
    signal: &StepSignal,
    t0: f64,
    t1: f64,
    eps: f64,
) -> Result<PwlConvex, TransformsError> {
    if t0 < signal.start() - eps || t1 > signal.horizon() + eps || t0 > t1 {
        return Err(ModelError::WindowOutOfRange {
            t0,
            t1,
            start: signal.start(),
            end: signal.horizon(),
        }
        .into());
    }
    let pieces = window_pieces(signal, t0, t1);
    let mut levels: Vec<f64> = pieces
        .iter()
        .filter(|(_, v)| *v > eps)
        .map(|&(_, v)| v)
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|b, a| *b - *a <= eps);
    if levels.is_empty() {
        return Ok(PwlConvex::zero());
    }
    let eval = |p: f64| -> f64 { pieces.iter().map(|&(len, v)| len * (v - p).max(0.0)).sum() };
    let mut knots = Vec::with_capacity(levels.len() + 1);
    knots.push((0.0, eval(0.0)));
    for &l in &levels {
        knots.push((l, eval(l)));
    }
    PwlConvex::from_knots(knots, eps)
}

/// `(length, value)` of every piece of the signal inside `[t0, t1]`.
fn window_pieces(signal: &StepSignal, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (k, w) in signal.breakpoints().windows(2).enumerate() {
        let lo = w[0].max(t0);
        let hi = w[1].min(t1);
        if hi > lo {
            out.push((hi - lo, signal.values()[k]));
        }
    }
    out
}

/// Outcome of a servability check.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeCheck {
    /// True exactly when the store transform dominates the demand transform.
    pub fully_servable: bool,
    /// When not servable: the (smallest) power with the largest gap.
    pub witness: Option<GapWitness>,
}

/// A power at which the demand transform exceeds the store transform,
/// certifying that `shortfall` MWh must go unserved under any dispatch
/// that never charges one store from another.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapWitness {
    pub power: f64,
    pub shortfall: f64,
}

/// Least unserved energy (MWh) achievable by any dispatch that never
/// charges one store from another, over `[state.time, t1]`: the largest
/// gap `e_D(p) - e_S(p)` over the merged knot set. 0 means fully
/// servable. Cross-charging can beat this bound; ask the grid oracle for
/// that optimum.
///
/// # Errors
/// Rejects windows containing negative demand and windows outside the
/// signal's domain.
pub fn min_unserved_energy(
    fleet: &Fleet,
    state: &FleetState,
    signal: &StepSignal,
    t1: f64,
    eps: f64,
) -> Result<f64, TransformsError> {
    let check = can_fully_serve(fleet, state, signal, t1, eps)?;
    Ok(check.witness.map_or(0.0, |w| w.shortfall))
}

/// Decides whether the fleet can fully serve the demand on
/// `[state.time, t1]` without cross-charging, with a witness power when it
/// cannot. Same preconditions as [`min_unserved_energy`].
pub fn can_fully_serve(
    fleet: &Fleet,
    state: &FleetState,
    signal: &StepSignal,
    t1: f64,
    eps: f64,
) -> Result<ServeCheck, TransformsError> {
    let t0 = state.time;
    for (k, w) in signal.breakpoints().windows(2).enumerate() {
        let v = signal.values()[k];
        if v < -eps && w[1] > t0 && w[0] < t1 {
            return Err(TransformsError::NegativeDemand {
                time: w[0].max(t0),
                value: v,
            });
        }
    }
    let e_s = store_transform(fleet, state, eps);
    let e_d = demand_transform(signal, t0, t1, eps)?;
    let (power, gap) = max_gap(&e_d, &e_s);
    if gap <= eps {
        Ok(ServeCheck {
            fully_servable: true,
            witness: None,
        })
    } else {
        Ok(ServeCheck {
            fully_servable: false,
            witness: Some(GapWitness {
                power,
                shortfall: gap,
            }),
        })
    }
}

/// Smallest power at which the store transform vanishes: the combined rate
/// limit of the stores still holding energy. After a horizon-long greedy
/// discharge this is the knee of what remains.
pub fn critical_power(fleet: &Fleet, state: &FleetState, eps: f64) -> f64 {
    fleet
        .stores
        .iter()
        .zip(&state.energies)
        .filter(|(_, &e)| e > eps)
        .map(|(s, _)| s.max_discharge)
        .sum()
}
