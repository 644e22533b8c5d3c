//! Event-driven dispatch simulation, exact at machine precision.
//!
//! Between events every quantity the policies look at moves linearly, so the
//! simulator never integrates numerically: it computes the next event time in
//! closed form and jumps. Events are
//!
//! - signal breakpoints (the demand changes),
//! - a store emptying or filling under its current rate,
//! - two adjacent duration groups coalescing (their remaining durations
//!   meet, which changes the greedy allocation).
//!
//! The resulting trajectory is piecewise constant in rates and piecewise
//! linear in energies, with event times and energies carrying only rounding
//! error — no discretization error at all.

use crate::model::{
    apply_rates, external_power_total, validate_fleet, validate_state, Fleet, FleetState,
    ModelError, RateVector, StepSignal, Violation,
};
use crate::policies::{allocate_grouped, PolicyError, PolicyKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid fleet: {}", list(.0))]
    InvalidFleet(Vec<Violation>),
    #[error("invalid initial state: {}", list(.0))]
    InvalidState(Vec<Violation>),
    #[error("initial time {time} h lies outside the signal domain [{start}, {horizon}] h")]
    StartOutsideSignal { time: f64, start: f64, horizon: f64 },
    #[error("simulation exceeded {0} events without reaching the horizon")]
    EventOverflow(usize),
    #[error("schedule has rates for {got} stores, fleet has {want}")]
    ScheduleArity { want: usize, got: usize },
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Numeric tolerance: grouping of near-equal durations, emptiness
    /// checks, rate/energy bound slack.
    pub eps: f64,
    /// Hard cap on processed events. `None` sizes the cap from the instance
    /// (stores × signal segments), which genuine runs stay well under.
    pub max_events: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            eps: crate::DEFAULT_EPS,
            max_events: None,
        }
    }
}

/// State of the run at one event: the situation *at* `time`, plus the rates
/// in force from `time` until the next event.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    /// Event time, hours.
    pub time: f64,
    /// Stored energy per store at this time, MWh.
    pub energies: Vec<f64>,
    /// Rates applied from this event to the next, MW (all zero on the final
    /// point).
    pub rates: RateVector,
    /// Unserved demand accumulated on `[start, time]`, MWh.
    pub cum_unserved: f64,
    /// Spilled surplus accumulated on `[start, time]`, MWh.
    pub cum_spilled: f64,
}

/// A full piecewise-linear dispatch trajectory. The last point always sits
/// at the horizon with zero rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchTrajectory {
    points: Vec<TrajectoryPoint>,
}

impl DispatchTrajectory {
    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn start(&self) -> f64 {
        self.points[0].time
    }

    pub fn horizon(&self) -> f64 {
        self.points.last().unwrap().time
    }

    /// Index of the trajectory segment containing `t`.
    fn segment_at(&self, t: f64) -> Option<usize> {
        if t < self.start() || t > self.horizon() {
            return None;
        }
        let k = self.points.partition_point(|p| p.time <= t);
        Some(k.saturating_sub(1))
    }

    /// Energies at any time inside the trajectory's domain (linear between
    /// events, exact).
    pub fn energies_at(&self, t: f64) -> Option<Vec<f64>> {
        let k = self.segment_at(t)?;
        let p = &self.points[k];
        let dt = t - p.time;
        Some(
            p.energies
                .iter()
                .zip(&p.rates.0)
                .map(|(&e, &r)| e - r * dt)
                .collect(),
        )
    }

    /// Rates in force at time `t` (zero exactly at the horizon).
    pub fn rates_at(&self, t: f64) -> Option<&RateVector> {
        self.segment_at(t).map(|k| &self.points[k].rates)
    }

    /// Unserved energy accumulated on `[start, t]`, MWh (linear between
    /// events, exact).
    pub fn cumulative_unserved_at(&self, t: f64) -> Option<f64> {
        self.cumulative_at(t, |p| p.cum_unserved)
    }

    /// Spilled energy accumulated on `[start, t]`, MWh.
    pub fn cumulative_spilled_at(&self, t: f64) -> Option<f64> {
        self.cumulative_at(t, |p| p.cum_spilled)
    }

    fn cumulative_at(&self, t: f64, get: impl Fn(&TrajectoryPoint) -> f64) -> Option<f64> {
        let k = self.segment_at(t)?;
        if k + 1 == self.points.len() {
            return Some(get(&self.points[k]));
        }
        let (a, b) = (&self.points[k], &self.points[k + 1]);
        if b.time == a.time {
            return Some(get(a));
        }
        let frac = (t - a.time) / (b.time - a.time);
        Some(get(a) + (get(b) - get(a)) * frac)
    }

    /// The trajectory's rates as a replayable schedule.
    pub fn to_schedule(&self) -> RateSchedule {
        if self.points.len() == 1 {
            // a zero-extent run: pad to the shortest legal schedule (all
            // zero rates, so replaying any window of it is a no-op)
            let n = self.points[0].energies.len();
            return RateSchedule {
                breakpoints: vec![self.points[0].time, self.points[0].time + 1.0],
                rates: vec![RateVector::zeros(n)],
                n_stores: n,
            };
        }
        RateSchedule {
            breakpoints: self.points.iter().map(|p| p.time).collect(),
            rates: self.points[..self.points.len() - 1]
                .iter()
                .map(|p| p.rates.clone())
                .collect(),
            n_stores: self.points[0].energies.len(),
        }
    }
}

/// A piecewise-constant rate plan: `rates[k]` holds on
/// `[breakpoints[k], breakpoints[k+1])`. Zero rates outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    breakpoints: Vec<f64>,
    rates: Vec<RateVector>,
    n_stores: usize,
}

impl RateSchedule {
    /// Builds a schedule from `n+1` strictly increasing breakpoints and `n`
    /// rate vectors of uniform length.
    pub fn new(breakpoints: Vec<f64>, rates: Vec<RateVector>) -> Result<Self, ModelError> {
        if breakpoints.len() < 2 {
            return Err(ModelError::SignalTooShort);
        }
        if rates.len() + 1 != breakpoints.len() {
            return Err(ModelError::SignalShape {
                breakpoints: breakpoints.len(),
                values: rates.len(),
            });
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() || w[1] <= w[0] {
                return Err(ModelError::SignalNotIncreasing(i + 1));
            }
        }
        let n_stores = rates[0].len();
        for (i, r) in rates.iter().enumerate() {
            if r.len() != n_stores {
                return Err(ModelError::DimensionMismatch {
                    want: n_stores,
                    got: r.len(),
                });
            }
            if r.0.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::SignalValueNotFinite(i));
            }
        }
        Ok(RateSchedule {
            breakpoints,
            rates,
            n_stores,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_stores(&self) -> usize {
        self.n_stores
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Rates at time `t` (zeros outside the domain).
    pub fn rates_at(&self, t: f64) -> RateVector {
        if t < self.start() || t >= self.horizon() {
            return RateVector::zeros(self.n_stores);
        }
        let k = self.breakpoints.partition_point(|&b| b <= t) - 1;
        self.rates[k].clone()
    }
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Demand energy left unserved over the run, MWh.
    pub total_unserved: f64,
    /// Surplus energy left unabsorbed over the run, MWh.
    pub total_spilled: f64,
    /// First time the dispatch failed to meet positive demand, if it ever
    /// did, hours.
    pub first_failure_time: Option<f64>,
    /// Fleet state at the horizon.
    pub final_state: FleetState,
    /// The full event-by-event trajectory.
    pub trajectory: DispatchTrajectory,
}

/// Compensated accumulator for the unserved/spilled running totals.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

fn check_inputs(
    fleet: &Fleet,
    initial: &FleetState,
    signal: &StepSignal,
    eps: f64,
) -> Result<(), SimError> {
    let v = validate_fleet(fleet);
    if !v.is_empty() {
        return Err(SimError::InvalidFleet(v));
    }
    let v = validate_state(fleet, initial, eps);
    if !v.is_empty() {
        return Err(SimError::InvalidState(v));
    }
    if initial.time < signal.start() - eps || initial.time > signal.horizon() + eps {
        return Err(SimError::StartOutsideSignal {
            time: initial.time,
            start: signal.start(),
            horizon: signal.horizon(),
        });
    }
    Ok(())
}

/// Simulates `policy` on `signal` from `initial` up to the signal's horizon.
///
/// The run starts at `initial.time`, which may sit anywhere inside the
/// signal's domain (restarting mid-signal reproduces the tail of an
/// uninterrupted run for the instantaneous policies).
pub fn simulate(
    fleet: &Fleet,
    initial: &FleetState,
    signal: &StepSignal,
    policy: &PolicyKind,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    check_inputs(fleet, initial, signal, config.eps)?;
    if *policy == PolicyKind::ReverseGgddf {
        let plan = reverse_ggddf_plan(fleet, initial, signal, config)?;
        return replay_schedule(fleet, initial, signal, &plan, config);
    }
    let eps = config.eps;
    let horizon = signal.horizon();
    let guard = config
        .max_events
        .unwrap_or(10 * fleet.len().max(1) * signal.num_segments() + 100);

    let mut state = initial.clone();
    let mut points: Vec<TrajectoryPoint> = Vec::new();
    let mut unserved = Kahan::default();
    let mut spilled = Kahan::default();
    let mut first_failure = None;
    let mut events = 0usize;

    while state.time < horizon {
        events += 1;
        if events > guard {
            return Err(SimError::EventOverflow(guard));
        }
        let demand = signal.value_at(state.time);
        let (alloc, groups) = allocate_grouped(policy, fleet, &state, demand, eps)?;
        if alloc.unserved > eps && first_failure.is_none() {
            first_failure = Some(state.time);
        }

        let mut next = signal
            .next_breakpoint_after(state.time)
            .unwrap_or(horizon)
            .min(horizon);
        for (i, s) in fleet.stores.iter().enumerate() {
            let r = alloc.rates[i];
            let candidate = if r > 0.0 {
                state.time + state.energies[i] / r
            } else if r < 0.0 {
                state.time + (s.capacity - state.energies[i]) / (-r)
            } else {
                continue;
            };
            if candidate > state.time && candidate < next {
                next = candidate;
            }
        }
        // Adjacent groups close their duration gap at rate
        // `lambda_a - lambda_b`; when they meet, the allocation changes.
        for w in groups.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.lambda > b.lambda {
                let candidate = state.time + (a.duration - b.duration) / (a.lambda - b.lambda);
                if candidate > state.time && candidate < next {
                    next = candidate;
                }
            }
        }

        points.push(TrajectoryPoint {
            time: state.time,
            energies: state.energies.clone(),
            rates: alloc.rates.clone(),
            cum_unserved: unserved.value(),
            cum_spilled: spilled.value(),
        });
        let dt = next - state.time;
        unserved.add(alloc.unserved * dt);
        spilled.add(alloc.spilled * dt);
        state = apply_rates(fleet, &state, &alloc.rates, dt, eps)?;
        state.time = next;
    }

    points.push(TrajectoryPoint {
        time: state.time,
        energies: state.energies.clone(),
        rates: RateVector::zeros(fleet.len()),
        cum_unserved: unserved.value(),
        cum_spilled: spilled.value(),
    });
    Ok(SimReport {
        total_unserved: unserved.value(),
        total_spilled: spilled.value(),
        first_failure_time: first_failure,
        final_state: state,
        trajectory: DispatchTrajectory { points },
    })
}

/// Plays a fixed rate schedule against the signal, validating rate and
/// energy bounds as it goes.
///
/// Accounting treats the net external power `p` symmetrically: with demand
/// `d`, `max(0, d - p)` counts as unserved and `max(0, p - d)` as spilled,
/// which coincides with the policies' own accounting on their traces.
pub fn replay_schedule(
    fleet: &Fleet,
    initial: &FleetState,
    signal: &StepSignal,
    schedule: &RateSchedule,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    check_inputs(fleet, initial, signal, config.eps)?;
    if schedule.n_stores() != fleet.len() {
        return Err(SimError::ScheduleArity {
            want: fleet.len(),
            got: schedule.n_stores(),
        });
    }
    let horizon = signal.horizon();
    let mut times: Vec<f64> = signal
        .breakpoints()
        .iter()
        .chain(schedule.breakpoints())
        .copied()
        .filter(|&t| t > initial.time && t < horizon)
        .collect();
    times.push(horizon);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let mut state = initial.clone();
    let mut points: Vec<TrajectoryPoint> = Vec::new();
    let mut unserved = Kahan::default();
    let mut spilled = Kahan::default();
    let mut first_failure = None;
    for &next in &times {
        let rates = schedule.rates_at(state.time);
        let demand = signal.value_at(state.time);
        let power = external_power_total(fleet, &rates);
        let miss = (demand - power).max(0.0);
        let dump = (power - demand).max(0.0);
        if miss > config.eps && first_failure.is_none() {
            first_failure = Some(state.time);
        }
        points.push(TrajectoryPoint {
            time: state.time,
            energies: state.energies.clone(),
            rates: rates.clone(),
            cum_unserved: unserved.value(),
            cum_spilled: spilled.value(),
        });
        let dt = next - state.time;
        unserved.add(miss * dt);
        spilled.add(dump * dt);
        state = apply_rates(fleet, &state, &rates, dt, config.eps)?;
        state.time = next;
    }
    points.push(TrajectoryPoint {
        time: state.time,
        energies: state.energies.clone(),
        rates: RateVector::zeros(fleet.len()),
        cum_unserved: unserved.value(),
        cum_spilled: spilled.value(),
    });
    Ok(SimReport {
        total_unserved: unserved.value(),
        total_spilled: spilled.value(),
        first_failure_time: first_failure,
        final_state: state,
        trajectory: DispatchTrajectory { points },
    })
}

/// Builds the reverse-GGDDF schedule: run GGDDF against the time-reversed
/// signal from the same initial energies, then mirror the resulting rate
/// segments back onto forward time.
///
/// The mirrored schedule is always energy-feasible from `initial`: at
/// forward time `t` the replayed energy is
/// `E(0) - C(T) + C(T - t)`, where `C` is the reversed run's cumulative
/// discharge — a quantity pinned between `E(0) - C(T) >= 0` and `E(0)`.
pub fn reverse_ggddf_plan(
    fleet: &Fleet,
    initial: &FleetState,
    signal: &StepSignal,
    config: &SimConfig,
) -> Result<RateSchedule, SimError> {
    check_inputs(fleet, initial, signal, config.eps)?;
    let reversed = signal.reversed();
    let mirrored_start = signal.start() + signal.horizon() - initial.time;
    let rev_initial = FleetState::new(reversed.start(), initial.energies.clone());
    let rev_signal = if mirrored_start < reversed.horizon() {
        reversed.restricted(reversed.start(), mirrored_start)?
    } else {
        reversed
    };
    let report = simulate(fleet, &rev_initial, &rev_signal, &PolicyKind::Ggddf, config)?;
    let pts = report.trajectory.points();
    let total = signal.start() + signal.horizon();
    if pts.len() < 2 {
        return Ok(RateSchedule {
            breakpoints: vec![initial.time, signal.horizon()],
            rates: vec![RateVector::zeros(fleet.len())],
            n_stores: fleet.len(),
        });
    }
    let mut breakpoints: Vec<f64> = pts.iter().map(|p| total - p.time).collect();
    breakpoints.reverse();
    let mut rates: Vec<RateVector> = pts[..pts.len() - 1]
        .iter()
        .map(|p| p.rates.clone())
        .collect();
    rates.reverse();
    RateSchedule::new(breakpoints, rates).map_err(SimError::from)
}

/// Non-anticipation check: running `policy` on the signal truncated at
/// `t_split` must reproduce the full run's trajectory on `[start, t_split]` —
/// the same event times, energies, rates, and running totals, within
/// `config.eps`. Online policies pass by construction; the offline
/// [`PolicyKind::ReverseGgddf`] is rejected.
pub fn simulate_prefix_equivalence(
    fleet: &Fleet,
    initial: &FleetState,
    signal: &StepSignal,
    policy: &PolicyKind,
    t_split: f64,
    config: &SimConfig,
) -> Result<bool, SimError> {
    if *policy == PolicyKind::ReverseGgddf {
        return Err(SimError::Policy(PolicyError::OfflinePolicy(
            "reverse greedy needs the whole signal; prefix runs are undefined",
        )));
    }
    let full = simulate(fleet, initial, signal, policy, config)?;
    let truncated = signal.restricted(initial.time, t_split)?;
    let prefix = simulate(fleet, initial, &truncated, policy, config)?;

    let eps = config.eps;
    let close = |a: f64, b: f64| (a - b).abs() <= eps;
    let pts_full: Vec<_> = full
        .trajectory
        .points()
        .iter()
        .filter(|p| p.time < t_split - eps)
        .collect();
    let pts_pre: Vec<_> = prefix
        .trajectory
        .points()
        .iter()
        .filter(|p| p.time < t_split - eps)
        .collect();
    if pts_full.len() != pts_pre.len() {
        return Ok(false);
    }
    for (a, b) in pts_full.iter().zip(&pts_pre) {
        let same = close(a.time, b.time)
            && close(a.cum_unserved, b.cum_unserved)
            && close(a.cum_spilled, b.cum_spilled)
            && a.energies
                .iter()
                .zip(&b.energies)
                .all(|(&x, &y)| close(x, y))
            && a.rates.0.iter().zip(&b.rates.0).all(|(&x, &y)| close(x, y));
        if !same {
            return Ok(false);
        }
    }
    // The truncated run ends at t_split; compare its terminal state against
    // the full run evaluated there.
    let at_split = full.trajectory.energies_at(t_split);
    let end_ok = match at_split {
        Some(e) => e
            .iter()
            .zip(&prefix.final_state.energies)
            .all(|(&x, &y)| close(x, y)),
        None => false,
    };
    let totals_ok = full
        .trajectory
        .cumulative_unserved_at(t_split)
        .is_some_and(|u| close(u, prefix.total_unserved))
        && full
            .trajectory
            .cumulative_spilled_at(t_split)
            .is_some_and(|s| close(s, prefix.total_spilled));
    Ok(end_ok && totals_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Store;
    use crate::transforms::min_unserved_energy;

    fn config() -> SimConfig {
        SimConfig::default()
    }

    /// Five equal-power stores with staggered energies and the three-step
    /// demand used across the crate's tests.
    fn staggered() -> (Fleet, FleetState, StepSignal) {
        let caps = [100.0, 150.0, 200.0, 200.0, 250.0];
        let fleet = Fleet::new(
            caps.iter()
                .enumerate()
                .map(|(i, &c)| Store::discharge_only(format!("s{}", i + 1), c, 100.0))
                .collect(),
        );
        let state = fleet.full_state();
        let signal = StepSignal::new(vec![0.0, 2.0, 3.0, 4.0], vec![200.0, 500.0, 100.0]).unwrap();
        (fleet, state, signal)
    }

    /// Three two-way stores sharing one efficiency, for charge/discharge runs.
    fn two_way_fleet() -> Fleet {
        let mk = |id: &str, cap: f64, dis: f64, chg: f64| Store {
            id: id.into(),
            capacity: cap,
            max_discharge: dis,
            max_charge: chg,
            efficiency: 0.8,
        };
        Fleet::new(vec![
            mk("a", 6.0, 2.0, 1.0),
            mk("b", 10.0, 3.0, 2.0),
            mk("c", 4.0, 1.0, 1.5),
        ])
    }

    #[test]
    fn staggered_run_hits_exact_events_and_energies() {
        let (fleet, state, signal) = staggered();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();

        let times: Vec<f64> = report.trajectory.points().iter().map(|p| p.time).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0, 3.0, 4.0]);

        let pts = report.trajectory.points();
        // rates chosen at t = 0: longest store flat out, duration-2 pair split
        assert_eq!(pts[0].rates.0, vec![0.0, 0.0, 50.0, 50.0, 100.0]);
        // group coalescence at t = 1 with exact energies
        assert_eq!(pts[1].energies, vec![100.0, 150.0, 150.0, 150.0, 150.0]);
        assert_eq!(pts[1].rates.0, vec![0.0, 50.0, 50.0, 50.0, 50.0]);
        // demand step at t = 2, all durations equal by then
        assert_eq!(pts[2].energies, vec![100.0; 5]);
        assert_eq!(pts[2].rates.0, vec![100.0; 5]);
        // fleet exactly empty at t = 3
        assert_eq!(pts[3].energies, vec![0.0; 5]);
        assert_eq!(pts[3].rates.0, vec![0.0; 5]);

        assert_eq!(report.total_unserved, 100.0);
        assert_eq!(report.total_spilled, 0.0);
        assert_eq!(report.first_failure_time, Some(3.0));
        assert_eq!(report.final_state.energies, vec![0.0; 5]);

        // the realized shortfall matches the transform lower bound: this
        // demand admits no better dispatch
        let bound = min_unserved_energy(&fleet, &state, &signal, 4.0, 1e-9).unwrap();
        assert!((report.total_unserved - bound).abs() <= 1e-9);
    }

    #[test]
    fn added_breakpoints_do_not_change_the_outcome() {
        let (fleet, state, signal) = staggered();
        let base = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let fine = signal.refined(&[0.25, 0.5, 1.75, 2.2, 3.9], 1e-9);
        let refined = simulate(&fleet, &state, &fine, &PolicyKind::Ggddf, &config()).unwrap();
        assert!((base.total_unserved - refined.total_unserved).abs() <= 1e-12);
        assert_eq!(base.first_failure_time, refined.first_failure_time);
        for &t in &[0.7, 1.0, 1.9, 2.5, 3.1, 4.0] {
            let a = base.trajectory.energies_at(t).unwrap();
            let b = refined.trajectory.energies_at(t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12, "t = {t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn discharge_run_conserves_energy() {
        let (fleet, state, signal) = staggered();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let delivered = state.total_energy() - report.final_state.total_energy();
        let served = signal.positive_integral() - report.total_unserved;
        assert!((delivered - served).abs() <= 1e-9);
    }

    #[test]
    fn charging_respects_budget_and_fills_exactly() {
        // capacity 2, empty, charge limit 1, efficiency 0.5, surplus 4 MW
        // for 3 h: charges at the limit for 2 h (drawing 2 MW, spilling 2),
        // then spills everything once full.
        let fleet = Fleet::new(vec![Store {
            id: "s".into(),
            capacity: 2.0,
            max_discharge: 1.0,
            max_charge: 1.0,
            efficiency: 0.5,
        }]);
        let state = fleet.empty_state();
        let signal = StepSignal::constant(-4.0, 3.0).unwrap();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Combined, &config()).unwrap();

        let times: Vec<f64> = report.trajectory.points().iter().map(|p| p.time).collect();
        assert_eq!(times, vec![0.0, 2.0, 3.0]);
        assert_eq!(report.trajectory.points()[0].rates.0, vec![-1.0]);
        assert_eq!(report.trajectory.points()[1].energies, vec![2.0]);
        // 2 MW spilled while charging, 4 MW spilled when full
        assert_eq!(report.total_spilled, 2.0 * 2.0 + 4.0);
        assert_eq!(report.total_unserved, 0.0);
        assert_eq!(report.first_failure_time, None);
        assert_eq!(report.final_state.energies, vec![2.0]);
    }

    #[test]
    fn combined_run_charges_between_discharges() {
        let fleet = Fleet::new(vec![Store {
            id: "s".into(),
            capacity: 4.0,
            max_discharge: 2.0,
            max_charge: 2.0,
            efficiency: 1.0,
        }]);
        let state = FleetState::new(0.0, vec![2.0]);
        let signal = StepSignal::new(vec![0.0, 1.0, 2.0, 4.0], vec![2.0, -2.0, 3.0]).unwrap();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Combined, &config()).unwrap();
        let times: Vec<f64> = report.trajectory.points().iter().map(|p| p.time).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let pts = report.trajectory.points();
        assert_eq!(pts[0].rates.0, vec![2.0]); // discharge to empty
        assert_eq!(pts[1].energies, vec![0.0]);
        assert_eq!(pts[1].rates.0, vec![-2.0]); // absorb the surplus
        assert_eq!(pts[2].energies, vec![2.0]);
        assert_eq!(pts[2].rates.0, vec![2.0]); // rate-limited discharge
        assert_eq!(report.first_failure_time, Some(2.0));
        // 1 MW short on [2, 3), 3 MW short on [3, 4)
        assert_eq!(report.total_unserved, 4.0);
        assert_eq!(report.total_spilled, 0.0);
    }

    #[test]
    fn priority_policy_steps_through_depletions() {
        let (fleet, state, _) = staggered();
        let signal = StepSignal::constant(150.0, 4.0).unwrap();
        let policy = PolicyKind::PriorityGreedy(vec![0, 1, 2, 3, 4]);
        let report = simulate(&fleet, &state, &signal, &policy, &config()).unwrap();
        let times: Vec<f64> = report.trajectory.points().iter().map(|p| p.time).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0, 3.5, 4.0]);
        assert_eq!(report.total_unserved, 0.0);
        assert_eq!(
            report.final_state.energies,
            vec![0.0, 0.0, 0.0, 75.0, 225.0]
        );
    }

    #[test]
    fn event_count_is_modest_and_guard_trips_when_forced() {
        let (fleet, state, signal) = staggered();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        assert!(report.trajectory.points().len() <= 10);

        let tight = SimConfig {
            max_events: Some(2),
            ..SimConfig::default()
        };
        assert!(matches!(
            simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &tight),
            Err(SimError::EventOverflow(2))
        ));
    }

    #[test]
    fn trajectory_accessors_interpolate_exactly() {
        let (fleet, state, signal) = staggered();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let tr = &report.trajectory;
        // halfway through the first segment
        let e = tr.energies_at(0.5).unwrap();
        assert_eq!(e, vec![100.0, 150.0, 175.0, 175.0, 200.0]);
        assert_eq!(
            tr.rates_at(0.5).unwrap().0,
            vec![0.0, 0.0, 50.0, 50.0, 100.0]
        );
        // unserved accrues linearly over the failing last hour
        assert_eq!(tr.cumulative_unserved_at(3.0).unwrap(), 0.0);
        assert_eq!(tr.cumulative_unserved_at(3.5).unwrap(), 50.0);
        assert_eq!(tr.cumulative_unserved_at(4.0).unwrap(), 100.0);
        // outside the domain
        assert!(tr.energies_at(-0.1).is_none());
        assert!(tr.energies_at(4.1).is_none());
        // at the horizon the terminal point applies
        assert_eq!(tr.rates_at(4.0).unwrap().0, vec![0.0; 5]);
    }

    #[test]
    fn replaying_a_trajectory_reproduces_it() {
        let (fleet, state, signal) = staggered();
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let schedule = report.trajectory.to_schedule();
        let replay = replay_schedule(&fleet, &state, &signal, &schedule, &config()).unwrap();
        assert_eq!(replay.total_unserved, report.total_unserved);
        assert_eq!(replay.total_spilled, report.total_spilled);
        assert_eq!(replay.final_state.energies, report.final_state.energies);
        assert_eq!(replay.first_failure_time, report.first_failure_time);
    }

    #[test]
    fn replay_rejects_infeasible_schedules() {
        let (fleet, state, signal) = staggered();
        // drain store 1 for 2 h: it only holds 1 h of energy
        let schedule = RateSchedule::new(
            vec![0.0, 2.0],
            vec![RateVector(vec![100.0, 0.0, 0.0, 0.0, 0.0])],
        )
        .unwrap();
        assert!(matches!(
            replay_schedule(&fleet, &state, &signal, &schedule, &config()),
            Err(SimError::Model(ModelError::EnergyOutOfBounds { .. }))
        ));
        // wrong arity
        let skinny = RateSchedule::new(vec![0.0, 4.0], vec![RateVector(vec![1.0])]).unwrap();
        assert!(matches!(
            replay_schedule(&fleet, &state, &signal, &skinny, &config()),
            Err(SimError::ScheduleArity { want: 5, got: 1 })
        ));
    }

    #[test]
    fn rate_schedule_validation() {
        assert!(RateSchedule::new(vec![0.0], vec![]).is_err());
        assert!(RateSchedule::new(vec![0.0, 0.0], vec![RateVector(vec![1.0])]).is_err());
        assert!(RateSchedule::new(
            vec![0.0, 1.0, 2.0],
            vec![RateVector(vec![1.0]), RateVector(vec![1.0, 2.0])]
        )
        .is_err());
        let s = RateSchedule::new(vec![0.0, 1.0], vec![RateVector(vec![3.0, -1.0])]).unwrap();
        assert_eq!(s.rates_at(0.5).0, vec![3.0, -1.0]);
        assert_eq!(s.rates_at(1.0).0, vec![0.0, 0.0]);
        assert_eq!(s.rates_at(-0.5).0, vec![0.0, 0.0]);
    }

    #[test]
    fn restarting_mid_run_reproduces_the_tail() {
        let (fleet, state, signal) = staggered();
        let full = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        for &split in &[0.8, 1.0, 2.6] {
            let mid = FleetState::new(split, full.trajectory.energies_at(split).unwrap());
            let tail = simulate(&fleet, &mid, &signal, &PolicyKind::Ggddf, &config()).unwrap();
            for &t in &[split, 2.9, 3.3, 4.0] {
                if t < split {
                    continue;
                }
                let a = full.trajectory.energies_at(t).unwrap();
                let b = tail.trajectory.energies_at(t).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-9, "split {split}, t = {t}: {x} vs {y}");
                }
            }
            let tail_unserved =
                full.total_unserved - full.trajectory.cumulative_unserved_at(split).unwrap();
            assert!((tail.total_unserved - tail_unserved).abs() <= 1e-9);
        }
    }

    #[test]
    fn reverse_ggddf_matches_its_mirror_and_stays_feasible() {
        let (fleet, state, signal) = staggered();
        let forward = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let reverse = simulate(
            &fleet,
            &state,
            &signal,
            &PolicyKind::ReverseGgddf,
            &config(),
        )
        .unwrap();
        // mirroring preserves the unserved integral, so on this instance the
        // reverse plan is exactly as good as forward GGDDF (both optimal)
        assert!((reverse.total_unserved - forward.total_unserved).abs() <= 1e-9);
        // and it can never beat the transform bound
        let bound = min_unserved_energy(&fleet, &state, &signal, 4.0, 1e-9).unwrap();
        assert!(reverse.total_unserved >= bound - 1e-9);
        // energies stay inside the box the whole way
        for p in reverse.trajectory.points() {
            for (s, &e) in fleet.stores.iter().zip(&p.energies) {
                assert!(e >= -1e-9 && e <= s.capacity + 1e-9);
            }
        }
    }

    #[test]
    fn reverse_ggddf_differs_from_forward_on_increasing_demand() {
        // One store, increasing demand it cannot fully serve: forward GGDDF
        // spends everything early; the reverse plan saves energy for the
        // expensive tail... both serve the same energy here, but the failure
        // time moves.
        let fleet = Fleet::new(vec![Store::discharge_only("s", 2.0, 2.0)]);
        let state = fleet.full_state();
        let signal = StepSignal::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let forward = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        let reverse = simulate(
            &fleet,
            &state,
            &signal,
            &PolicyKind::ReverseGgddf,
            &config(),
        )
        .unwrap();
        // forward serves 1 MWh then 1 MWh of the 2 MW hour; 1 MWh unserved
        assert!((forward.total_unserved - 1.0).abs() <= 1e-9);
        assert!((reverse.total_unserved - 1.0).abs() <= 1e-9);
        // reverse dedicates everything to the tail and fails from the start
        assert_eq!(reverse.first_failure_time, Some(0.0));
        assert_eq!(forward.first_failure_time, Some(1.5));
    }

    #[test]
    fn micro_step_euler_reference_agrees() {
        // independent fixed-step integrator: allocate, hold for dt, repeat
        let fleet = two_way_fleet();
        let initial = FleetState::new(0.0, vec![3.0, 5.0, 2.0]);
        let signal =
            StepSignal::new(vec![0.0, 1.5, 3.0, 4.5, 6.0], vec![4.0, -3.0, 6.0, -1.0]).unwrap();
        let exact = simulate(&fleet, &initial, &signal, &PolicyKind::Combined, &config()).unwrap();

        let dt = 1e-4;
        let mut state = initial.clone();
        let mut unserved = 0.0;
        let mut spilled = 0.0;
        let steps = (signal.horizon() / dt).round() as usize;
        for k in 0..steps {
            let t = k as f64 * dt;
            let d = signal.value_at(t);
            let alloc = crate::policies::combined_allocate(&fleet, &state, d, 1e-9).unwrap();
            unserved += alloc.unserved * dt;
            spilled += alloc.spilled * dt;
            for (i, e) in state.energies.iter_mut().enumerate() {
                *e -= alloc.rates[i] * dt;
                // Euler overshoots bounds by up to rate * dt; clamp so the
                // next allocation sees a legal state
                *e = e.clamp(0.0, fleet.stores[i].capacity);
            }
            state.time = t + dt;
        }
        // every event the fixed-step run mistimes by up to dt contributes
        // at most (demand + fleet power) * dt of accounting error
        let tol = 100.0 * dt * (fleet.total_discharge_power() + 6.0);
        assert!(
            (exact.total_unserved - unserved).abs() <= tol,
            "unserved {} vs euler {unserved}",
            exact.total_unserved
        );
        assert!(
            (exact.total_spilled - spilled).abs() <= tol,
            "spilled {} vs euler {spilled}",
            exact.total_spilled
        );
        for (i, (&a, &b)) in exact
            .final_state
            .energies
            .iter()
            .zip(&state.energies)
            .enumerate()
        {
            assert!((a - b).abs() <= tol, "store {i}: {a} vs {b}");
        }
    }

    #[test]
    fn degenerate_and_invalid_runs() {
        let (fleet, mut state, signal) = staggered();
        // starting at the horizon yields an empty run
        state.time = 4.0;
        let report = simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()).unwrap();
        assert_eq!(report.trajectory.points().len(), 1);
        assert_eq!(report.total_unserved, 0.0);
        // starting outside the domain is an error
        state.time = 5.0;
        assert!(matches!(
            simulate(&fleet, &state, &signal, &PolicyKind::Ggddf, &config()),
            Err(SimError::StartOutsideSignal { .. })
        ));
        // broken state arity
        let bad = FleetState::new(0.0, vec![1.0]);
        assert!(matches!(
            simulate(&fleet, &bad, &signal, &PolicyKind::Ggddf, &config()),
            Err(SimError::InvalidState(_))
        ));
    }

    #[test]
    fn prefix_runs_match_full_runs() {
        let (fleet, state, signal) = staggered();
        // splits at an event, between events, and just before the horizon
        for t_split in [2.0, 1.7, 3.9] {
            assert!(simulate_prefix_equivalence(
                &fleet,
                &state,
                &signal,
                &PolicyKind::Ggddf,
                t_split,
                &config()
            )
            .unwrap());
        }

        let fleet = two_way_fleet();
        let state = FleetState::new(0.0, vec![3.0, 5.0, 1.0]);
        let signal = StepSignal::new(vec![0.0, 1.0, 2.5, 4.0], vec![4.0, -3.0, 5.0]).unwrap();
        assert!(simulate_prefix_equivalence(
            &fleet,
            &state,
            &signal,
            &PolicyKind::Combined,
            2.2,
            &config()
        )
        .unwrap());

        assert!(matches!(
            simulate_prefix_equivalence(
                &fleet,
                &state,
                &signal,
                &PolicyKind::ReverseGgddf,
                2.2,
                &config()
            ),
            Err(SimError::Policy(PolicyError::OfflinePolicy(_)))
        ));
    }
}
