//! Core fleet model: stores, fleet state, rate vectors and step signals.
//!
//! Units are fixed throughout the crate: energy in MWh, power in MW, time in
//! hours. Sign convention for rates: positive discharges (delivers power to
//! the external system), negative charges.
//!
//! Stored energy is *usable-output* energy: a store holding `E` MWh can
//! deliver exactly `E` MWh downstream. Conversion losses are charged on the
//! way in — charging at internal rate `c` MW draws `c / efficiency` MW from
//! the external system (see [`external_power`]).

use thiserror::Error;

/// Errors from model-level operations.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("store {store}: rate {rate} MW outside [{lo}, {hi}] MW")]
    RateOutOfBounds {
        store: String,
        rate: f64,
        lo: f64,
        hi: f64,
    },
    #[error("store {store}: energy {energy} MWh outside [0, {capacity}] MWh")]
    EnergyOutOfBounds {
        store: String,
        energy: f64,
        capacity: f64,
    },
    #[error("expected {want} entries, got {got}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("time step must be finite and nonnegative, got {0}")]
    NegativeTimeStep(f64),
    #[error("signal needs at least two breakpoints")]
    SignalTooShort,
    #[error("signal breakpoints must be strictly increasing and finite (index {0})")]
    SignalNotIncreasing(usize),
    #[error("signal values must be finite (index {0})")]
    SignalValueNotFinite(usize),
    #[error("signal must have exactly one value per segment ({breakpoints} breakpoints, {values} values)")]
    SignalShape { breakpoints: usize, values: usize },
    #[error("window [{t0}, {t1}] is not contained in the signal domain [{start}, {end}]")]
    WindowOutOfRange {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },
}

/// A single energy store.
#[derive(Debug, Clone, PartialEq)]
pub struct Store {
    /// Identifier used in configs, CSV output and error messages.
    pub id: String,
    /// Energy capacity in MWh (>= 0).
    pub capacity: f64,
    /// Maximum discharge rate in MW (>= 0).
    pub max_discharge: f64,
    /// Maximum internal charge rate in MW (>= 0).
    pub max_charge: f64,
    /// Conversion efficiency in (0, 1]. Losses apply when charging only.
    pub efficiency: f64,
}

impl Store {
    /// Store that can discharge at `max_discharge` but never charge,
    /// with efficiency 1. Handy for pure-discharge setups.
    pub fn discharge_only(id: impl Into<String>, capacity: f64, max_discharge: f64) -> Self {
        Store {
            id: id.into(),
            capacity,
            max_discharge,
            max_charge: 0.0,
            efficiency: 1.0,
        }
    }

    /// Time to empty from `energy` at full discharge rate, in hours.
    ///
    /// Returns 0 for a store that holds nothing and +inf for a store that
    /// holds energy but cannot discharge.
    pub fn discharge_duration(&self, energy: f64) -> f64 {
        if self.max_discharge > 0.0 {
            energy / self.max_discharge
        } else if energy > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Time to fill the remaining headroom at full charge rate, in hours.
    pub fn charge_duration(&self, energy: f64) -> f64 {
        let headroom = self.capacity - energy;
        if self.max_charge > 0.0 {
            headroom / self.max_charge
        } else if headroom > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// An ordered collection of stores. Order is significant: states, rate
/// vectors and CSV columns index stores by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fleet {
    pub stores: Vec<Store>,
}

impl Fleet {
    pub fn new(stores: Vec<Store>) -> Self {
        Fleet { stores }
    }

    pub fn len(&self) -> usize {
        self.stores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }

    /// Sum of all maximum discharge rates, MW.
    pub fn total_discharge_power(&self) -> f64 {
        self.stores.iter().map(|s| s.max_discharge).sum()
    }

    /// Sum of all maximum internal charge rates, MW.
    pub fn total_charge_power(&self) -> f64 {
        self.stores.iter().map(|s| s.max_charge).sum()
    }

    /// Sum of all capacities, MWh.
    pub fn total_capacity(&self) -> f64 {
        self.stores.iter().map(|s| s.capacity).sum()
    }

    /// State with every store at capacity, at time 0.
    pub fn full_state(&self) -> FleetState {
        FleetState {
            time: 0.0,
            energies: self.stores.iter().map(|s| s.capacity).collect(),
        }
    }

    /// State with every store empty, at time 0.
    pub fn empty_state(&self) -> FleetState {
        FleetState {
            time: 0.0,
            energies: vec![0.0; self.stores.len()],
        }
    }

    /// The shared efficiency if all stores agree within `eps`, else `None`.
    pub fn common_efficiency(&self, eps: f64) -> Option<f64> {
        let first = self.stores.first()?.efficiency;
        if self
            .stores
            .iter()
            .all(|s| (s.efficiency - first).abs() <= eps)
        {
            Some(first)
        } else {
            None
        }
    }
}

/// A snapshot of the fleet: time plus one energy level per store.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    /// Time of the snapshot, hours.
    pub time: f64,
    /// Stored energy per store, MWh, indexed like `Fleet::stores`.
    pub energies: Vec<f64>,
}

impl FleetState {
    pub fn new(time: f64, energies: Vec<f64>) -> Self {
        FleetState { time, energies }
    }

    /// Total stored energy, MWh.
    pub fn total_energy(&self) -> f64 {
        self.energies.iter().sum()
    }
}

/// Instantaneous rates, MW, one per store. Positive = discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn zeros(n: usize) -> Self {
        RateVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of internal rates, MW (not the external balance; see
    /// [`external_power`] for the loss-adjusted view).
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Power seen by the external system for one store running at internal
/// `rate`: discharging delivers at face value, charging at internal rate `c`
/// draws `c / efficiency` from outside. The result carries the sign of the
/// rate.
pub fn external_power(store: &Store, rate: f64) -> f64 {
    if rate >= 0.0 {
        rate
    } else {
        rate / store.efficiency
    }
}

/// Sum of [`external_power`] across the fleet for one rate vector.
pub fn external_power_total(fleet: &Fleet, rates: &RateVector) -> f64 {
    fleet
        .stores
        .iter()
        .zip(rates.0.iter())
        .map(|(s, &r)| external_power(s, r))
        .sum()
}

/// One invariant violation found by [`validate_fleet`] or [`validate_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Id of the offending store, or `None` for fleet-level problems.
    pub store: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.store {
            Some(id) => write!(f, "store {id}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Checks every store and fleet invariant; the result is empty exactly when
/// they all hold. Zero-capacity stores are legal and do not appear here —
/// see [`fleet_warnings`].
pub fn validate_fleet(fleet: &Fleet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    if fleet.stores.is_empty() {
        out.push(Violation {
            store: None,
            message: "fleet must contain at least one store".into(),
        });
    }
    for s in &fleet.stores {
        let mut bad = |msg: String| {
            out.push(Violation {
                store: Some(s.id.clone()),
                message: msg,
            })
        };
        if s.id.is_empty() {
            bad("id must be non-empty".into());
        }
        if !s.capacity.is_finite() || s.capacity < 0.0 {
            bad(format!(
                "capacity must be finite and >= 0, got {}",
                s.capacity
            ));
        }
        if !s.max_discharge.is_finite() || s.max_discharge <= 0.0 {
            bad(format!(
                "max_discharge must be positive, got {}",
                s.max_discharge
            ));
        }
        if !s.max_charge.is_finite() || s.max_charge < 0.0 {
            bad(format!(
                "max_charge must be finite and >= 0, got {}",
                s.max_charge
            ));
        }
        if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
            bad(format!(
                "efficiency must lie in (0, 1], got {}",
                s.efficiency
            ));
        }
    }
    for s in &fleet.stores {
        if !seen.insert(s.id.as_str()) {
            out.push(Violation {
                store: Some(s.id.clone()),
                message: "duplicate store id".into(),
            });
            // report each duplicate id once
            seen.insert(s.id.as_str());
        }
    }
    out
}

/// Non-fatal oddities worth surfacing to users: currently stores with zero
/// capacity, which are legal but permanently empty (and permanently full).
pub fn fleet_warnings(fleet: &Fleet) -> Vec<String> {
    let mut out = Vec::new();
    for s in &fleet.stores {
        if s.capacity == 0.0 {
            out.push(format!("store {}: capacity is 0 MWh", s.id));
        }
    }
    out
}

/// Checks a state against a fleet: matching length and every energy within
/// `[-eps, capacity + eps]`.
pub fn validate_state(fleet: &Fleet, state: &FleetState, eps: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if state.energies.len() != fleet.len() {
        out.push(Violation {
            store: None,
            message: format!(
                "state has {} energies, fleet has {} stores",
                state.energies.len(),
                fleet.len()
            ),
        });
        return out;
    }
    for (s, &e) in fleet.stores.iter().zip(&state.energies) {
        if !e.is_finite() || e < -eps || e > s.capacity + eps {
            out.push(Violation {
                store: Some(s.id.clone()),
                message: format!("energy {} MWh outside [0, {}] MWh", e, s.capacity),
            });
        }
    }
    out
}

/// Advances a state by `dt` hours under constant `rates`.
///
/// Enforces the rate box `-max_charge <= r <= max_discharge` and the energy
/// box `[0, capacity]` on the result, both within `eps`; energies are not
/// clamped, so exact conservation holds: `E' = E - r * dt`.
pub fn apply_rates(
    fleet: &Fleet,
    state: &FleetState,
    rates: &RateVector,
    dt: f64,
    eps: f64,
) -> Result<FleetState, ModelError> {
    if rates.len() != fleet.len() {
        return Err(ModelError::DimensionMismatch {
            want: fleet.len(),
            got: rates.len(),
        });
    }
    if state.energies.len() != fleet.len() {
        return Err(ModelError::DimensionMismatch {
            want: fleet.len(),
            got: state.energies.len(),
        });
    }
    if !dt.is_finite() || dt < 0.0 {
        return Err(ModelError::NegativeTimeStep(dt));
    }
    let mut energies = Vec::with_capacity(fleet.len());
    for (i, s) in fleet.stores.iter().enumerate() {
        let r = rates[i];
        if r > s.max_discharge + eps || r < -s.max_charge - eps {
            return Err(ModelError::RateOutOfBounds {
                store: s.id.clone(),
                rate: r,
                lo: -s.max_charge,
                hi: s.max_discharge,
            });
        }
        let e = state.energies[i] - r * dt;
        if e < -eps || e > s.capacity + eps {
            return Err(ModelError::EnergyOutOfBounds {
                store: s.id.clone(),
                energy: e,
                capacity: s.capacity,
            });
        }
        energies.push(e);
    }
    Ok(FleetState {
        time: state.time + dt,
        energies,
    })
}

/// A piecewise-constant signal of time: `values[k]` holds on the right-open
/// segment `[breakpoints[k], breakpoints[k+1])`. Positive values are demand
/// the fleet should serve; negative values are surplus it may absorb.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSignal {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepSignal {
    /// Builds a signal from `n+1` strictly increasing breakpoints and `n`
    /// segment values.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if breakpoints.len() < 2 {
            return Err(ModelError::SignalTooShort);
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(ModelError::SignalShape {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() || w[1] <= w[0] {
                return Err(ModelError::SignalNotIncreasing(i + 1));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::SignalValueNotFinite(i));
            }
        }
        Ok(StepSignal {
            breakpoints,
            values,
        })
    }

    /// Constant signal on `[0, horizon)`.
    pub fn constant(value: f64, horizon: f64) -> Result<Self, ModelError> {
        StepSignal::new(vec![0.0, horizon], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    /// End of the last segment, hours.
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn num_segments(&self) -> usize {
        self.values.len()
    }

    /// Value at time `t` with right-open semantics; 0 outside the domain.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.segment_index_at(t) {
            Some(k) => self.values[k],
            None => 0.0,
        }
    }

    /// Index of the segment containing `t`, if `start <= t < horizon`.
    pub fn segment_index_at(&self, t: f64) -> Option<usize> {
        if t < self.start() || t >= self.horizon() {
            return None;
        }
        // partition_point: first breakpoint > t, minus one = segment start.
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Some(k - 1)
    }

    /// First breakpoint strictly after `t`, if any.
    pub fn next_breakpoint_after(&self, t: f64) -> Option<f64> {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.breakpoints.get(k).copied()
    }

    /// The signal restricted to `[t0, t1]`, with new boundary breakpoints.
    pub fn restricted(&self, t0: f64, t1: f64) -> Result<StepSignal, ModelError> {
        if t0 < self.start() || t1 > self.horizon() || t0 >= t1 {
            return Err(ModelError::WindowOutOfRange {
                t0,
                t1,
                start: self.start(),
                end: self.horizon(),
            });
        }
        let mut bps = vec![t0];
        let mut vals = vec![self.value_at(t0)];
        for (k, &b) in self.breakpoints.iter().enumerate() {
            if b > t0 && b < t1 {
                bps.push(b);
                vals.push(self.values[k]);
            }
        }
        bps.push(t1);
        StepSignal::new(bps, vals)
    }

    /// The signal mirrored in time about the midpoint of its domain:
    /// the result takes value `self(start + horizon - t)` at `t` (up to the
    /// measure-zero segment boundaries).
    pub fn reversed(&self) -> StepSignal {
        let a = self.start();
        let b = self.horizon();
        let mut bps: Vec<f64> = self.breakpoints.iter().map(|&t| a + b - t).collect();
        bps.reverse();
        let mut vals = self.values.clone();
        vals.reverse();
        StepSignal {
            breakpoints: bps,
            values: vals,
        }
    }

    /// Same signal with extra breakpoints inserted (values unchanged).
    /// Points outside the domain or duplicating an existing breakpoint
    /// (within `eps`) are ignored.
    pub fn refined(&self, extra: &[f64], eps: f64) -> StepSignal {
        let mut bps = self.breakpoints.clone();
        for &t in extra {
            if t <= self.start() || t >= self.horizon() {
                continue;
            }
            if bps.iter().any(|&b| (b - t).abs() <= eps) {
                continue;
            }
            bps.push(t);
        }
        bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut vals = Vec::with_capacity(bps.len() - 1);
        for w in bps.windows(2) {
            vals.push(self.value_at(w[0]));
        }
        StepSignal {
            breakpoints: bps,
            values: vals,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self, eps: f64) -> bool {
        self.values.iter().all(|&v| v >= -eps)
    }

    pub fn is_weakly_decreasing(&self, eps: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + eps)
    }

    pub fn is_weakly_increasing(&self, eps: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - eps)
    }

    /// Integral of the positive part over the whole domain, MWh.
    pub fn positive_integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[1] - w[0]) * v.max(0.0))
            .sum()
    }

    /// Integral of the signal over the whole domain, MWh (signed).
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[1] - w[0]) * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_fleet() -> Fleet {
        Fleet::new(vec![
            Store {
                id: "a".into(),
                capacity: 100.0,
                max_discharge: 100.0,
                max_charge: 50.0,
                efficiency: 0.8,
            },
            Store::discharge_only("b", 150.0, 100.0),
        ])
    }

    #[test]
    fn durations_handle_zero_power() {
        let s = Store::discharge_only("x", 10.0, 0.0);
        assert_eq!(s.discharge_duration(5.0), f64::INFINITY);
        assert_eq!(s.discharge_duration(0.0), 0.0);
        let s2 = Store {
            max_charge: 0.0,
            ..Store::discharge_only("y", 10.0, 1.0)
        };
        assert_eq!(s2.charge_duration(4.0), f64::INFINITY);
        assert_eq!(s2.charge_duration(10.0), 0.0);
    }

    #[test]
    fn external_power_charging_draws_more() {
        let fleet = demo_fleet();
        // charging at internal 4 MW with efficiency 0.8 draws 5 MW
        assert_eq!(external_power(&fleet.stores[0], -4.0), -5.0);
        assert_eq!(external_power(&fleet.stores[0], 4.0), 4.0);
        let rates = RateVector(vec![-4.0, 10.0]);
        assert!((external_power_total(&fleet, &rates) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn validate_fleet_reports_each_broken_invariant() {
        let mut fleet = demo_fleet();
        assert!(validate_fleet(&fleet).is_empty());
        fleet.stores[0].efficiency = 0.0;
        fleet.stores[1].capacity = -1.0;
        fleet.stores.push(Store {
            id: "a".into(), // duplicate
            capacity: 1.0,
            max_discharge: f64::NAN,
            max_charge: 1.0,
            efficiency: 1.0,
        });
        let v = validate_fleet(&fleet);
        assert_eq!(v.len(), 4, "violations: {v:?}");

        let empty = Fleet::new(vec![]);
        let v = validate_fleet(&empty);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("at least one store"));

        let mut idle = demo_fleet();
        idle.stores[1].max_discharge = 0.0;
        let v = validate_fleet(&idle);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("max_discharge must be positive"));
    }

    #[test]
    fn zero_capacity_is_legal_but_warns() {
        let fleet = Fleet::new(vec![Store::discharge_only("z", 0.0, 5.0)]);
        assert!(validate_fleet(&fleet).is_empty());
        assert_eq!(fleet_warnings(&fleet).len(), 1);
    }

    #[test]
    fn apply_rates_conserves_and_checks_bounds() {
        let fleet = demo_fleet();
        let s0 = fleet.full_state();
        let next = apply_rates(&fleet, &s0, &RateVector(vec![10.0, 0.0]), 2.0, 1e-9).unwrap();
        assert_eq!(next.time, 2.0);
        assert_eq!(next.energies, vec![80.0, 150.0]);

        // discharge above the limit
        let err = apply_rates(&fleet, &s0, &RateVector(vec![100.1, 0.0]), 1.0, 1e-9);
        assert!(matches!(err, Err(ModelError::RateOutOfBounds { .. })));
        // store b cannot charge at all
        let err = apply_rates(&fleet, &s0, &RateVector(vec![0.0, -1.0]), 1.0, 1e-9);
        assert!(matches!(err, Err(ModelError::RateOutOfBounds { .. })));
        // would overdraw store a
        let err = apply_rates(&fleet, &s0, &RateVector(vec![100.0, 0.0]), 1.5, 1e-9);
        assert!(matches!(err, Err(ModelError::EnergyOutOfBounds { .. })));
        // wrong arity
        let err = apply_rates(&fleet, &s0, &RateVector(vec![1.0]), 1.0, 1e-9);
        assert!(matches!(err, Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn step_signal_lookup_is_right_open() {
        let sig = StepSignal::new(vec![0.0, 2.0, 3.0, 4.0], vec![200.0, 500.0, 100.0]).unwrap();
        assert_eq!(sig.value_at(0.0), 200.0);
        assert_eq!(sig.value_at(1.999_999), 200.0);
        assert_eq!(sig.value_at(2.0), 500.0);
        assert_eq!(sig.value_at(3.0), 100.0);
        assert_eq!(sig.value_at(4.0), 0.0); // horizon itself is outside
        assert_eq!(sig.value_at(-0.5), 0.0);
        assert_eq!(sig.next_breakpoint_after(0.0), Some(2.0));
        assert_eq!(sig.next_breakpoint_after(2.0), Some(3.0));
        assert_eq!(sig.next_breakpoint_after(4.0), None);
        assert_eq!(sig.segment_index_at(2.5), Some(1));
    }

    #[test]
    fn step_signal_validation() {
        assert!(matches!(
            StepSignal::new(vec![0.0], vec![]),
            Err(ModelError::SignalTooShort)
        ));
        assert!(matches!(
            StepSignal::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0]),
            Err(ModelError::SignalNotIncreasing(_))
        ));
        assert!(matches!(
            StepSignal::new(vec![0.0, 1.0], vec![1.0, 2.0]),
            Err(ModelError::SignalShape { .. })
        ));
        assert!(matches!(
            StepSignal::new(vec![0.0, 1.0], vec![f64::NAN]),
            Err(ModelError::SignalValueNotFinite(0))
        ));
    }

    #[test]
    fn restriction_and_reversal() {
        let sig = StepSignal::new(vec![0.0, 2.0, 3.0, 4.0], vec![200.0, 500.0, 100.0]).unwrap();
        let win = sig.restricted(1.0, 3.5).unwrap();
        assert_eq!(win.breakpoints(), &[1.0, 2.0, 3.0, 3.5]);
        assert_eq!(win.values(), &[200.0, 500.0, 100.0]);
        assert!(sig.restricted(-1.0, 2.0).is_err());

        let rev = sig.reversed();
        assert_eq!(rev.breakpoints(), &[0.0, 1.0, 2.0, 4.0]);
        assert_eq!(rev.values(), &[100.0, 500.0, 200.0]);
        // reversing twice restores the original
        assert_eq!(rev.reversed(), sig);
        // mirror identity at segment interiors
        for &t in &[0.5, 1.5, 2.5, 3.5] {
            assert_eq!(rev.value_at(t), sig.value_at(4.0 - t - 1e-12));
        }
    }

    #[test]
    fn refinement_keeps_values() {
        let sig = StepSignal::new(vec![0.0, 2.0, 4.0], vec![5.0, -3.0]).unwrap();
        let fine = sig.refined(&[1.0, 2.0, 3.0, 7.0], 1e-9);
        assert_eq!(fine.breakpoints(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fine.values(), &[5.0, 5.0, -3.0, -3.0]);
        assert_eq!(fine.integral(), sig.integral());
        assert_eq!(fine.positive_integral(), 10.0);
    }

    #[test]
    fn signal_shape_predicates() {
        let dec = StepSignal::new(vec![0.0, 1.0, 2.0], vec![5.0, 3.0]).unwrap();
        assert!(dec.is_weakly_decreasing(0.0));
        assert!(!dec.is_weakly_increasing(0.0));
        assert!(dec.is_nonnegative(0.0));
        let mixed = StepSignal::new(vec![0.0, 1.0, 2.0], vec![-1.0, 3.0]).unwrap();
        assert!(!mixed.is_nonnegative(1e-9));
        assert_eq!(mixed.integral(), 2.0);
        assert_eq!(mixed.positive_integral(), 3.0);
    }
}
