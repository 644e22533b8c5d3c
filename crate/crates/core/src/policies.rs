//! Dispatch policies: which stores run, and how hard, at each instant.
//!
//! The two central policies pick stores by *duration*. GGDDF (greedy
//! greatest-discharge-duration-first) serves demand from the stores that can
//! sustain their full rate the longest: stores are grouped by equal discharge
//! duration `E_i / max_discharge_i`, groups are selected longest-first at
//! full rate, and the last selected group runs at a uniform fraction of its
//! rate limits so the total matches the demand. GGCDF mirrors this for
//! charging, ranking by time-to-fill and capping the total external draw at
//! the available surplus. `Combined` applies GGDDF to demand and GGCDF to
//! surplus. Two baselines are included for comparison: a fixed-priority
//! greedy and the offline time-reversed variant of GGDDF.

use crate::model::{Fleet, FleetState, RateVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("GGCDF needs one shared efficiency, fleet mixes {0} and {1}")]
    MixedEfficiency(f64, f64),
    #[error("priority order must be a permutation of 0..{expected}, got {got:?}")]
    InvalidPriorityOrder { expected: usize, got: Vec<usize> },
    #[error("{0} is an offline policy and cannot allocate from instantaneous state")]
    OfflinePolicy(&'static str),
}

/// Selects a dispatch policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Greedy greatest-discharge-duration-first. Ignores surplus (spills it).
    Ggddf,
    /// Greedy greatest-charge-duration-first. Ignores demand (leaves it unserved).
    Ggcdf,
    /// GGDDF while demand is nonnegative, GGCDF on surplus.
    Combined,
    /// Run stores at full rate in a fixed index order, discharge only.
    PriorityGreedy(Vec<usize>),
    /// GGDDF applied to the time-reversed demand, replayed forwards.
    /// Offline: usable via [`reverse_ggddf_plan`] or the simulator, but not
    /// for instantaneous allocation.
    ReverseGgddf,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Ggddf => write!(f, "ggddf"),
            PolicyKind::Ggcdf => write!(f, "ggcdf"),
            PolicyKind::Combined => write!(f, "combined"),
            PolicyKind::PriorityGreedy(order) => {
                let order: Vec<String> = order.iter().map(|i| i.to_string()).collect();
                write!(f, "priority:{}", order.join(","))
            }
            PolicyKind::ReverseGgddf => write!(f, "reverse-ggddf"),
        }
    }
}

/// One instant's dispatch decision. All fields are powers in MW.
///
/// Accounting identities hold exactly by construction:
/// with demand `d >= 0`, `served + unserved == d` and `spilled == 0`;
/// with surplus (`d < 0`), `served` is minus the absorbed external power,
/// `-served + spilled == -d` and `unserved == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: RateVector,
    /// External power delivered (MW); negative when absorbing surplus.
    pub served: f64,
    /// Demand left unserved right now, MW.
    pub unserved: f64,
    /// Surplus left unabsorbed right now, MW.
    pub spilled: f64,
}

/// A maximal run of stores whose durations coincide within the grouping
/// tolerance, as used by GGDDF/GGCDF. Groups are ordered longest-first.
///
/// Members admitted within the tolerance are treated as one unit from then
/// on: they all run at the same `lambda` fraction of their rate limits, which
/// freezes their (tiny) duration differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationGroup {
    /// Representative duration (the longest member's), hours.
    pub duration: f64,
    /// Sum of the members' rate limits, MW.
    pub power: f64,
    /// Store indices, longest duration first (ties by index).
    pub members: Vec<usize>,
    /// Fraction of the rate limit every member runs at, in [0, 1].
    pub lambda: f64,
}

/// Groups the dischargeable stores (positive rate limit, energy above `eps`)
/// by discharge duration, longest first. Adjacent durations within `eps`
/// chain into one group. All `lambda`s are 0.
pub fn discharge_groups(fleet: &Fleet, energies: &[f64], eps: f64) -> Vec<DurationGroup> {
    let items = fleet
        .stores
        .iter()
        .enumerate()
        .filter(|(i, s)| s.max_discharge > 0.0 && energies[*i] > eps)
        .map(|(i, s)| (i, energies[i] / s.max_discharge, s.max_discharge));
    build_groups(items, eps)
}

/// Groups the chargeable stores (positive charge limit, headroom above `eps`)
/// by charge duration (time to fill), longest first.
pub fn charge_groups(fleet: &Fleet, energies: &[f64], eps: f64) -> Vec<DurationGroup> {
    let items = fleet
        .stores
        .iter()
        .enumerate()
        .filter(|(i, s)| s.max_charge > 0.0 && s.capacity - energies[*i] > eps)
        .map(|(i, s)| (i, (s.capacity - energies[i]) / s.max_charge, s.max_charge));
    build_groups(items, eps)
}

fn build_groups(items: impl Iterator<Item = (usize, f64, f64)>, eps: f64) -> Vec<DurationGroup> {
    let mut items: Vec<(usize, f64, f64)> = items.collect();
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut groups: Vec<DurationGroup> = Vec::new();
    let mut prev_duration = f64::INFINITY;
    for (i, d, p) in items {
        let joins = match groups.last() {
            Some(_) => prev_duration - d <= eps,
            None => false,
        };
        if joins {
            let g = groups.last_mut().unwrap();
            g.power += p;
            g.members.push(i);
        } else {
            groups.push(DurationGroup {
                duration: d,
                power: p,
                members: vec![i],
                lambda: 0.0,
            });
        }
        prev_duration = d;
    }
    groups
}

/// Spends `budget` MW over the groups in order: full rate while it lasts,
/// a fractional rate on the boundary group, nothing after. Returns the
/// unspent remainder (0 unless the budget exceeds the total group power).
fn assign_lambdas(groups: &mut [DurationGroup], budget: f64) -> f64 {
    let mut remaining = budget;
    for g in groups.iter_mut() {
        if remaining <= 0.0 {
            g.lambda = 0.0;
        } else if remaining >= g.power {
            g.lambda = 1.0;
            remaining -= g.power;
        } else {
            g.lambda = remaining / g.power;
            remaining = 0.0;
        }
    }
    remaining.max(0.0)
}

/// GGDDF allocation with the duration-group structure it used.
///
/// Negative demand is treated as 0 (the surplus shows up as `spilled`).
///
/// # Panics
/// Panics if `state.energies` does not match the fleet size.
pub fn ggddf_allocate_grouped(
    fleet: &Fleet,
    state: &FleetState,
    demand: f64,
    eps: f64,
) -> (Allocation, Vec<DurationGroup>) {
    assert_eq!(
        state.energies.len(),
        fleet.len(),
        "state/fleet size mismatch"
    );
    let d = demand.max(0.0);
    let spill = (-demand).max(0.0);
    let mut groups = discharge_groups(fleet, &state.energies, eps);
    let total: f64 = groups.iter().map(|g| g.power).sum();
    let mut rates = vec![0.0; fleet.len()];
    let (served, unserved) = if d >= total {
        for g in groups.iter_mut() {
            g.lambda = 1.0;
        }
        (total, d - total)
    } else {
        assign_lambdas(&mut groups, d);
        (d, 0.0)
    };
    for g in &groups {
        if g.lambda > 0.0 {
            for &i in &g.members {
                rates[i] = g.lambda * fleet.stores[i].max_discharge;
            }
        }
    }
    (
        Allocation {
            rates: RateVector(rates),
            served,
            unserved,
            spilled: spill,
        },
        groups,
    )
}

/// GGDDF: serve `demand` from the longest-duration stores first.
/// See [`ggddf_allocate_grouped`] for the grouped variant.
pub fn ggddf_allocate(fleet: &Fleet, state: &FleetState, demand: f64, eps: f64) -> Allocation {
    ggddf_allocate_grouped(fleet, state, demand, eps).0
}

/// GGCDF allocation with the charge-duration group structure it used.
///
/// `surplus` is the external power available for charging (MW, >= 0; negative
/// values are treated as 0 and reported unserved). The internal charge budget
/// is `efficiency * surplus`, so the external draw never exceeds the surplus.
///
/// # Errors
/// All stores must share one efficiency within `eps`.
///
/// # Panics
/// Panics if `state.energies` does not match the fleet size.
pub fn ggcdf_allocate_grouped(
    fleet: &Fleet,
    state: &FleetState,
    surplus: f64,
    eps: f64,
) -> Result<(Allocation, Vec<DurationGroup>), PolicyError> {
    assert_eq!(
        state.energies.len(),
        fleet.len(),
        "state/fleet size mismatch"
    );
    let eta = match fleet.common_efficiency(eps) {
        Some(e) => e,
        None => {
            let lo = fleet
                .stores
                .iter()
                .map(|s| s.efficiency)
                .fold(f64::INFINITY, f64::min);
            let hi = fleet
                .stores
                .iter()
                .map(|s| s.efficiency)
                .fold(f64::NEG_INFINITY, f64::max);
            return Err(PolicyError::MixedEfficiency(lo, hi));
        }
    };
    let s = surplus.max(0.0);
    let missed = (-surplus).max(0.0);
    let mut groups = charge_groups(fleet, &state.energies, eps);
    let total: f64 = groups.iter().map(|g| g.power).sum();
    let budget = eta * s;
    let mut rates = vec![0.0; fleet.len()];
    // Either the fleet's charge power binds (some surplus spills) or the
    // surplus binds (everything is absorbed; by construction the external
    // draw then equals the surplus exactly).
    let (served, spilled) = if budget >= total {
        for g in groups.iter_mut() {
            g.lambda = 1.0;
        }
        let draw = total / eta;
        (-draw, s - draw)
    } else {
        assign_lambdas(&mut groups, budget);
        (-s, 0.0)
    };
    for g in &groups {
        if g.lambda > 0.0 {
            for &i in &g.members {
                rates[i] = -g.lambda * fleet.stores[i].max_charge;
            }
        }
    }
    Ok((
        Allocation {
            rates: RateVector(rates),
            served,
            unserved: missed,
            spilled,
        },
        groups,
    ))
}

/// GGCDF: absorb `surplus` into the stores that take longest to fill.
pub fn ggcdf_allocate(
    fleet: &Fleet,
    state: &FleetState,
    surplus: f64,
    eps: f64,
) -> Result<Allocation, PolicyError> {
    Ok(ggcdf_allocate_grouped(fleet, state, surplus, eps)?.0)
}

/// Combined policy: GGDDF when `signed_demand >= 0`, GGCDF on the surplus
/// `-signed_demand` otherwise. Stores are never charged from each other.
pub fn combined_allocate(
    fleet: &Fleet,
    state: &FleetState,
    signed_demand: f64,
    eps: f64,
) -> Result<Allocation, PolicyError> {
    combined_allocate_grouped(fleet, state, signed_demand, eps).map(|(a, _)| a)
}

/// Grouped variant of [`combined_allocate`].
pub fn combined_allocate_grouped(
    fleet: &Fleet,
    state: &FleetState,
    signed_demand: f64,
    eps: f64,
) -> Result<(Allocation, Vec<DurationGroup>), PolicyError> {
    if signed_demand >= 0.0 {
        Ok(ggddf_allocate_grouped(fleet, state, signed_demand, eps))
    } else {
        ggcdf_allocate_grouped(fleet, state, -signed_demand, eps)
    }
}

/// Discharge stores at full rate in the fixed `order` until the demand is
/// met; the last store used runs partially. Negative demand spills.
///
/// # Errors
/// `order` must be a permutation of `0..fleet.len()`.
pub fn priority_greedy_allocate(
    fleet: &Fleet,
    state: &FleetState,
    demand: f64,
    order: &[usize],
    eps: f64,
) -> Result<Allocation, PolicyError> {
    assert_eq!(
        state.energies.len(),
        fleet.len(),
        "state/fleet size mismatch"
    );
    let n = fleet.len();
    let mut seen = vec![false; n];
    let valid = order.len() == n
        && order.iter().all(|&i| {
            if i >= n || seen[i] {
                false
            } else {
                seen[i] = true;
                true
            }
        });
    if !valid {
        return Err(PolicyError::InvalidPriorityOrder {
            expected: n,
            got: order.to_vec(),
        });
    }
    let d = demand.max(0.0);
    let spill = (-demand).max(0.0);
    let total: f64 = fleet
        .stores
        .iter()
        .enumerate()
        .filter(|(i, s)| s.max_discharge > 0.0 && state.energies[*i] > eps)
        .map(|(_, s)| s.max_discharge)
        .sum();
    let mut rates = vec![0.0; n];
    let (served, unserved) = if d >= total {
        for (i, s) in fleet.stores.iter().enumerate() {
            if s.max_discharge > 0.0 && state.energies[i] > eps {
                rates[i] = s.max_discharge;
            }
        }
        (total, d - total)
    } else {
        let mut remaining = d;
        for &i in order {
            if remaining <= 0.0 {
                break;
            }
            let s = &fleet.stores[i];
            if s.max_discharge > 0.0 && state.energies[i] > eps {
                let r = s.max_discharge.min(remaining);
                rates[i] = r;
                remaining -= r;
            }
        }
        (d, 0.0)
    };
    Ok(Allocation {
        rates: RateVector(rates),
        served,
        unserved,
        spilled: spill,
    })
}

/// Store indices sorted by capacity (ascending or descending), ties by index.
pub fn capacity_order(fleet: &Fleet, ascending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fleet.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ca, cb) = (fleet.stores[a].capacity, fleet.stores[b].capacity);
        let cmp = if ascending {
            ca.partial_cmp(&cb).unwrap()
        } else {
            cb.partial_cmp(&ca).unwrap()
        };
        cmp.then(a.cmp(&b))
    });
    idx
}

/// Dispatches to the allocator for `policy`.
///
/// # Errors
/// [`PolicyError::OfflinePolicy`] for [`PolicyKind::ReverseGgddf`], plus the
/// policy-specific errors.
pub fn allocate(
    policy: &PolicyKind,
    fleet: &Fleet,
    state: &FleetState,
    signed_demand: f64,
    eps: f64,
) -> Result<Allocation, PolicyError> {
    allocate_grouped(policy, fleet, state, signed_demand, eps).map(|(a, _)| a)
}

/// As [`allocate`], returning the duration groups used (empty for
/// the priority policy, which does not group).
pub fn allocate_grouped(
    policy: &PolicyKind,
    fleet: &Fleet,
    state: &FleetState,
    signed_demand: f64,
    eps: f64,
) -> Result<(Allocation, Vec<DurationGroup>), PolicyError> {
    match policy {
        PolicyKind::Ggddf => Ok(ggddf_allocate_grouped(fleet, state, signed_demand, eps)),
        PolicyKind::Ggcdf => ggcdf_allocate_grouped(fleet, state, -signed_demand, eps),
        PolicyKind::Combined => combined_allocate_grouped(fleet, state, signed_demand, eps),
        PolicyKind::PriorityGreedy(order) => {
            priority_greedy_allocate(fleet, state, signed_demand, order, eps)
                .map(|a| (a, Vec::new()))
        }
        PolicyKind::ReverseGgddf => Err(PolicyError::OfflinePolicy("reverse-ggddf")),
    }
}
