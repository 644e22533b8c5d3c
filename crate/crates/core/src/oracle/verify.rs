//! Randomized verification of the library's optimality claims.
//!
//! Each claim pits the event-driven simulator, the transform calculus, and
//! the grid oracle against one another on freshly generated instances. The
//! three computation paths share no code beyond the fleet model, so
//! agreement on thousands of random instances is strong evidence that all
//! of them implement the mathematics they advertise.
//!
//! The claims are numbered 1–5 and drive the `verify --theorem N`
//! subcommand:
//!
//! 1. on nonnegative demand, the greedy longest-duration-first policy
//!    attains the least possible unserved energy, and that optimum equals
//!    both the transform gap and the grid optimum;
//! 2. weakly decreasing demand that any cross-charging dispatch can serve
//!    is served by the greedy policy alone;
//! 3. weakly increasing demand served from a full fleet with cross-charging
//!    can be served without it, ending at least as full in every store;
//! 4. weakly increasing demand that starts at or above the threshold power
//!    `k` (see [`duration_split_threshold`]) needs no cross-charging;
//! 5. on a proportional fleet started balanced, the combined
//!    charge/discharge policy is optimal for mixed-sign signals and keeps
//!    the fleet balanced at every event.
//!
//! Failures are returned as [`Counterexample`]s carrying the whole
//! instance, so they can be serialized, replayed, and debugged. Trial
//! batches are deterministic: trial `t` of seed `s` always sees the same
//! instance, regardless of thread count.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{validate_fleet, validate_state, Fleet, FleetState, StepSignal, Store};
use crate::oracle::{GridProblem, Objective, OracleError, OracleSolution, OracleStatus};
use crate::policies::{capacity_order, PolicyKind};
use crate::sim::{simulate, simulate_prefix_equivalence, SimConfig, SimError};
use crate::transforms::{duration_breakpoints, min_unserved_energy, TransformsError};
use thiserror::Error;

/// |simulated greedy unserved − transform gap| allowed in the claim-1 suite.
pub const SIM_TRANSFORM_TOL: f64 = 1e-6;
/// |transform gap − grid optimum| allowed in the claim-1 suite.
pub const TRANSFORM_ORACLE_TOL: f64 = 1e-5;
/// Unserved energy below which a run counts as full service.
pub const FULL_SERVICE_TOL: f64 = 1e-6;
/// Componentwise slack when comparing final stored energies (claim 3).
pub const FINAL_ENERGY_TOL: f64 = 1e-6;
/// |combined-policy unserved − grid optimum| allowed in the claim-5 suite.
pub const POLICY_ORACLE_TOL: f64 = 1e-5;
/// Largest discharge-duration spread still counting as balanced, hours.
pub const BALANCE_TOL: f64 = 1e-9;
/// Slack when ranking first-failure times between policies, hours.
pub const FAILURE_TIME_TOL: f64 = 1e-9;

/// The five verifiable optimality claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// 1 — greedy discharge attains the minimum unserved energy; simulator,
    /// transform gap, and grid optimum agree.
    GreedyOptimal,
    /// 2 — weakly decreasing demand servable with cross-charging is served
    /// by the greedy policy.
    DecreasingDemand,
    /// 3 — weakly increasing demand from a full fleet servable with
    /// cross-charging is servable without it, leaving every store at least
    /// as full.
    IncreasingFullStart,
    /// 4 — weakly increasing demand starting at or above the threshold
    /// power is servable without cross-charging whenever it is servable
    /// with it.
    IncreasingThreshold,
    /// 5 — the combined policy is optimal on proportional balanced fleets
    /// and preserves balance.
    ProportionalFleet,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [
        Theorem::GreedyOptimal,
        Theorem::DecreasingDemand,
        Theorem::IncreasingFullStart,
        Theorem::IncreasingThreshold,
        Theorem::ProportionalFleet,
    ];

    pub fn number(self) -> u8 {
        match self {
            Theorem::GreedyOptimal => 1,
            Theorem::DecreasingDemand => 2,
            Theorem::IncreasingFullStart => 3,
            Theorem::IncreasingThreshold => 4,
            Theorem::ProportionalFleet => 5,
        }
    }

    pub fn from_number(n: u8) -> Option<Theorem> {
        Theorem::ALL.into_iter().find(|t| t.number() == n)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "theorem {}", self.number())
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    /// The instance does not satisfy the claim's hypotheses. The message
    /// names the violated hypothesis.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Transforms(#[from] TransformsError),
    #[error("gave up generating a qualifying instance after {0} attempts")]
    Generation(usize),
}

/// A self-contained dispatch problem: the unit a claim is checked on, and
/// what gets serialized when a trial fails.
#[derive(Debug, Clone)]
pub struct Instance {
    pub fleet: Fleet,
    pub initial: FleetState,
    pub signal: StepSignal,
}

/// Outcome of checking one claim on one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail { detail: String },
}

/// A failing trial, kept whole for serialization and replay.
#[derive(Debug, Clone)]
pub struct Counterexample {
    /// Which claim failed (e.g. "theorem 2").
    pub claim: String,
    /// Trial index within its batch; together with the seed this pins the
    /// exact instance.
    pub trial: usize,
    pub instance: Instance,
    pub detail: String,
}

/// Aggregate outcome of a randomized batch.
#[derive(Debug)]
pub struct TrialSummary {
    pub trials: usize,
    pub failures: Vec<Counterexample>,
}

impl TrialSummary {
    pub fn passed(&self) -> usize {
        self.trials - self.failures.len()
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn sim_cfg(eps: f64) -> SimConfig {
    SimConfig {
        eps,
        max_events: None,
    }
}

fn solve(
    inst: &Instance,
    cross: bool,
    objective: Objective,
) -> Result<OracleSolution, VerifyError> {
    let problem =
        GridProblem::from_signal(&inst.fleet, &inst.initial, &inst.signal, cross, objective)?;
    Ok(problem.solve()?)
}

fn verdict(issues: Vec<String>) -> Verdict {
    if issues.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail {
            detail: issues.join("; "),
        }
    }
}

/// The threshold power `k`: total discharge rate of the stores that can
/// out-last every initially unfilled store. `u0` is the shortest
/// discharge-duration among unfilled stores (infinite if the fleet starts
/// full); a store belongs to the long side when even its full-capacity
/// duration exceeds `u0`, and `k` is the sum of those stores' rates.
pub fn duration_split_threshold(fleet: &Fleet, initial: &FleetState, eps: f64) -> f64 {
    let mut u0 = f64::INFINITY;
    for (s, &e) in fleet.stores.iter().zip(&initial.energies) {
        if e < s.capacity - eps {
            u0 = u0.min(s.discharge_duration(e));
        }
    }
    fleet
        .stores
        .iter()
        .filter(|s| s.discharge_duration(s.capacity) > u0)
        .map(|s| s.max_discharge)
        .sum()
}

fn duration_spread(fleet: &Fleet, energies: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (s, &e) in fleet.stores.iter().zip(energies) {
        let d = s.discharge_duration(e);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn hypothesis(msg: String) -> VerifyError {
    VerifyError::Hypothesis(msg)
}

fn join_violations(violations: &[crate::model::Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// The signal window the claim actually covers: from the initial state's
/// time to the horizon.
fn window(inst: &Instance) -> Result<StepSignal, VerifyError> {
    inst.signal
        .restricted(inst.initial.time, inst.signal.horizon())
        .map_err(|e| hypothesis(format!("invalid window: {e}")))
}

fn require_valid(inst: &Instance, eps: f64) -> Result<(), VerifyError> {
    let v = validate_fleet(&inst.fleet);
    if !v.is_empty() {
        return Err(hypothesis(format!(
            "invalid fleet: {}",
            join_violations(&v)
        )));
    }
    let v = validate_state(&inst.fleet, &inst.initial, eps);
    if !v.is_empty() {
        return Err(hypothesis(format!(
            "invalid initial state: {}",
            join_violations(&v)
        )));
    }
    Ok(())
}

fn require_nonnegative(window: &StepSignal, eps: f64) -> Result<(), VerifyError> {
    if !window.is_nonnegative(eps) {
        return Err(hypothesis(format!(
            "demand must be nonnegative for this claim (minimum value {} MW)",
            window.min_value()
        )));
    }
    Ok(())
}

fn require_decreasing(window: &StepSignal, eps: f64) -> Result<(), VerifyError> {
    if !window.is_weakly_decreasing(eps) {
        let t = first_rise(window, eps).unwrap_or(window.start());
        return Err(hypothesis(format!(
            "demand must be weakly decreasing; it rises at t = {t} h"
        )));
    }
    Ok(())
}

fn require_increasing(window: &StepSignal, eps: f64) -> Result<(), VerifyError> {
    if !window.is_weakly_increasing(eps) {
        let t = first_drop(window, eps).unwrap_or(window.start());
        return Err(hypothesis(format!(
            "demand must be weakly increasing; it drops at t = {t} h"
        )));
    }
    Ok(())
}

fn require_full_start(inst: &Instance, eps: f64) -> Result<(), VerifyError> {
    for (s, &e) in inst.fleet.stores.iter().zip(&inst.initial.energies) {
        if e < s.capacity - eps {
            return Err(hypothesis(format!(
                "all stores must start full; store {} holds {} MWh of {} MWh",
                s.id, e, s.capacity
            )));
        }
    }
    Ok(())
}

fn first_rise(signal: &StepSignal, eps: f64) -> Option<f64> {
    signal
        .values()
        .windows(2)
        .position(|w| w[1] > w[0] + eps)
        .map(|k| signal.breakpoints()[k + 1])
}

fn first_drop(signal: &StepSignal, eps: f64) -> Option<f64> {
    signal
        .values()
        .windows(2)
        .position(|w| w[1] < w[0] - eps)
        .map(|k| signal.breakpoints()[k + 1])
}

fn require_proportional(inst: &Instance, eps: f64) -> Result<(), VerifyError> {
    let stores = &inst.fleet.stores;
    let first = &stores[0];
    let c = first.discharge_duration(first.capacity);
    for s in &stores[1..] {
        let d = s.discharge_duration(s.capacity);
        if (d - c).abs() > eps {
            return Err(hypothesis(format!(
                "stores must share one full-discharge duration; store {} has {} h, store {} has {} h",
                first.id, c, s.id, d
            )));
        }
    }
    let alpha = first.max_charge / first.max_discharge;
    if alpha <= eps {
        return Err(hypothesis(format!(
            "charge rates must be a positive multiple of discharge rates; store {} cannot charge",
            first.id
        )));
    }
    for s in &stores[1..] {
        let a = s.max_charge / s.max_discharge;
        if (a - alpha).abs() > eps {
            return Err(hypothesis(format!(
                "charge rates must be one common multiple of discharge rates; store {} has ratio {}, store {} has ratio {}",
                first.id, alpha, s.id, a
            )));
        }
    }
    if inst.fleet.common_efficiency(eps).is_none() {
        return Err(hypothesis(
            "stores must share one round-trip efficiency".into(),
        ));
    }
    let spread = duration_spread(&inst.fleet, &inst.initial.energies);
    if spread > eps {
        return Err(hypothesis(format!(
            "initial energies must be balanced; discharge-durations spread over {spread} h"
        )));
    }
    Ok(())
}

/// Checks the claim's hypotheses, returning [`VerifyError::Hypothesis`]
/// naming the first violated one.
pub fn check_hypotheses(theorem: Theorem, inst: &Instance, eps: f64) -> Result<(), VerifyError> {
    require_valid(inst, eps)?;
    let w = window(inst)?;
    match theorem {
        Theorem::GreedyOptimal => require_nonnegative(&w, eps),
        Theorem::DecreasingDemand => {
            require_nonnegative(&w, eps)?;
            require_decreasing(&w, eps)
        }
        Theorem::IncreasingFullStart => {
            require_nonnegative(&w, eps)?;
            require_increasing(&w, eps)?;
            require_full_start(inst, eps)
        }
        Theorem::IncreasingThreshold => {
            require_nonnegative(&w, eps)?;
            require_increasing(&w, eps)?;
            let k = duration_split_threshold(&inst.fleet, &inst.initial, eps);
            let d0 = w.value_at(w.start());
            if d0 < k - eps {
                return Err(hypothesis(format!(
                    "demand must start at or above the threshold power; d(0) = {d0} MW < k = {k} MW"
                )));
            }
            Ok(())
        }
        Theorem::ProportionalFleet => require_proportional(inst, eps),
    }
}

/// Checks one claim on one instance. Hypothesis violations are errors, not
/// failed verdicts; a counterexample is only ever an instance that meets
/// every hypothesis yet breaks the claimed implication.
pub fn verify_theorem(theorem: Theorem, inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    check_hypotheses(theorem, inst, eps)?;
    match theorem {
        Theorem::GreedyOptimal => check_greedy_optimal(inst, eps),
        Theorem::DecreasingDemand => check_decreasing(inst, eps),
        Theorem::IncreasingFullStart => check_increasing_full(inst, eps),
        Theorem::IncreasingThreshold => check_threshold(inst, eps),
        Theorem::ProportionalFleet => check_proportional(inst, eps),
    }
}

fn check_greedy_optimal(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    let bound = min_unserved_energy(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        inst.signal.horizon(),
        eps,
    )?;
    let lp = solve(inst, false, Objective::MinUnserved)?;
    let mut issues = Vec::new();
    if (report.total_unserved - bound).abs() > SIM_TRANSFORM_TOL {
        issues.push(format!(
            "simulated greedy unserved {} MWh differs from the transform gap {} MWh",
            report.total_unserved, bound
        ));
    }
    if (bound - lp.unserved).abs() > TRANSFORM_ORACLE_TOL {
        issues.push(format!(
            "transform gap {} MWh differs from the grid optimum {} MWh",
            bound, lp.unserved
        ));
    }
    Ok(verdict(issues))
}

fn check_decreasing(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    let cross = solve(inst, true, Objective::MinUnserved)?;
    if cross.status != OracleStatus::FullyServed {
        return Ok(Verdict::Pass); // antecedent false: nothing to check
    }
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    let mut issues = Vec::new();
    if report.total_unserved > FULL_SERVICE_TOL {
        issues.push(format!(
            "cross-charging serves fully (optimum {} MWh unserved) but the greedy policy leaves {} MWh unserved",
            cross.unserved, report.total_unserved
        ));
    }
    Ok(verdict(issues))
}

fn check_increasing_full(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    let cross_min = solve(inst, true, Objective::MinUnserved)?;
    if cross_min.status != OracleStatus::FullyServed {
        return Ok(Verdict::Pass);
    }
    let everyone: Vec<usize> = (0..inst.fleet.len()).collect();
    let cross = solve(inst, true, Objective::MaxFinalEnergy(everyone))?;
    let mut issues = Vec::new();
    if cross.status != OracleStatus::FullyServed {
        issues.push(format!(
            "maximizing final energy sacrificed service ({} MWh unserved) although the instance is servable",
            cross.unserved
        ));
        return Ok(verdict(issues));
    }
    let floors: Vec<f64> = cross
        .final_energies
        .iter()
        .zip(&inst.fleet.stores)
        .map(|(&f, s)| (f - FINAL_ENERGY_TOL).clamp(0.0, s.capacity))
        .collect();
    let mut problem = GridProblem::from_signal(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        false,
        Objective::MinUnserved,
    )?;
    problem.final_energy_min = Some(floors);
    let no_cross = problem.solve()?;
    if no_cross.status != OracleStatus::FullyServed {
        issues.push(format!(
            "no cross-charging-free dispatch matches the cross-charging final energies while serving fully ({} MWh short)",
            no_cross.unserved
        ));
    }
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    if report.total_unserved > FULL_SERVICE_TOL {
        issues.push(format!(
            "the greedy policy leaves {} MWh unserved on a servable instance",
            report.total_unserved
        ));
    }
    Ok(verdict(issues))
}

fn check_threshold(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    let cross = solve(inst, true, Objective::MinUnserved)?;
    if cross.status != OracleStatus::FullyServed {
        return Ok(Verdict::Pass);
    }
    let no_cross = solve(inst, false, Objective::MinUnserved)?;
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    let mut issues = Vec::new();
    if no_cross.status != OracleStatus::FullyServed {
        issues.push(format!(
            "cross-charging serves fully but the best cross-charging-free dispatch leaves {} MWh unserved",
            no_cross.unserved
        ));
    }
    if report.total_unserved > FULL_SERVICE_TOL {
        issues.push(format!(
            "the greedy policy leaves {} MWh unserved",
            report.total_unserved
        ));
    }
    Ok(verdict(issues))
}

fn check_proportional(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Combined,
        &sim_cfg(eps),
    )?;
    let lp = solve(inst, true, Objective::MinUnserved)?;
    let mut issues = Vec::new();
    let gap = (report.total_unserved - lp.unserved).abs();
    if gap > POLICY_ORACLE_TOL {
        issues.push(format!(
            "combined-policy unserved {} MWh differs from the optimum {} MWh",
            report.total_unserved, lp.unserved
        ));
    }
    for p in report.trajectory.points() {
        let spread = duration_spread(&inst.fleet, &p.energies);
        if spread > BALANCE_TOL {
            issues.push(format!(
                "fleet unbalanced at t = {} h: discharge-durations spread over {} h",
                p.time, spread
            ));
            break;
        }
    }
    Ok(verdict(issues))
}

/// The corollary to claims 2 and 3: unimodal demand (weakly increasing,
/// then weakly decreasing) from a full fleet is served by the greedy
/// policy whenever any cross-charging dispatch serves it.
pub fn check_unimodal_full_start(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    require_valid(inst, eps)?;
    let w = window(inst)?;
    require_nonnegative(&w, eps)?;
    if let Some(t) = unimodal_violation(&w, eps) {
        return Err(hypothesis(format!(
            "demand must be unimodal; it rises again at t = {t} h after decreasing"
        )));
    }
    require_full_start(inst, eps)?;
    let cross = solve(inst, true, Objective::MinUnserved)?;
    if cross.status != OracleStatus::FullyServed {
        return Ok(Verdict::Pass);
    }
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    let mut issues = Vec::new();
    if report.total_unserved > FULL_SERVICE_TOL {
        issues.push(format!(
            "cross-charging serves fully but the greedy policy leaves {} MWh unserved",
            report.total_unserved
        ));
    }
    Ok(verdict(issues))
}

/// Time at which the signal stops being unimodal, if it ever does.
fn unimodal_violation(signal: &StepSignal, eps: f64) -> Option<f64> {
    let values = signal.values();
    let mut decreasing = false;
    for (k, w) in values.windows(2).enumerate() {
        if w[1] < w[0] - eps {
            decreasing = true;
        } else if w[1] > w[0] + eps && decreasing {
            return Some(signal.breakpoints()[k + 1]);
        }
    }
    None
}

/// On an instance whose demand cannot be fully served, the greedy policy
/// must stay failure-free at least as long as every baseline: priority
/// order (both capacity presets) and the time-reversed plan.
pub fn check_first_failure_rank(inst: &Instance, eps: f64) -> Result<Verdict, VerifyError> {
    require_valid(inst, eps)?;
    let w = window(inst)?;
    require_nonnegative(&w, eps)?;
    let cfg = sim_cfg(eps);
    let greedy = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &cfg,
    )?;
    if greedy.total_unserved <= FULL_SERVICE_TOL {
        return Ok(Verdict::Pass); // servable: no failure times to rank
    }
    let t_greedy = greedy
        .first_failure_time
        .expect("positive unserved energy implies a failure time");
    let competitors = [
        (
            "priority (ascending capacity)",
            PolicyKind::PriorityGreedy(capacity_order(&inst.fleet, true)),
        ),
        (
            "priority (descending capacity)",
            PolicyKind::PriorityGreedy(capacity_order(&inst.fleet, false)),
        ),
        ("reverse greedy", PolicyKind::ReverseGgddf),
    ];
    let mut issues = Vec::new();
    for (name, policy) in competitors {
        let report = simulate(&inst.fleet, &inst.initial, &inst.signal, &policy, &cfg)?;
        match report.first_failure_time {
            None => issues.push(format!(
                "{name} serves fully although the greedy policy does not"
            )),
            Some(t) if t > t_greedy + FAILURE_TIME_TOL => issues.push(format!(
                "{name} first fails at {t} h, after the greedy policy at {t_greedy} h"
            )),
            _ => {}
        }
    }
    Ok(verdict(issues))
}

// Tolerances for the trajectory-structure checks. The simulator works at
// machine precision, so these only absorb accumulated rounding.
const GREEDY_IDENTITY_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 1e-8;
const COALESCE_SLACK: f64 = 1e-7;
const PI_MATCH_TOL: f64 = 1e-9;

/// Structural invariants of a greedy discharge trajectory:
///
/// - greedy identity: served power equals `min(demand, available power)` at
///   every event;
/// - order preservation: discharge-durations never reorder;
/// - coalescence permanence: stores whose durations meet stay together;
/// - breakpoint nesting: the set of cumulative-power breakpoints only ever
///   loses elements;
/// - non-anticipation: truncating the signal at each of `splits`
///   reproduces the trajectory prefix.
pub fn check_trajectory_structure(
    inst: &Instance,
    splits: &[f64],
    eps: f64,
) -> Result<Verdict, VerifyError> {
    require_valid(inst, eps)?;
    let w = window(inst)?;
    require_nonnegative(&w, eps)?;
    let report = simulate(
        &inst.fleet,
        &inst.initial,
        &inst.signal,
        &PolicyKind::Ggddf,
        &sim_cfg(eps),
    )?;
    let pts = report.trajectory.points();
    let fleet = &inst.fleet;
    let mut issues = Vec::new();

    for p in &pts[..pts.len() - 1] {
        let d = inst.signal.value_at(p.time).max(0.0);
        let avail: f64 = fleet
            .stores
            .iter()
            .zip(&p.energies)
            .filter(|(_, &e)| e > eps)
            .map(|(s, _)| s.max_discharge)
            .sum();
        let served: f64 = p.rates.0.iter().sum();
        if (served - d.min(avail)).abs() > GREEDY_IDENTITY_TOL {
            issues.push(format!(
                "greedy identity broken at t = {} h: served {} MW, expected {} MW",
                p.time,
                served,
                d.min(avail)
            ));
            break;
        }
    }

    let durations: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            fleet
                .stores
                .iter()
                .zip(&p.energies)
                .map(|(s, &e)| s.discharge_duration(e))
                .collect()
        })
        .collect();
    'pairs: for i in 0..fleet.len() {
        for j in (i + 1)..fleet.len() {
            let mut coalesced = false;
            let mut sign = 0i8;
            for (p, durs) in pts.iter().zip(&durations) {
                let gap = durs[i] - durs[j];
                if coalesced {
                    if gap.abs() > COALESCE_SLACK {
                        issues.push(format!(
                            "stores {} and {} separated at t = {} h after coalescing",
                            fleet.stores[i].id, fleet.stores[j].id, p.time
                        ));
                        break 'pairs;
                    }
                    continue;
                }
                if gap.abs() <= eps {
                    coalesced = true;
                } else if gap > ORDER_TOL {
                    if sign < 0 {
                        issues.push(format!(
                            "stores {} and {} swapped duration order at t = {} h",
                            fleet.stores[i].id, fleet.stores[j].id, p.time
                        ));
                        break 'pairs;
                    }
                    sign = 1;
                } else if gap < -ORDER_TOL {
                    if sign > 0 {
                        issues.push(format!(
                            "stores {} and {} swapped duration order at t = {} h",
                            fleet.stores[i].id, fleet.stores[j].id, p.time
                        ));
                        break 'pairs;
                    }
                    sign = -1;
                }
            }
        }
    }

    let mut prev: Option<Vec<f64>> = None;
    for p in pts {
        let state = FleetState::new(p.time, p.energies.clone());
        let cur = duration_breakpoints(fleet, &state, eps);
        if let Some(earlier) = &prev {
            let nested = cur
                .iter()
                .all(|&x| earlier.iter().any(|&y| (x - y).abs() <= PI_MATCH_TOL));
            if !nested {
                issues.push(format!(
                    "breakpoint set gained an element by t = {} h",
                    p.time
                ));
                break;
            }
        }
        prev = Some(cur);
    }

    for &t_split in splits {
        if !simulate_prefix_equivalence(
            &inst.fleet,
            &inst.initial,
            &inst.signal,
            &PolicyKind::Ggddf,
            t_split,
            &sim_cfg(eps),
        )? {
            issues.push(format!(
                "truncating the signal at t = {t_split} h changes the trajectory prefix"
            ));
        }
    }

    Ok(verdict(issues))
}

// ---------------------------------------------------------------------------
// Instance generation
// ---------------------------------------------------------------------------

const MAX_STORES: usize = 5;
const MAX_SEGMENTS: usize = 8;
/// Absolute unserved energy below which a generated instance counts as
/// cleanly servable; keeps borderline instances out of the implication
/// suites.
const GEN_FEASIBLE_TOL: f64 = 1e-9;

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn gen_discharge_fleet(rng: &mut ChaCha8Rng, n: usize) -> Fleet {
    Fleet::new(
        (0..n)
            .map(|i| {
                let power = rng.gen_range(0.4..2.0);
                let duration = rng.gen_range(0.5..4.0);
                Store::discharge_only(format!("s{}", i + 1), power * duration, power)
            })
            .collect(),
    )
}

fn gen_two_way_fleet(rng: &mut ChaCha8Rng, n: usize, common_eta: Option<f64>) -> Fleet {
    Fleet::new(
        (0..n)
            .map(|i| {
                let power = rng.gen_range(0.4..2.0);
                let duration = rng.gen_range(0.5..4.0);
                let max_charge = if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.2..2.0)
                };
                let efficiency = common_eta.unwrap_or_else(|| {
                    if rng.gen_bool(0.25) {
                        1.0
                    } else {
                        rng.gen_range(0.55..1.0)
                    }
                });
                Store {
                    id: format!("s{}", i + 1),
                    capacity: power * duration,
                    max_discharge: power,
                    max_charge,
                    efficiency,
                }
            })
            .collect(),
    )
}

fn gen_energies(rng: &mut ChaCha8Rng, fleet: &Fleet) -> Vec<f64> {
    fleet
        .stores
        .iter()
        .map(|s| {
            if rng.gen_bool(0.15) {
                0.0
            } else if rng.gen_bool(0.2) {
                s.capacity
            } else {
                rng.gen_range(0.0..s.capacity)
            }
        })
        .collect()
}

fn gen_lengths(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.25..1.5)).collect()
}

fn signal_from_parts(lengths: &[f64], values: Vec<f64>) -> StepSignal {
    let mut breakpoints = Vec::with_capacity(lengths.len() + 1);
    let mut t = 0.0;
    breakpoints.push(t);
    for &l in lengths {
        t += l;
        breakpoints.push(t);
    }
    StepSignal::new(breakpoints, values).expect("generated breakpoints are valid")
}

fn cross_feasible(inst: &Instance) -> Result<bool, VerifyError> {
    let sol = solve(inst, true, Objective::MinUnserved)?;
    Ok(sol.unserved <= GEN_FEASIBLE_TOL)
}

fn gen_greedy_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=MAX_STORES);
    let fleet = gen_discharge_fleet(rng, n);
    let energies = gen_energies(rng, &fleet);
    let nseg = rng.gen_range(1..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let p_total = fleet.total_discharge_power();
    let values = (0..nseg)
        .map(|_| {
            if rng.gen_bool(0.12) {
                0.0
            } else {
                rng.gen_range(0.0..1.25 * p_total)
            }
        })
        .collect();
    Instance {
        initial: FleetState::new(0.0, energies),
        signal: signal_from_parts(&lengths, values),
        fleet,
    }
}

/// Scales `values` down until the cross-charging oracle serves the signal
/// cleanly; the monotone shape of `values` is preserved.
fn shrink_until_feasible(
    fleet: Fleet,
    initial: FleetState,
    lengths: &[f64],
    values: &[f64],
    mut scale: f64,
) -> Result<Instance, VerifyError> {
    const ATTEMPTS: usize = 60;
    for _ in 0..ATTEMPTS {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let inst = Instance {
            fleet: fleet.clone(),
            initial: initial.clone(),
            signal: signal_from_parts(lengths, scaled),
        };
        if cross_feasible(&inst)? {
            return Ok(inst);
        }
        scale *= 0.6;
    }
    Err(VerifyError::Generation(ATTEMPTS))
}

fn gen_decreasing_instance(rng: &mut ChaCha8Rng) -> Result<Instance, VerifyError> {
    let n = rng.gen_range(1..=MAX_STORES);
    let fleet = gen_two_way_fleet(rng, n, None);
    let initial = FleetState::new(0.0, gen_energies(rng, &fleet));
    let nseg = rng.gen_range(1..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let mut values: Vec<f64> = (0..nseg)
        .map(|_| rng.gen_range(0.0..fleet.total_discharge_power()))
        .collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let scale = rng.gen_range(0.25..1.0);
    shrink_until_feasible(fleet, initial, &lengths, &values, scale)
}

fn gen_increasing_full_instance(rng: &mut ChaCha8Rng) -> Result<Instance, VerifyError> {
    let n = rng.gen_range(1..=MAX_STORES);
    let fleet = gen_two_way_fleet(rng, n, None);
    let initial = fleet.full_state();
    let nseg = rng.gen_range(1..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let mut values: Vec<f64> = (0..nseg)
        .map(|_| rng.gen_range(0.0..fleet.total_discharge_power()))
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = rng.gen_range(0.25..1.0);
    shrink_until_feasible(fleet, initial, &lengths, &values, scale)
}

fn gen_threshold_instance(rng: &mut ChaCha8Rng, eps: f64) -> Result<Instance, VerifyError> {
    const FLEET_ATTEMPTS: usize = 80;
    for _ in 0..FLEET_ATTEMPTS {
        let n = rng.gen_range(2..=MAX_STORES);
        let fleet = gen_two_way_fleet(rng, n, None);
        let energies: Vec<f64> = fleet
            .stores
            .iter()
            .map(|s| {
                if rng.gen_bool(0.45) {
                    s.capacity
                } else {
                    rng.gen_range(0.15 * s.capacity..s.capacity)
                }
            })
            .collect();
        let initial = FleetState::new(0.0, energies);
        let k = duration_split_threshold(&fleet, &initial, eps);
        let p_total = fleet.total_discharge_power();
        if k > 0.9 * p_total {
            continue;
        }
        let d0 = k + rng.gen_range(0.02..0.6) * (0.95 * p_total - k);
        let nseg = rng.gen_range(1..=MAX_SEGMENTS);
        let headroom = (0.98 * p_total - d0).max(0.0);
        let mut values = Vec::with_capacity(nseg);
        let mut d = d0;
        for _ in 0..nseg {
            values.push(d);
            d = (d + rng.gen_range(0.0..=headroom / nseg as f64)).min(0.98 * p_total);
        }
        // shrink the horizon, not the values: d(0) >= k must survive
        let mut lengths: Vec<f64> = (0..nseg).map(|_| rng.gen_range(0.2..0.8)).collect();
        for _ in 0..50 {
            let inst = Instance {
                fleet: fleet.clone(),
                initial: initial.clone(),
                signal: signal_from_parts(&lengths, values.clone()),
            };
            if cross_feasible(&inst)? {
                return Ok(inst);
            }
            for l in &mut lengths {
                *l *= 0.5;
            }
        }
    }
    Err(VerifyError::Generation(FLEET_ATTEMPTS))
}

fn gen_proportional_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=MAX_STORES);
    let c = rng.gen_range(0.5..4.0);
    let alpha = rng.gen_range(0.3..1.5);
    let eta = if rng.gen_bool(0.25) {
        1.0
    } else {
        rng.gen_range(0.55..1.0)
    };
    let fleet = Fleet::new(
        (0..n)
            .map(|i| {
                let power = rng.gen_range(0.4..2.0);
                Store {
                    id: format!("s{}", i + 1),
                    capacity: c * power,
                    max_discharge: power,
                    max_charge: alpha * power,
                    efficiency: eta,
                }
            })
            .collect(),
    );
    let fill = rng.gen_range(0.0..=1.0);
    let energies: Vec<f64> = fleet.stores.iter().map(|s| fill * s.capacity).collect();
    let nseg = rng.gen_range(2..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let p_total = fleet.total_discharge_power();
    let mut values: Vec<f64> = (0..nseg)
        .map(|_| rng.gen_range(-1.2 * p_total..1.2 * p_total))
        .collect();
    // force a genuinely mixed-sign signal
    if values.iter().all(|&v| v >= 0.0) {
        let k = rng.gen_range(0..nseg);
        values[k] = -rng.gen_range(0.1..1.2) * p_total;
    } else if values.iter().all(|&v| v <= 0.0) {
        let k = rng.gen_range(0..nseg);
        values[k] = rng.gen_range(0.1..1.2) * p_total;
    }
    Instance {
        initial: FleetState::new(0.0, energies),
        signal: signal_from_parts(&lengths, values),
        fleet,
    }
}

fn gen_unimodal_instance(rng: &mut ChaCha8Rng) -> Result<Instance, VerifyError> {
    let n = rng.gen_range(1..=MAX_STORES);
    let fleet = gen_two_way_fleet(rng, n, None);
    let initial = fleet.full_state();
    let nseg = rng.gen_range(1..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let peak = rng.gen_range(0..nseg);
    let p_total = fleet.total_discharge_power();
    let top = rng.gen_range(0.5..1.0) * p_total;
    let mut rising: Vec<f64> = (0..peak).map(|_| rng.gen_range(0.0..top)).collect();
    rising.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut falling: Vec<f64> = (0..nseg - peak - 1)
        .map(|_| rng.gen_range(0.0..top))
        .collect();
    falling.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut values = rising;
    values.push(top);
    values.extend(falling);
    let scale = rng.gen_range(0.3..1.0);
    shrink_until_feasible(fleet, initial, &lengths, &values, scale)
}

fn gen_infeasible_instance(rng: &mut ChaCha8Rng, eps: f64) -> Result<Instance, VerifyError> {
    let n = rng.gen_range(1..=MAX_STORES);
    let fleet = gen_discharge_fleet(rng, n);
    let energies: Vec<f64> = fleet
        .stores
        .iter()
        .map(|s| rng.gen_range(0.2 * s.capacity..s.capacity))
        .collect();
    let initial = FleetState::new(0.0, energies);
    let nseg = rng.gen_range(2..=MAX_SEGMENTS);
    let lengths = gen_lengths(rng, nseg);
    let p_total = fleet.total_discharge_power();
    let values: Vec<f64> = (0..nseg)
        .map(|_| rng.gen_range(0.0..1.5 * p_total))
        .collect();
    let mut scale = 1.0;
    const ATTEMPTS: usize = 40;
    for _ in 0..ATTEMPTS {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let signal = signal_from_parts(&lengths, scaled);
        let short = min_unserved_energy(&fleet, &initial, &signal, signal.horizon(), eps)?;
        if short >= 0.05 {
            return Ok(Instance {
                fleet,
                initial,
                signal,
            });
        }
        scale *= 1.5;
    }
    Err(VerifyError::Generation(ATTEMPTS))
}

// ---------------------------------------------------------------------------
// Trial batches
// ---------------------------------------------------------------------------

fn run_batch<F>(
    claim: String,
    trials: usize,
    seed: u64,
    check: F,
) -> Result<TrialSummary, VerifyError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(Instance, Verdict), VerifyError> + Sync,
{
    let outcomes: Result<Vec<Option<Counterexample>>, VerifyError> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let (instance, verdict) = check(&mut rng)?;
            Ok(match verdict {
                Verdict::Pass => None,
                Verdict::Fail { detail } => Some(Counterexample {
                    claim: claim.clone(),
                    trial,
                    instance,
                    detail,
                }),
            })
        })
        .collect();
    Ok(TrialSummary {
        trials,
        failures: outcomes?.into_iter().flatten().collect(),
    })
}

/// Runs `trials` randomized instances of one claim. Instances are
/// generated to satisfy the claim's hypotheses (and, for the implication
/// claims, to make the antecedent true), so every trial is a real test.
pub fn run_trials(
    theorem: Theorem,
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<TrialSummary, VerifyError> {
    run_batch(theorem.to_string(), trials, seed, move |rng| {
        let inst = match theorem {
            Theorem::GreedyOptimal => gen_greedy_instance(rng),
            Theorem::DecreasingDemand => gen_decreasing_instance(rng)?,
            Theorem::IncreasingFullStart => gen_increasing_full_instance(rng)?,
            Theorem::IncreasingThreshold => gen_threshold_instance(rng, eps)?,
            Theorem::ProportionalFleet => gen_proportional_instance(rng),
        };
        let verdict = verify_theorem(theorem, &inst, eps)?;
        Ok((inst, verdict))
    })
}

/// Randomized batch of [`check_unimodal_full_start`].
pub fn run_unimodal_trials(
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<TrialSummary, VerifyError> {
    run_batch("unimodal full-start".into(), trials, seed, move |rng| {
        let inst = gen_unimodal_instance(rng)?;
        let verdict = check_unimodal_full_start(&inst, eps)?;
        Ok((inst, verdict))
    })
}

/// Randomized batch of [`check_first_failure_rank`] on unservable
/// instances.
pub fn run_first_failure_trials(
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<TrialSummary, VerifyError> {
    run_batch("first-failure order".into(), trials, seed, move |rng| {
        let inst = gen_infeasible_instance(rng, eps)?;
        let verdict = check_first_failure_rank(&inst, eps)?;
        Ok((inst, verdict))
    })
}

/// Randomized batch of [`check_trajectory_structure`], three split times
/// per instance.
pub fn run_structure_trials(
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<TrialSummary, VerifyError> {
    run_batch("trajectory structure".into(), trials, seed, move |rng| {
        let inst = gen_greedy_instance(rng);
        let span = inst.signal.horizon() - inst.signal.start();
        let splits: Vec<f64> = (0..3)
            .map(|_| inst.signal.start() + rng.gen_range(0.05..0.95) * span)
            .collect();
        let verdict = check_trajectory_structure(&inst, &splits, eps)?;
        Ok((inst, verdict))
    })
}
