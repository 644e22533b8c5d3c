//! Command-line front end: runs dispatch policies on fleet/signal files,
//! emits transforms, evaluates the unserved-energy bound, and drives the
//! randomized claim verifier.
//!
//! Exit codes, fixed for scripting: 0 success, 1 a verification claim
//! failed (counterexample found), 2 invalid input (files, flags, fleet or
//! state validation, hypothesis violations), 3 runtime failure (policy
//! errors, solver trouble).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use storefleet::io::{
    fleet_to_toml, parse_fleet_toml, parse_signal_csv, report_to_text, signal_to_csv,
    trajectory_to_csv, transform_to_csv, FleetFile,
};
use storefleet::model::{validate_fleet, validate_state, Fleet, FleetState, StepSignal};
use storefleet::oracle::verify::{
    run_trials, verify_theorem, Instance, Theorem, TrialSummary, Verdict, VerifyError,
};
use storefleet::oracle::{GridProblem, Objective, OracleError};
use storefleet::policies::{capacity_order, PolicyKind};
use storefleet::sim::{simulate, SimConfig, SimError};
use storefleet::transforms::{demand_transform, max_gap, store_transform};
use storefleet::DEFAULT_EPS;

#[derive(Parser)]
#[command(
    name = "storefleet",
    version,
    about = "Optimal dispatch of heterogeneous energy-store fleets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dispatch policy and write the trajectory and run summary
    Simulate(SimulateArgs),
    /// Write the fleet and demand transform knots and print their largest gap
    Transform(TransformArgs),
    /// Print the least unserved energy any dispatch can achieve
    Minunserved(MinUnservedArgs),
    /// Check an optimality claim on randomized instances, or on one instance
    Verify(VerifyArgs),
    /// Run several policies on one instance and tabulate the outcomes
    Compare(CompareArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Fleet config, TOML
    #[arg(long)]
    fleet: PathBuf,
    /// Demand signal, CSV time_h,demand_mw
    #[arg(long)]
    signal: PathBuf,
    /// Stop the run at this time instead of the signal horizon, hours
    #[arg(long)]
    horizon: Option<f64>,
    /// Numeric tolerance
    #[arg(long, default_value_t = DEFAULT_EPS)]
    tolerance: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// ggddf, ggcdf, combined, reverse-ggddf, priority:asc, priority:desc,
    /// or priority:<i,j,k> (store indexes)
    #[arg(long, default_value = "ggddf")]
    policy: String,
    /// Directory for trajectory.csv and report.txt
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Evaluate the transforms at this time, hours; the configured energies
    /// are taken as the state and the demand window runs to the horizon
    #[arg(long)]
    at: Option<f64>,
    /// Directory for store_transform.csv and demand_transform.csv
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MinUnservedArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Also solve the discrete-time grid oracle and print its optimum
    #[arg(long)]
    oracle: bool,
    /// Let the oracle move energy between stores (requires --oracle)
    #[arg(long, requires = "oracle")]
    cross: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Claim number, 1 through 5
    #[arg(long)]
    theorem: u8,
    /// Randomized instances to check
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Seed; trial t is reproducible from (seed, t) regardless of threads
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the claim on this fleet instead of random instances
    #[arg(long, requires = "signal")]
    fleet: Option<PathBuf>,
    /// Demand signal for --fleet
    #[arg(long, requires = "fleet")]
    signal: Option<PathBuf>,
    /// Where counterexamples are serialized
    #[arg(long, default_value = "counterexamples")]
    out_dir: PathBuf,
    /// Numeric tolerance
    #[arg(long, default_value_t = DEFAULT_EPS)]
    tolerance: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Policy to include; repeatable. Default: ggddf, priority:asc,
    /// priority:desc, reverse-ggddf
    #[arg(long)]
    policy: Vec<String>,
}

enum Failure {
    /// exit 2
    Input(String),
    /// exit 3
    Runtime(String),
    /// exit 1; details already printed
    ClaimFailed,
}

fn input<E: Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn map_sim(e: SimError) -> Failure {
    match e {
        SimError::Policy(_) | SimError::EventOverflow(_) => Failure::Runtime(e.to_string()),
        _ => Failure::Input(e.to_string()),
    }
}

fn map_oracle(e: OracleError) -> Failure {
    match e {
        OracleError::BadInstance(_) => Failure::Input(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn map_verify(e: VerifyError) -> Failure {
    match e {
        VerifyError::Hypothesis(_) | VerifyError::Transforms(_) => Failure::Input(e.to_string()),
        VerifyError::Sim(s) => map_sim(s),
        VerifyError::Oracle(o) => map_oracle(o),
        VerifyError::Generation(_) => Failure::Runtime(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Transform(args) => cmd_transform(args),
        Command::Minunserved(args) => cmd_minunserved(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ClaimFailed) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_instance(args: &InstanceArgs) -> Result<(Fleet, FleetState, StepSignal), Failure> {
    let FleetFile {
        fleet,
        initial_energies,
    } = parse_fleet_toml(&read_file(&args.fleet)?).map_err(input)?;
    let violations = validate_fleet(&fleet);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Input(format!(
            "{}: {}",
            args.fleet.display(),
            msgs.join("; ")
        )));
    }
    let mut signal = parse_signal_csv(&read_file(&args.signal)?).map_err(input)?;
    if let Some(h) = args.horizon {
        signal = signal.restricted(signal.start(), h).map_err(input)?;
    }
    let state = FleetState::new(signal.start(), initial_energies);
    let violations = validate_state(&fleet, &state, args.tolerance);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Input(format!(
            "{}: {}",
            args.fleet.display(),
            msgs.join("; ")
        )));
    }
    Ok((fleet, state, signal))
}

fn parse_policy(text: &str, fleet: &Fleet) -> Result<PolicyKind, Failure> {
    let text = text.trim();
    if let Some(order) = text.strip_prefix("priority:") {
        let order = match order {
            "asc" => capacity_order(fleet, true),
            "desc" => capacity_order(fleet, false),
            list => list
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<Result<Vec<usize>, _>>()
                .map_err(|_| {
                    Failure::Input(format!(
                        "bad priority order {list:?}: expected store indexes like priority:2,0,1"
                    ))
                })?,
        };
        return Ok(PolicyKind::PriorityGreedy(order));
    }
    match text {
        "ggddf" => Ok(PolicyKind::Ggddf),
        "ggcdf" => Ok(PolicyKind::Ggcdf),
        "combined" => Ok(PolicyKind::Combined),
        "reverse-ggddf" => Ok(PolicyKind::ReverseGgddf),
        other => Err(Failure::Input(format!(
            "unknown policy {other:?}; expected ggddf, ggcdf, combined, reverse-ggddf, \
             priority:asc, priority:desc, or priority:<i,j,k>"
        ))),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (fleet, state, signal) = load_instance(&args.instance)?;
    let policy = parse_policy(&args.policy, &fleet)?;
    let config = SimConfig {
        eps: args.instance.tolerance,
        max_events: None,
    };
    let report = simulate(&fleet, &state, &signal, &policy, &config).map_err(map_sim)?;
    let summary = report_to_text(&fleet, &report);
    let trajectory = write_out(
        &args.out_dir,
        "trajectory.csv",
        &trajectory_to_csv(&fleet, &report.trajectory),
    )?;
    let report_path = write_out(&args.out_dir, "report.txt", &summary)?;
    print!("{summary}");
    println!(
        "wrote {} and {}",
        trajectory.display(),
        report_path.display()
    );
    Ok(())
}

fn cmd_transform(args: TransformArgs) -> Result<(), Failure> {
    let (fleet, state, signal) = load_instance(&args.instance)?;
    let eps = args.instance.tolerance;
    let at = args.at.unwrap_or_else(|| signal.start());
    if at < signal.start() || at >= signal.horizon() {
        return Err(Failure::Input(format!(
            "--at {at} lies outside the signal domain [{}, {}) h",
            signal.start(),
            signal.horizon()
        )));
    }
    let state = FleetState::new(at, state.energies);
    let e_s = store_transform(&fleet, &state, eps);
    let e_d = demand_transform(&signal, at, signal.horizon(), eps).map_err(input)?;
    let store_path = write_out(
        &args.out_dir,
        "store_transform.csv",
        &transform_to_csv(&e_s),
    )?;
    let demand_path = write_out(
        &args.out_dir,
        "demand_transform.csv",
        &transform_to_csv(&e_d),
    )?;
    let (power, gap) = max_gap(&e_d, &e_s);
    println!("max gap: {gap} MWh at p = {power} MW");
    println!(
        "wrote {} and {}",
        store_path.display(),
        demand_path.display()
    );
    Ok(())
}

fn cmd_minunserved(args: MinUnservedArgs) -> Result<(), Failure> {
    let (fleet, state, signal) = load_instance(&args.instance)?;
    let eps = args.instance.tolerance;
    let negative = !signal
        .restricted(state.time, signal.horizon())
        .map_err(input)?
        .is_nonnegative(eps);
    if negative && !args.oracle {
        return Err(Failure::Input(
            "the transform bound needs nonnegative demand; rerun with --oracle for mixed-sign signals"
                .into(),
        ));
    }
    if !negative {
        let e_s = store_transform(&fleet, &state, eps);
        let e_d = demand_transform(&signal, state.time, signal.horizon(), eps).map_err(input)?;
        let (power, gap) = max_gap(&e_d, &e_s);
        println!("min unserved energy (no cross-charging): {gap} MWh");
        if gap > eps {
            println!("witness power: {power} MW");
        }
    }
    if args.oracle {
        let problem =
            GridProblem::from_signal(&fleet, &state, &signal, args.cross, Objective::MinUnserved)
                .map_err(map_oracle)?;
        let solution = problem.solve().map_err(map_oracle)?;
        let mode = if args.cross {
            "cross-charging allowed"
        } else {
            "no cross-charging"
        };
        println!("grid oracle ({mode}): {} MWh unserved", solution.unserved);
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let theorem = Theorem::from_number(args.theorem).ok_or_else(|| {
        Failure::Input(format!(
            "--theorem {} is out of range; claims are numbered 1 through 5",
            args.theorem
        ))
    })?;
    if let (Some(fleet_path), Some(signal_path)) = (&args.fleet, &args.signal) {
        let instance_args = InstanceArgs {
            fleet: fleet_path.clone(),
            signal: signal_path.clone(),
            horizon: None,
            tolerance: args.tolerance,
        };
        let (fleet, initial, signal) = load_instance(&instance_args)?;
        let inst = Instance {
            fleet,
            initial,
            signal,
        };
        return match verify_theorem(theorem, &inst, args.tolerance).map_err(map_verify)? {
            Verdict::Pass => {
                println!("{theorem}: holds on the given instance");
                Ok(())
            }
            Verdict::Fail { detail } => {
                println!("{theorem}: FAILED on the given instance: {detail}");
                Err(Failure::ClaimFailed)
            }
        };
    }
    let summary =
        run_trials(theorem, args.trials, args.seed, args.tolerance).map_err(map_verify)?;
    report_summary(&summary, theorem, args.seed, &args.out_dir)
}

fn report_summary(
    summary: &TrialSummary,
    theorem: Theorem,
    seed: u64,
    out_dir: &Path,
) -> Result<(), Failure> {
    println!(
        "{theorem}: {}/{} trials passed (seed {seed})",
        summary.passed(),
        summary.trials
    );
    if summary.all_passed() {
        return Ok(());
    }
    for cx in &summary.failures {
        let tag = format!("theorem{}-trial{}", theorem.number(), cx.trial);
        let fleet = write_out(
            out_dir,
            &format!("{tag}-fleet.toml"),
            &fleet_to_toml(&cx.instance.fleet, &cx.instance.initial.energies),
        )?;
        let signal = write_out(
            out_dir,
            &format!("{tag}-signal.csv"),
            &signal_to_csv(&cx.instance.signal),
        )?;
        println!("trial {} FAILED: {}", cx.trial, cx.detail);
        println!(
            "  replay: storefleet verify --theorem {} --fleet {} --signal {}",
            theorem.number(),
            fleet.display(),
            signal.display()
        );
    }
    Err(Failure::ClaimFailed)
}

/// Table cells drop sub-microunit digits: differences below the solver
/// tolerance are accumulation noise, not outcomes worth comparing.
fn table_cell(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let (fleet, state, signal) = load_instance(&args.instance)?;
    let names: Vec<String> = if args.policy.is_empty() {
        ["ggddf", "priority:asc", "priority:desc", "reverse-ggddf"]
            .map(String::from)
            .to_vec()
    } else {
        args.policy.clone()
    };
    let config = SimConfig {
        eps: args.instance.tolerance,
        max_events: None,
    };
    println!(
        "{:<22} {:>14} {:>13} {:>16}",
        "policy", "unserved_mwh", "spilled_mwh", "first_failure_h"
    );
    for name in names {
        let policy = parse_policy(&name, &fleet)?;
        let report = simulate(&fleet, &state, &signal, &policy, &config).map_err(map_sim)?;
        let failure = report
            .first_failure_time
            .map_or_else(|| "none".to_string(), table_cell);
        println!(
            "{:<22} {:>14} {:>13} {:>16}",
            name,
            table_cell(report.total_unserved),
            table_cell(report.total_spilled),
            failure
        );
    }
    Ok(())
}
