//! File formats: fleet configs (TOML), demand signals (CSV), and the CSV
//! and text emitters used by the command-line tool.
//!
//! Fleet config schema, one `[[store]]` table per store:
//!
//! ```toml
//! [[store]]
//! id = "s1"
//! capacity_mwh = 100.0
//! max_discharge_mw = 100.0
//! max_charge_mw = 20.0     # optional, default 0 (discharge-only)
//! efficiency = 0.9         # optional, default 1
//! initial_energy_mwh = 50.0 # optional, default full
//! ```
//!
//! Signal schema, two columns with an optional header row:
//!
//! ```csv
//! time_h,demand_mw
//! 0,200
//! 2,500
//! 3,100
//! 4,0
//! ```
//!
//! Each row sets the demand from its time to the next row's time. The
//! first time must be 0; the last row only marks the horizon and its value
//! is ignored. All numbers use `.` as the decimal separator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Fleet, StepSignal, Store};
use crate::sim::{DispatchTrajectory, SimReport};
use crate::transforms::PwlConvex;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("fleet config: {0}")]
    FleetParse(#[from] toml::de::Error),
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreDoc {
    id: String,
    capacity_mwh: f64,
    max_discharge_mw: f64,
    #[serde(default)]
    max_charge_mw: f64,
    #[serde(default = "one")]
    efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_energy_mwh: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetDoc {
    #[serde(default)]
    store: Vec<StoreDoc>,
}

/// A parsed fleet config: the fleet plus the configured starting energies
/// (full for stores that omit `initial_energy_mwh`).
#[derive(Debug, Clone)]
pub struct FleetFile {
    pub fleet: Fleet,
    pub initial_energies: Vec<f64>,
}

/// Parses a fleet config. Syntactic only: range checks belong to
/// [`crate::model::validate_fleet`] and [`crate::model::validate_state`].
pub fn parse_fleet_toml(text: &str) -> Result<FleetFile, IoError> {
    let doc: FleetDoc = toml::from_str(text)?;
    let mut stores = Vec::with_capacity(doc.store.len());
    let mut energies = Vec::with_capacity(doc.store.len());
    for s in doc.store {
        energies.push(s.initial_energy_mwh.unwrap_or(s.capacity_mwh));
        stores.push(Store {
            id: s.id,
            capacity: s.capacity_mwh,
            max_discharge: s.max_discharge_mw,
            max_charge: s.max_charge_mw,
            efficiency: s.efficiency,
        });
    }
    Ok(FleetFile {
        fleet: Fleet::new(stores),
        initial_energies: energies,
    })
}

/// Renders a fleet and its starting energies back into the config schema.
/// Every field is written explicitly so the file replays byte-for-byte
/// deterministically.
pub fn fleet_to_toml(fleet: &Fleet, initial_energies: &[f64]) -> String {
    let doc = FleetDoc {
        store: fleet
            .stores
            .iter()
            .zip(initial_energies)
            .map(|(s, &e)| StoreDoc {
                id: s.id.clone(),
                capacity_mwh: s.capacity,
                max_discharge_mw: s.max_discharge,
                max_charge_mw: s.max_charge,
                efficiency: s.efficiency,
                initial_energy_mwh: Some(e),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("fleet docs always serialize")
}

/// Parses a demand signal from two-column CSV.
pub fn parse_signal_csv(text: &str) -> Result<StepSignal, IoError> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut saw_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(IoError::Csv {
                line,
                message: format!("expected two comma-separated fields, got {}", fields.len()),
            });
        }
        if !saw_data && fields[0].parse::<f64>().is_err() {
            saw_data = true; // header row; only tolerated before any data
            continue;
        }
        saw_data = true;
        let parse = |field: &str| -> Result<f64, IoError> {
            field.parse::<f64>().map_err(|_| IoError::Csv {
                line,
                message: format!("invalid number {field:?}"),
            })
        };
        times.push(parse(fields[0])?);
        values.push(parse(fields[1])?);
    }
    if times.len() < 2 {
        return Err(IoError::Invalid(
            "a signal needs at least two rows: a start time and the horizon".into(),
        ));
    }
    if times[0] != 0.0 {
        return Err(IoError::Invalid(format!(
            "the first time must be 0 h, got {}",
            times[0]
        )));
    }
    values.pop(); // last row only marks the horizon
    StepSignal::new(times, values).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Renders a signal back into the CSV schema; the horizon row carries a 0.
pub fn signal_to_csv(signal: &StepSignal) -> String {
    let mut out = String::from("time_h,demand_mw\n");
    for (t, v) in signal
        .breakpoints()
        .iter()
        .zip(signal.values().iter().chain(std::iter::once(&0.0)))
    {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

/// Renders a trajectory as long-format CSV, one row per store per event.
pub fn trajectory_to_csv(fleet: &Fleet, trajectory: &DispatchTrajectory) -> String {
    let mut out =
        String::from("time_h,store_id,energy_mwh,rate_mw,cum_unserved_mwh,cum_spilled_mwh\n");
    for p in trajectory.points() {
        for (i, s) in fleet.stores.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.time, s.id, p.energies[i], p.rates.0[i], p.cum_unserved, p.cum_spilled
            ));
        }
    }
    out
}

/// Renders transform knots as CSV for plotting.
pub fn transform_to_csv(transform: &PwlConvex) -> String {
    let mut out = String::from("p_mw,e_mwh\n");
    for &(p, e) in transform.knots() {
        out.push_str(&format!("{p},{e}\n"));
    }
    out
}

/// Renders the run summary as key/value text.
pub fn report_to_text(fleet: &Fleet, report: &SimReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("total_unserved_mwh: {}\n", report.total_unserved));
    out.push_str(&format!("total_spilled_mwh: {}\n", report.total_spilled));
    match report.first_failure_time {
        Some(t) => out.push_str(&format!("first_failure_time_h: {t}\n")),
        None => out.push_str("first_failure_time_h: none\n"),
    }
    out.push_str(&format!("final_time_h: {}\n", report.final_state.time));
    for (s, e) in fleet.stores.iter().zip(&report.final_state.energies) {
        out.push_str(&format!("final_energy_mwh[{}]: {}\n", s.id, e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FleetState;
    use crate::policies::PolicyKind;
    use crate::sim::{simulate, SimConfig};

    #[test]
    fn fleet_toml_round_trips_with_defaults() {
        let text = r#"
            [[store]]
            id = "batt"
            capacity_mwh = 4.0
            max_discharge_mw = 2.0
            max_charge_mw = 1.0
            efficiency = 0.9
            initial_energy_mwh = 3.0

            [[store]]
            id = "uphill"
            capacity_mwh = 10.0
            max_discharge_mw = 5.0
        "#;
        let parsed = parse_fleet_toml(text).unwrap();
        assert_eq!(parsed.fleet.len(), 2);
        let batt = &parsed.fleet.stores[0];
        assert_eq!(batt.id, "batt");
        assert_eq!(batt.max_charge, 1.0);
        assert_eq!(batt.efficiency, 0.9);
        assert_eq!(parsed.initial_energies, vec![3.0, 10.0]);
        let uphill = &parsed.fleet.stores[1];
        assert_eq!(uphill.max_charge, 0.0);
        assert_eq!(uphill.efficiency, 1.0);

        let round =
            parse_fleet_toml(&fleet_to_toml(&parsed.fleet, &parsed.initial_energies)).unwrap();
        assert_eq!(round.fleet, parsed.fleet);
        assert_eq!(round.initial_energies, parsed.initial_energies);
    }

    #[test]
    fn fleet_toml_rejects_unknown_keys() {
        let text = r#"
            [[store]]
            id = "x"
            capacity_mwh = 1.0
            max_discharge_mw = 1.0
            capactiy_mwh = 2.0
        "#;
        let err = parse_fleet_toml(text).unwrap_err();
        assert!(err.to_string().contains("capactiy_mwh"), "{err}");
    }

    #[test]
    fn signal_csv_parses_with_and_without_header() {
        let with = "time_h,demand_mw\n0,200\n2,500\n3,100\n4,0\n";
        let without = "0,200\n\n2,500\n3,100\n4,123\n";
        for text in [with, without] {
            let s = parse_signal_csv(text).unwrap();
            assert_eq!(s.breakpoints(), &[0.0, 2.0, 3.0, 4.0]);
            assert_eq!(s.values(), &[200.0, 500.0, 100.0]);
        }
    }

    #[test]
    fn signal_csv_round_trips() {
        let s = StepSignal::new(vec![0.0, 1.5, 4.0], vec![2.5, -3.0]).unwrap();
        let round = parse_signal_csv(&signal_to_csv(&s)).unwrap();
        assert_eq!(round.breakpoints(), s.breakpoints());
        assert_eq!(round.values(), s.values());
    }

    #[test]
    fn signal_csv_errors_carry_line_numbers() {
        let err = parse_signal_csv("time_h,demand_mw\n0,200\n2,half\n4,0\n").unwrap_err();
        assert!(
            matches!(err, IoError::Csv { line: 3, .. }),
            "want line 3, got {err}"
        );
        let err = parse_signal_csv("0,200,9\n").unwrap_err();
        assert!(
            err.to_string().contains("two comma-separated fields"),
            "{err}"
        );
        let err = parse_signal_csv("0,200\n").unwrap_err();
        assert!(err.to_string().contains("at least two rows"), "{err}");
        let err = parse_signal_csv("1,200\n2,0\n").unwrap_err();
        assert!(err.to_string().contains("first time must be 0"), "{err}");
        let err = parse_signal_csv("0,200\n2,500\n2,0\n").unwrap_err();
        assert!(matches!(err, IoError::Invalid(_)), "{err}");
    }

    #[test]
    fn emitters_produce_the_documented_columns() {
        let fleet = Fleet::new(vec![
            Store::discharge_only("s1", 2.0, 2.0),
            Store::discharge_only("s2", 4.0, 1.0),
        ]);
        let signal = StepSignal::new(vec![0.0, 1.0, 2.0], vec![3.0, 0.0]).unwrap();
        let report = simulate(
            &fleet,
            &fleet.full_state(),
            &signal,
            &PolicyKind::Ggddf,
            &SimConfig::default(),
        )
        .unwrap();

        let csv = trajectory_to_csv(&fleet, &report.trajectory);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_h,store_id,energy_mwh,rate_mw,cum_unserved_mwh,cum_spilled_mwh"
        );
        assert_eq!(lines.next().unwrap(), "0,s1,2,2,0,0");
        assert_eq!(lines.next().unwrap(), "0,s2,4,1,0,0");
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 1 + 2 * report.trajectory.points().len());

        let text = report_to_text(&fleet, &report);
        assert!(text.contains("total_unserved_mwh: 0"), "{text}");
        assert!(text.contains("first_failure_time_h: none"), "{text}");
        assert!(text.contains("final_energy_mwh[s2]:"), "{text}");

        let transform =
            crate::transforms::store_transform(&fleet, &FleetState::new(0.0, vec![2.0, 4.0]), 1e-9);
        let knots = transform_to_csv(&transform);
        assert!(knots.starts_with("p_mw,e_mwh\n0,6\n"), "{knots}");
    }
}
