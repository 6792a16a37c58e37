//! Event log, summary and scatter files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::regret::{cumulative_regret, final_third_slope, linear_fit};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Proposed,
    Random,
    NoAdmission,
    Oracle,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::Random => "random",
            Policy::NoAdmission => "no-admission",
            Policy::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Policy::Proposed),
            "random" => Ok(Policy::Random),
            "no-admission" => Ok(Policy::NoAdmission),
            "oracle" => Ok(Policy::Oracle),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

/// One policy's outcome on one retained event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub event_id: u64,
    pub policy: Policy,
    pub k_prime: usize,
    pub k_active: usize,
    pub chosen_arm: usize,
    /// Agent rewards per arm; empty for baselines.
    pub predicted_rewards: Vec<f64>,
    pub cell_reliable: bool,
    pub reward: f64,
    pub dropping_rate: f64,
    pub utilization: f64,
    /// Realized reward of every arm; empty without the oracle.
    pub oracle_rewards: Vec<f64>,
    pub qos_fulfillment: Option<f64>,
    pub regret: Option<f64>,
    pub epsilon: Option<f64>,
}

pub const EVENT_COLUMNS: [&str; 14] = [
    "event_id",
    "policy",
    "k_prime",
    "k_active",
    "chosen_arm",
    "predicted_rewards",
    "cell_reliability",
    "reward",
    "dropping_rate",
    "utilization",
    "oracle_rewards",
    "qos_fulfillment",
    "regret",
    "epsilon",
];

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl EventRow {
    fn to_record(&self) -> [String; 14] {
        [
            self.event_id.to_string(),
            self.policy.to_string(),
            self.k_prime.to_string(),
            self.k_active.to_string(),
            self.chosen_arm.to_string(),
            join(&self.predicted_rewards),
            u8::from(self.cell_reliable).to_string(),
            self.reward.to_string(),
            self.dropping_rate.to_string(),
            self.utilization.to_string(),
            join(&self.oracle_rewards),
            opt(self.qos_fulfillment),
            opt(self.regret),
            opt(self.epsilon),
        ]
    }

    fn from_record(r: &csv::StringRecord, line: u64) -> Result<Self, HarnessError> {
        let err = |m: String| HarnessError::Parse { line, message: m };
        if r.len() != EVENT_COLUMNS.len() {
            return Err(err(format!("expected {} fields, found {}", EVENT_COLUMNS.len(), r.len())));
        }
        fn num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {name}: {s:?}"))
        }
        fn list(s: &str, name: &str) -> Result<Vec<f64>, String> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|x| num(x, name)).collect()
        }
        fn maybe(s: &str, name: &str) -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        }
        let parse = || -> Result<Self, String> {
            Ok(Self {
                event_id: num(&r[0], "event_id")?,
                policy: r[1].parse()?,
                k_prime: num(&r[2], "k_prime")?,
                k_active: num(&r[3], "k_active")?,
                chosen_arm: num(&r[4], "chosen_arm")?,
                predicted_rewards: list(&r[5], "predicted_rewards")?,
                cell_reliable: match &r[6] {
                    "1" => true,
                    "0" => false,
                    other => return Err(format!("bad cell_reliability: {other:?}")),
                },
                reward: num(&r[7], "reward")?,
                dropping_rate: num(&r[8], "dropping_rate")?,
                utilization: num(&r[9], "utilization")?,
                oracle_rewards: list(&r[10], "oracle_rewards")?,
                qos_fulfillment: maybe(&r[11], "qos_fulfillment")?,
                regret: maybe(&r[12], "regret")?,
                epsilon: maybe(&r[13], "epsilon")?,
            })
        };
        parse().map_err(err)
    }
}

pub fn write_events<W: Write>(rows: &[EventRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENT_COLUMNS)?;
    for row in rows {
        out.write_record(row.to_record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(r: R) -> Result<Vec<EventRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers().map_err(|e| HarnessError::Parse { line: 1, message: e.to_string() })?;
    if headers.iter().ne(EVENT_COLUMNS) {
        return Err(HarnessError::Parse { line: 1, message: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| HarnessError::Parse { line, message: e.to_string() })?;
        rows.push(EventRow::from_record(&rec, line)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub events: usize,
    pub mean_cell_reliability: f64,
    pub mean_reward: f64,
    pub mean_dropping_rate: f64,
    pub mean_utilization: f64,
    pub mean_qos_fulfillment: Option<f64>,
    pub cumulative_regret: Option<f64>,
    pub final_third_regret_slope: Option<f64>,
    pub regret_linear_r2: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregates per policy, in a stable order.
pub fn summarize(rows: &[EventRow]) -> BTreeMap<String, PolicySummary> {
    let mut by_policy: BTreeMap<Policy, Vec<&EventRow>> = BTreeMap::new();
    for r in rows {
        by_policy.entry(r.policy).or_default().push(r);
    }
    by_policy
        .into_iter()
        .map(|(policy, rs)| {
            let qos: Vec<f64> = rs.iter().filter_map(|r| r.qos_fulfillment).collect();
            let regrets: Option<Vec<f64>> = rs.iter().map(|r| r.regret).collect();
            let (cumulative, slope, r2) = match regrets {
                Some(per_event) if !per_event.is_empty() => {
                    let cum = cumulative_regret(&per_event);
                    let xs: Vec<f64> = (1..=cum.len()).map(|i| i as f64).collect();
                    (cum.last().copied(), final_third_slope(&cum), linear_fit(&xs, &cum).map(|f| f.r2))
                }
                _ => (None, None, None),
            };
            let summary = PolicySummary {
                events: rs.len(),
                mean_cell_reliability: mean(rs.iter().map(|r| if r.cell_reliable { 1.0 } else { 0.0 })),
                mean_reward: mean(rs.iter().map(|r| r.reward)),
                mean_dropping_rate: mean(rs.iter().map(|r| r.dropping_rate)),
                mean_utilization: mean(rs.iter().map(|r| r.utilization)),
                mean_qos_fulfillment: if qos.is_empty() { None } else { Some(mean(qos.into_iter())) },
                cumulative_regret: cumulative,
                final_third_regret_slope: slope,
                regret_linear_r2: r2,
            };
            (policy.to_string(), summary)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub config_hash: String,
    pub seed: u64,
    pub generated_events: u64,
    pub filtered_events: u64,
    pub retained_events: u64,
    pub policies: BTreeMap<String, PolicySummary>,
}

pub fn scatter_rows(rows: &[EventRow]) -> Vec<(u64, Policy, f64, Option<f64>)> {
    rows.iter()
        .filter(|r| matches!(r.policy, Policy::Proposed | Policy::NoAdmission))
        .map(|r| (r.event_id, r.policy, r.utilization, r.qos_fulfillment))
        .collect()
}

pub fn write_scatter<W: Write>(rows: &[EventRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["event_id", "policy", "utilization", "qos_fulfillment"])?;
    for (id, policy, u, q) in scatter_rows(rows) {
        out.write_record([id.to_string(), policy.to_string(), u.to_string(), opt(q)])?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?))
}

pub fn save_events(path: &Path, rows: &[EventRow]) -> Result<(), HarnessError> {
    write_events(rows, create(path)?).map_err(|e| HarnessError::csv(path, e))
}

pub fn load_events(path: &Path) -> Result<Vec<EventRow>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_events(file)
}

pub fn save_scatter(path: &Path, rows: &[EventRow]) -> Result<(), HarnessError> {
    write_scatter(rows, create(path)?).map_err(|e| HarnessError::csv(path, e))
}

pub fn save_summary(path: &Path, summary: &RunSummary) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| HarnessError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}
