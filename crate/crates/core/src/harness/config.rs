//! Run configuration loaded from TOML with `[cell]`, `[traffic]`, `[agent]`
//! and `[run]` sections. Every field has a default, so an empty file is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::{AgentConfig, FeatureScaler, Range};
use crate::phy::{CellConfig, McsTable};
use crate::seed::fnv1a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// UEs deployed per admission event.
    pub num_ues: usize,
    pub min_applicants: usize,
    pub max_applicants: usize,
    /// Smallest number of already active UEs.
    pub min_active: usize,
    /// Packet sizes, in units of `bits_per_unit` bits.
    pub packet_sizes: Vec<f64>,
    pub bits_per_unit: f64,
    /// Mean inter-arrival times in TTIs; the arrival rate is the reciprocal.
    pub inter_arrival_ttis: Vec<f64>,
    pub delay_bounds: Vec<u32>,
    pub reliability_target: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            num_ues: 10,
            min_applicants: 1,
            max_applicants: 3,
            min_active: 2,
            packet_sizes: (1..=20).map(|i| i as f64 * 0.25).collect(),
            bits_per_unit: 8.0,
            inter_arrival_ttis: vec![1.0, 2.0, 3.0],
            delay_bounds: vec![1, 2, 3, 4, 5],
            reliability_target: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// TTIs per Monte Carlo rollout.
    pub rollout_ttis: u64,
    /// TTIs of CSI used to estimate each UE's long-term SINR.
    pub measurement_ttis: u64,
    pub train_events: usize,
    pub eval_events: usize,
    /// Wilson confidence multiplier.
    pub beta: f64,
    /// Abort when more than this share of generated events is filtered.
    pub max_filtered_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rollout_ttis: 3000,
            measurement_ttis: 100,
            train_events: 1500,
            eval_events: 300,
            beta: crate::metrics::DEFAULT_BETA,
            max_filtered_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub cell: CellConfig,
    pub traffic: TrafficConfig,
    pub agent: AgentConfig,
    pub run: RunConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Long-window settings: 99.9% target over 30000 TTIs.
    pub fn paper_scale(mut self) -> Self {
        self.traffic.reliability_target = 0.999;
        self.run.rollout_ttis = 30_000;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.cell.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.agent.validate().map_err(HarnessError::Config)?;
        let t = &self.traffic;
        if t.min_applicants == 0 || t.min_applicants > t.max_applicants {
            return bad("traffic: need 1 <= min_applicants <= max_applicants".into());
        }
        if t.max_applicants > self.agent.max_applicants {
            return bad(format!(
                "traffic.max_applicants {} exceeds agent.max_applicants {}",
                t.max_applicants, self.agent.max_applicants
            ));
        }
        if t.max_applicants + t.min_active > t.num_ues {
            return bad("traffic: max_applicants + min_active exceeds num_ues".into());
        }
        if t.packet_sizes.is_empty() || t.packet_sizes.iter().any(|&b| !(b > 0.0)) {
            return bad("traffic.packet_sizes must be non-empty and positive".into());
        }
        if !(t.bits_per_unit > 0.0) {
            return bad("traffic.bits_per_unit must be positive".into());
        }
        if t.inter_arrival_ttis.is_empty() || t.inter_arrival_ttis.iter().any(|&x| !(x >= 1.0)) {
            return bad("traffic.inter_arrival_ttis must be non-empty and >= 1".into());
        }
        if t.delay_bounds.is_empty() || t.delay_bounds.contains(&0) {
            return bad("traffic.delay_bounds must be non-empty and >= 1".into());
        }
        if !(t.reliability_target > 0.0 && t.reliability_target < 1.0) {
            return bad("traffic.reliability_target must lie in (0, 1)".into());
        }
        let r = &self.run;
        if r.rollout_ttis == 0 || r.measurement_ttis == 0 {
            return bad("run: rollout_ttis and measurement_ttis must be positive".into());
        }
        if !(r.beta >= 0.0) {
            return bad("run.beta must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&r.max_filtered_fraction) {
            return bad("run.max_filtered_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// FNV-1a of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Feature bounds: SINR spans the MCS thresholds, traffic features span
    /// the configured value sets.
    pub fn feature_scaler(&self, mcs: &McsTable) -> FeatureScaler {
        let (lo, hi) = mcs.sinr_span_db();
        let span = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            Range::new(
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let t = &self.traffic;
        FeatureScaler {
            sinr_db: Range::new(lo, hi),
            packet_size: span(&mut t.packet_sizes.iter().copied()),
            arrival_rate: span(&mut t.inter_arrival_ttis.iter().map(|x| 1.0 / x)),
            delay_bound: span(&mut t.delay_bounds.iter().map(|&x| x as f64)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.traffic.packet_sizes.len(), 20);
        assert_eq!(c.traffic.packet_sizes[19], 5.0);
    }

    #[test]
    fn round_trip_through_toml() {
        let c = Config::default().paper_scale();
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(Config::default().hash(), c.hash());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(Config::from_toml_str("[run]\nbogus = 1\n").is_err());
        assert!(Config::from_toml_str("[traffic]\nreliability_target = 1.0\n").is_err());
        assert!(Config::from_toml_str("[cell]\nnum_rbgs = 4\n").is_err());
    }

    #[test]
    fn default_scaler_bounds() {
        let s = Config::default().feature_scaler(&McsTable::default());
        assert_eq!((s.sinr_db.min, s.sinr_db.max), (-6.7, 22.7));
        assert_eq!((s.packet_size.min, s.packet_size.max), (0.25, 5.0));
        assert!((s.arrival_rate.min - 1.0 / 3.0).abs() < 1e-15 && s.arrival_rate.max == 1.0);
        assert_eq!((s.delay_bound.min, s.delay_bound.max), (1.0, 5.0));
    }
}
