//! Reliability estimation and evaluation metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::UeId;

/// Two-sided 99% normal quantile, rounded as is customary.
pub const DEFAULT_BETA: f64 = 2.58;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("UE {0} observed no packets")]
    NoTraffic(UeId),
    #[error("UE {0} is not part of the rollout")]
    UnknownUe(UeId),
    #[error("Wilson interval needs at least one trial")]
    NoTrials,
    #[error("confidence constant must be non-negative, got {0}")]
    NegativeBeta(f64),
    #[error("served set is empty")]
    EmptyServedSet,
    #[error("no arm satisfies any UE; fulfillment is undefined")]
    UndefinedFulfillment,
    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
}

/// Delivery counts of one served UE over the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeDelivery {
    pub ue: UeId,
    /// Packets delivered within the delay bound.
    pub delivered: u64,
    /// Packets dropped at the deadline or delivered late.
    pub failed: u64,
}

impl UeDelivery {
    pub fn observed(&self) -> u64 {
        self.delivered + self.failed
    }

    /// Tally per-packet delays; `None` marks a packet that was never delivered.
    pub fn from_delays<I: IntoIterator<Item = Option<u32>>>(ue: UeId, delays: I, bound: u32) -> Self {
        let (mut delivered, mut failed) = (0, 0);
        for d in delays {
            match d {
                Some(d) if d <= bound => delivered += 1,
                _ => failed += 1,
            }
        }
        Self { ue, delivered, failed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub ues: Vec<UeDelivery>,
    pub scheduled_rbgs: u64,
    pub total_rbgs: u64,
}

impl RolloutReport {
    pub fn delivery(&self, ue: UeId) -> Result<&UeDelivery, MetricsError> {
        self.ues.iter().find(|d| d.ue == ue).ok_or(MetricsError::UnknownUe(ue))
    }
}

/// Monte Carlo estimate of P(delay <= bound): the delivered fraction.
pub fn mc_reliability(report: &RolloutReport, ue: UeId) -> Result<f64, MetricsError> {
    let d = report.delivery(ue)?;
    if d.observed() == 0 {
        return Err(MetricsError::NoTraffic(ue));
    }
    Ok(d.delivered as f64 / d.observed() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
}

/// Wilson score interval for `successes` out of `successes + failures`.
pub fn wilson_interval(successes: u64, failures: u64, beta: f64) -> Result<WilsonInterval, MetricsError> {
    let n = successes + failures;
    if n == 0 {
        return Err(MetricsError::NoTrials);
    }
    if !(beta >= 0.0) {
        return Err(MetricsError::NegativeBeta(beta));
    }
    let (s, f, n) = (successes as f64, failures as f64, n as f64);
    let b2 = beta * beta;
    let denom = n + b2;
    let centre = (s + 0.5 * b2) / denom;
    let half = beta / denom * (s * f / n + b2 / 4.0).sqrt();
    Ok(WilsonInterval { lower: (centre - half).clamp(0.0, 1.0), upper: (centre + half).clamp(0.0, 1.0), beta })
}

/// 1 iff the lower Wilson limit reaches the target.
pub fn ue_reliability_indicator(interval: &WilsonInterval, target: f64) -> bool {
    interval.lower >= target
}

/// Indicator straight from counts. A UE that saw no packets has no evidence
/// of violation and counts as satisfied.
pub fn delivery_indicator(d: &UeDelivery, beta: f64, target: f64) -> bool {
    match wilson_interval(d.delivered, d.failed, beta) {
        Ok(interval) => ue_reliability_indicator(&interval, target),
        Err(_) => true,
    }
}

/// Product of the served UEs' indicators; the empty product is 1.
pub fn cell_reliability<I: IntoIterator<Item = bool>>(indicators: I) -> bool {
    indicators.into_iter().all(|x| x)
}

/// (admitted / applicants) x cell reliability.
pub fn reward(cell_reliable: bool, admitted: usize, applicants: usize) -> f64 {
    debug_assert!(applicants >= 1 && admitted <= applicants);
    if cell_reliable && applicants > 0 {
        admitted as f64 / applicants as f64
    } else {
        0.0
    }
}

/// Share of served UEs missing their reliability target.
pub fn dropping_rate(indicators: &[bool]) -> Result<f64, MetricsError> {
    if indicators.is_empty() {
        return Err(MetricsError::EmptyServedSet);
    }
    let failing = indicators.iter().filter(|&&x| !x).count();
    Ok(failing as f64 / indicators.len() as f64)
}

/// Satisfied UEs under the chosen arm relative to the best arm. Needs the
/// satisfied count of every arm, which only an oracle has.
pub fn qos_fulfillment_rate(satisfied_per_arm: &[usize], chosen: usize) -> Result<f64, MetricsError> {
    let chosen_count = *satisfied_per_arm
        .get(chosen)
        .ok_or(MetricsError::ArmOutOfRange { arm: chosen, arms: satisfied_per_arm.len() })?;
    let best = satisfied_per_arm.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return Err(MetricsError::UndefinedFulfillment);
    }
    Ok(chosen_count as f64 / best as f64)
}

pub fn resource_utilization(report: &RolloutReport) -> f64 {
    if report.total_rbgs == 0 {
        return 0.0;
    }
    report.scheduled_rbgs as f64 / report.total_rbgs as f64
}
