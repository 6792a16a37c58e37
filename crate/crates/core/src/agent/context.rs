//! Arm and network contexts. Each UE contributes `[sinr, size, rate, bound]`;
//! the cell contributes `[utilization, mean sinr, mean size, mean rate, mean
//! bound]` over the already active UEs. All features are min-max scaled.

use serde::{Deserialize, Serialize};

use super::arms::{sinr_order, Arm};
use super::AgentError;
use crate::nn::FeatureKind;
use crate::traffic::UeProfile;

pub const UE_FEATURES: usize = 4;
pub const CELL_FEATURES: usize = 5;

pub const UE_KINDS: [FeatureKind; UE_FEATURES] =
    [FeatureKind::Sinr, FeatureKind::PacketSize, FeatureKind::ArrivalRate, FeatureKind::DelayBound];

pub const CELL_KINDS: [FeatureKind; CELL_FEATURES] = [
    FeatureKind::Utilization,
    FeatureKind::Sinr,
    FeatureKind::PacketSize,
    FeatureKind::ArrivalRate,
    FeatureKind::DelayBound,
];

/// Feature kinds of a context admitting `admitted` applicants.
pub fn context_kinds(admitted: usize) -> Vec<FeatureKind> {
    let mut kinds = Vec::with_capacity(UE_FEATURES * admitted + CELL_FEATURES);
    for _ in 0..admitted {
        kinds.extend(UE_KINDS);
    }
    kinds.extend(CELL_KINDS);
    kinds
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// Clamp into `[0, 1]`; a degenerate range maps everything to 0.
    pub fn scale(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Fixed min-max bounds for each UE feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub sinr_db: Range,
    pub packet_size: Range,
    pub arrival_rate: Range,
    pub delay_bound: Range,
}

impl FeatureScaler {
    pub fn ue_features(&self, ue: &UeProfile) -> [f64; UE_FEATURES] {
        [
            self.sinr_db.scale(ue.avg_sinr_db),
            self.packet_size.scale(ue.packet_size),
            self.arrival_rate.scale(ue.arrival_rate),
            self.delay_bound.scale(ue.delay_bound as f64),
        ]
    }

    /// Cell features; averages over an empty active set are 0.
    pub fn cell_features(&self, utilization: f64, actives: &[UeProfile]) -> [f64; CELL_FEATURES] {
        let mut out = [utilization.clamp(0.0, 1.0), 0.0, 0.0, 0.0, 0.0];
        if actives.is_empty() {
            return out;
        }
        for ue in actives {
            for (o, f) in out[1..].iter_mut().zip(self.ue_features(ue)) {
                *o += f;
            }
        }
        for o in &mut out[1..] {
            *o /= actives.len() as f64;
        }
        out
    }
}

/// Input of the network serving one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmContext {
    pub arm: usize,
    pub features: Vec<f64>,
}

impl ArmContext {
    pub fn kinds(&self) -> Vec<FeatureKind> {
        context_kinds(self.arm)
    }
}

/// All applicants followed by the cell features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkContext {
    pub features: Vec<f64>,
}

pub fn build_network_context(
    scaler: &FeatureScaler,
    applicants: &[UeProfile],
    cell: &[f64; CELL_FEATURES],
) -> NetworkContext {
    let mut features = Vec::with_capacity(UE_FEATURES * applicants.len() + CELL_FEATURES);
    for &k in &sinr_order(applicants) {
        features.extend(scaler.ue_features(&applicants[k]));
    }
    features.extend(cell);
    NetworkContext { features }
}

/// Admitted applicants in descending-SINR order, then the cell features.
pub fn build_arm_context(
    scaler: &FeatureScaler,
    arm: &Arm,
    applicants: &[UeProfile],
    cell: &[f64; CELL_FEATURES],
) -> Result<ArmContext, AgentError> {
    if arm.index == 0 {
        return Err(AgentError::NoContextForEmptyArm);
    }
    if arm.decision.len() != applicants.len() {
        return Err(AgentError::DecisionShape { expected: applicants.len(), actual: arm.decision.len() });
    }
    let mut features = Vec::with_capacity(UE_FEATURES * arm.index + CELL_FEATURES);
    for &k in &sinr_order(applicants) {
        if arm.decision[k] {
            features.extend(scaler.ue_features(&applicants[k]));
        }
    }
    features.extend(cell);
    Ok(ArmContext { arm: arm.index, features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::arms::build_arms;

    fn scaler() -> FeatureScaler {
        FeatureScaler {
            sinr_db: Range::new(-6.7, 22.7),
            packet_size: Range::new(0.25, 5.0),
            arrival_rate: Range::new(1.0 / 3.0, 1.0),
            delay_bound: Range::new(1.0, 5.0),
        }
    }

    fn ue(id: u32, sinr: f64, size: f64) -> UeProfile {
        UeProfile::new(id, size, 8.0, 1.0, 5, 0.99, sinr).unwrap()
    }

    #[test]
    fn context_lengths() {
        let apps = [ue(0, 1.0, 1.0), ue(1, 2.0, 2.0), ue(2, 3.0, 3.0)];
        let arms = build_arms(&apps, 3).unwrap();
        let cell = scaler().cell_features(0.4, &[]);
        for arm in &arms[1..] {
            let ctx = build_arm_context(&scaler(), arm, &apps, &cell).unwrap();
            assert_eq!(ctx.features.len(), 4 * arm.index + 5);
            assert_eq!(ctx.kinds().len(), ctx.features.len());
        }
        assert!(matches!(build_arm_context(&scaler(), &arms[0], &apps, &cell), Err(AgentError::NoContextForEmptyArm)));
        assert_eq!(build_network_context(&scaler(), &apps, &cell).features.len(), 17);
    }

    #[test]
    fn empty_active_set_leaves_only_utilization() {
        assert_eq!(scaler().cell_features(0.7, &[]), [0.7, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn admitted_features_in_sinr_order() {
        let apps = [ue(0, -6.7, 0.25), ue(1, 22.7, 5.0)];
        let arms = build_arms(&apps, 3).unwrap();
        let cell = scaler().cell_features(0.0, &[]);
        let ctx = build_arm_context(&scaler(), &arms[2], &apps, &cell).unwrap();
        assert_eq!(&ctx.features[..8], &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let ctx = build_arm_context(&scaler(), &arms[1], &apps, &cell).unwrap();
        assert_eq!(&ctx.features[..4], &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn cell_averages() {
        let actives = [ue(5, -6.7, 0.25), ue(6, 22.7, 5.0)];
        let c = scaler().cell_features(0.5, &actives);
        assert_eq!(c, [0.5, 0.5, 0.5, 1.0, 1.0]);
    }
}
