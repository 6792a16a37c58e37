use std::collections::VecDeque;

use super::{CellConfig, ChannelState};

/// Quantize down to the CQI grid.
pub fn quantize_db(value_db: f64, step_db: f64) -> f64 {
    (value_db / step_db).floor() * step_db
}

/// A periodic CSI report. Values are quantized effective SINRs measured
/// `report_tti - measured_tti` TTIs before the report was issued.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiReport {
    pub ue: usize,
    pub report_tti: u64,
    pub measured_tti: u64,
    pub rbg_sinr_db: Vec<f64>,
    pub wideband_sinr_db: f64,
}

impl CsiReport {
    /// A report with the same SINR on every RBG, handy for tests and for
    /// feeding externally known channel quality.
    pub fn flat(ue: usize, num_rbgs: usize, sinr_db: f64) -> Self {
        Self { ue, report_tti: 0, measured_tti: 0, rbg_sinr_db: vec![sinr_db; num_rbgs], wideband_sinr_db: sinr_db }
    }
}

/// Build the report due at `tti` from `delayed_state`, the channel as it was
/// at `tti - csi_delay` (clamped at 0). Returns `None` off the report cycle.
pub fn report_csi(cell: &CellConfig, delayed_state: &ChannelState, ue: usize, tti: u64) -> Option<CsiReport> {
    if tti % cell.csi_period != 0 {
        return None;
    }
    let step = cell.cqi_step_db;
    Some(CsiReport {
        ue,
        report_tti: tti,
        measured_tti: tti.saturating_sub(cell.csi_delay),
        rbg_sinr_db: (0..cell.num_rbgs).map(|g| quantize_db(delayed_state.rbg_sinr_db(cell, ue, g), step)).collect(),
        wideband_sinr_db: quantize_db(delayed_state.wideband_sinr_db(ue), step),
    })
}

/// Keeps just the channel snapshots needed to issue delayed reports.
#[derive(Debug, Clone)]
pub struct CsiFeedback {
    period: u64,
    delay: u64,
    snapshots: VecDeque<(u64, ChannelState)>,
}

impl CsiFeedback {
    pub fn new(cell: &CellConfig) -> Self {
        Self { period: cell.csi_period, delay: cell.csi_delay, snapshots: VecDeque::new() }
    }

    fn snapshot_needed(&self, tti: u64) -> bool {
        tti == 0 || (tti + self.delay) % self.period == 0
    }

    /// Call once per TTI with the current channel, before asking for reports.
    pub fn observe(&mut self, tti: u64, state: &ChannelState) {
        if self.snapshot_needed(tti) {
            self.snapshots.push_back((tti, state.clone()));
        }
        let horizon = tti.saturating_sub(self.delay);
        while self.snapshots.len() > 1 && self.snapshots[1].0 <= horizon {
            self.snapshots.pop_front();
        }
    }

    /// Reports for every UE at `tti`, or `None` off-cycle.
    pub fn reports(&self, cell: &CellConfig, tti: u64) -> Option<Vec<CsiReport>> {
        if tti % self.period != 0 {
            return None;
        }
        let measured = tti.saturating_sub(self.delay);
        let (_, state) =
            self.snapshots.iter().find(|(t, _)| *t == measured).expect("observe() must be called every TTI");
        Some((0..state.num_ues()).filter_map(|ue| report_csi(cell, state, ue, tti)).collect())
    }
}
