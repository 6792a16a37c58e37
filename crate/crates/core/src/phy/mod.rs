//! Radio link model: geometry, fading, CSI feedback and link adaptation.

mod channel;
mod csi;
mod mcs;

pub use channel::{complex_gaussian, ChannelState};
pub use csi::{quantize_db, report_csi, CsiFeedback, CsiReport};
pub use mcs::{achievable_rate, transport_block_outcome, BlerModel, McsEntry, McsTable, TbOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("{num_rbs} resource blocks cannot be split into {num_rbgs} equal groups")]
    UnevenRbgs { num_rbs: usize, num_rbgs: usize },
    #[error("invalid cell parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("MCS table must be strictly increasing in threshold and efficiency")]
    UnorderedMcsTable,
    #[error("MCS table is empty")]
    EmptyMcsTable,
}

/// Cell and radio parameters. Defaults reproduce the simulated URLLC slice:
/// 6 MHz at 30 kHz SCS, 15 RBs in 3 RBGs, 4-symbol mini-slot TTIs, 44 dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub num_rbs: usize,
    pub num_rbgs: usize,
    pub subcarriers_per_rb: usize,
    pub scs_hz: f64,
    pub tti_symbols: usize,
    pub tx_power_dbm: f64,
    /// Thermal noise power spectral density.
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub pathloss_exponent: f64,
    pub ue_speed_mps: f64,
    /// CSI report period in TTIs.
    pub csi_period: u64,
    /// Age of the channel snapshot carried by a report, in TTIs.
    pub csi_delay: u64,
    pub cqi_step_db: f64,
    /// Exponential averaging coefficient for the long-term SINR estimate.
    pub sinr_average_coefficient: f64,
    pub target_bler: f64,
    /// Logistic waterfall steepness (natural-log odds per dB).
    pub bler_slope_per_db: f64,
    /// Back-off subtracted from reported SINR before MCS selection.
    pub link_adaptation_margin_db: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 3.5e9,
            bandwidth_hz: 6.0e6,
            num_rbs: 15,
            num_rbgs: 3,
            subcarriers_per_rb: 12,
            scs_hz: 30.0e3,
            tti_symbols: 4,
            tx_power_dbm: 44.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            cell_radius_m: 250.0,
            min_distance_m: 10.0,
            pathloss_exponent: 3.7,
            ue_speed_mps: 1.0,
            csi_period: 5,
            csi_delay: 2,
            cqi_step_db: 1.0,
            sinr_average_coefficient: 0.05,
            target_bler: 0.1,
            bler_slope_per_db: 11.0f64.ln(),
            link_adaptation_margin_db: 2.0,
        }
    }
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

impl CellConfig {
    pub fn validate(&self) -> Result<(), PhyError> {
        if self.num_rbgs == 0 || self.num_rbs == 0 || self.num_rbs % self.num_rbgs != 0 {
            return Err(PhyError::UnevenRbgs { num_rbs: self.num_rbs, num_rbgs: self.num_rbgs });
        }
        let positive = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("scs_hz", self.scs_hz),
            ("cell_radius_m", self.cell_radius_m),
            ("min_distance_m", self.min_distance_m),
            ("pathloss_exponent", self.pathloss_exponent),
            ("cqi_step_db", self.cqi_step_db),
            ("bler_slope_per_db", self.bler_slope_per_db),
            ("csi_period", self.csi_period as f64),
            ("tti_symbols", self.tti_symbols as f64),
            ("subcarriers_per_rb", self.subcarriers_per_rb as f64),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PhyError::InvalidParameter { name, value });
            }
        }
        if self.min_distance_m >= self.cell_radius_m {
            return Err(PhyError::InvalidParameter { name: "min_distance_m", value: self.min_distance_m });
        }
        if !(self.link_adaptation_margin_db >= 0.0) || !self.link_adaptation_margin_db.is_finite() {
            return Err(PhyError::InvalidParameter {
                name: "link_adaptation_margin_db",
                value: self.link_adaptation_margin_db,
            });
        }
        if !(self.ue_speed_mps >= 0.0) {
            return Err(PhyError::InvalidParameter { name: "ue_speed_mps", value: self.ue_speed_mps });
        }
        if !(self.target_bler > 0.0 && self.target_bler < 1.0) {
            return Err(PhyError::InvalidParameter { name: "target_bler", value: self.target_bler });
        }
        let a = self.sinr_average_coefficient;
        if !(a > 0.0 && a <= 1.0) {
            return Err(PhyError::InvalidParameter { name: "sinr_average_coefficient", value: a });
        }
        Ok(())
    }

    pub fn rbs_per_rbg(&self) -> usize {
        self.num_rbs / self.num_rbgs
    }

    pub fn resource_elements_per_rbg(&self) -> usize {
        self.rbs_per_rbg() * self.subcarriers_per_rb * self.tti_symbols
    }

    /// Mini-slot duration: a 14-symbol slot lasts 1 ms at 15 kHz and halves
    /// with each doubling of the subcarrier spacing.
    pub fn tti_duration_s(&self) -> f64 {
        let slot_s = 1.0e-3 / (self.scs_hz / 15.0e3);
        slot_s * self.tti_symbols as f64 / 14.0
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.ue_speed_mps / self.wavelength_m()
    }

    /// Lag-one fading correlation from the Jakes spectrum, J0(2 pi f_d T).
    pub fn doppler_correlation(&self) -> f64 {
        let x = 2.0 * std::f64::consts::PI * self.max_doppler_hz() * self.tti_duration_s();
        libm::j0(x).clamp(0.0, 1.0)
    }

    /// Free-space loss at 1 m.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI / self.wavelength_m()).log10()
    }

    pub fn pathloss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        self.reference_loss_db() + 10.0 * self.pathloss_exponent * d.log10()
    }

    pub fn tx_power_per_rb_dbm(&self) -> f64 {
        self.tx_power_dbm - 10.0 * (self.num_rbs as f64).log10()
    }

    pub fn noise_per_rb_dbm(&self) -> f64 {
        let rb_bandwidth = self.subcarriers_per_rb as f64 * self.scs_hz;
        self.noise_psd_dbm_hz + self.noise_figure_db + 10.0 * rb_bandwidth.log10()
    }

    /// Mean per-RB SNR (before fading) of a UE at the given distance.
    pub fn mean_snr_db(&self, distance_m: f64) -> f64 {
        self.tx_power_per_rb_dbm() - self.pathloss_db(distance_m) - self.noise_per_rb_dbm()
    }

    pub fn bler_model(&self) -> BlerModel {
        BlerModel { target_bler: self.target_bler, slope_per_db: self.bler_slope_per_db }
    }
}
