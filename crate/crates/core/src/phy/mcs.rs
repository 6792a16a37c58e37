use rand::Rng;

use super::{CsiReport, PhyError};

/// One link-adaptation entry. `min_sinr_db` is the selection threshold
/// (negative infinity for the fallback entry); `bler_threshold_db` is where the
/// entry's waterfall crosses the target BLER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub min_sinr_db: f64,
    pub bler_threshold_db: f64,
    pub spectral_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

/// CQI-table spectral efficiencies (bits per resource element) and the SINR
/// at which each reaches 10% BLER.
const DEFAULT_ENTRIES: [(f64, f64); 15] = [
    (-6.7, 0.1523),
    (-4.7, 0.2344),
    (-2.3, 0.3770),
    (0.2, 0.6016),
    (2.4, 0.8770),
    (4.3, 1.1758),
    (5.9, 1.4766),
    (8.1, 1.9141),
    (10.3, 2.4063),
    (11.7, 2.7305),
    (14.1, 3.3223),
    (16.3, 3.9023),
    (18.7, 4.5234),
    (21.0, 5.1152),
    (22.7, 5.5547),
];

impl Default for McsTable {
    fn default() -> Self {
        let entries = DEFAULT_ENTRIES
            .iter()
            .enumerate()
            .map(|(i, &(threshold, se))| McsEntry {
                min_sinr_db: if i == 0 { f64::NEG_INFINITY } else { threshold },
                bler_threshold_db: threshold,
                spectral_efficiency: se,
            })
            .collect();
        Self { entries }
    }
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self, PhyError> {
        if entries.is_empty() {
            return Err(PhyError::EmptyMcsTable);
        }
        let increasing = entries
            .windows(2)
            .all(|w| w[0].min_sinr_db < w[1].min_sinr_db && w[0].spectral_efficiency < w[1].spectral_efficiency);
        if !increasing || entries[0].min_sinr_db != f64::NEG_INFINITY {
            return Err(PhyError::UnorderedMcsTable);
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &McsEntry {
        &self.entries[index]
    }

    /// Highest entry whose threshold does not exceed the reported SINR.
    pub fn select(&self, reported_sinr_db: f64) -> usize {
        // NaN falls through to the fallback entry.
        self.entries.iter().rposition(|e| e.min_sinr_db <= reported_sinr_db).unwrap_or(0)
    }

    /// Span of finite thresholds, used for feature scaling.
    pub fn sinr_span_db(&self) -> (f64, f64) {
        let lo = self.entries[0].bler_threshold_db;
        let hi = self.entries[self.entries.len() - 1].bler_threshold_db;
        (lo, hi)
    }

    /// Transport-block bits carried by one RBG at the given entry.
    pub fn bits_per_rbg(&self, index: usize, resource_elements: usize) -> u64 {
        (self.entries[index].spectral_efficiency * resource_elements as f64).floor() as u64
    }
}

/// Bits one RBG can carry for this UE under its latest report.
pub fn achievable_rate(csi: &CsiReport, rbg: usize, mcs: &McsTable, resource_elements_per_rbg: usize) -> u64 {
    let index = mcs.select(csi.rbg_sinr_db[rbg]);
    mcs.bits_per_rbg(index, resource_elements_per_rbg)
}

/// Logistic BLER waterfall in the dB domain, pinned to `target_bler` at each
/// entry's threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerModel {
    pub target_bler: f64,
    pub slope_per_db: f64,
}

impl BlerModel {
    pub fn bler(&self, true_sinr_db: f64, entry: &McsEntry) -> f64 {
        if true_sinr_db == f64::INFINITY {
            return 0.0;
        }
        if true_sinr_db == f64::NEG_INFINITY {
            return 1.0;
        }
        let odds_at_threshold = (1.0 - self.target_bler) / self.target_bler;
        let x = self.slope_per_db * (true_sinr_db - entry.bler_threshold_db);
        1.0 / (1.0 + odds_at_threshold * x.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbOutcome {
    Success,
    Failure,
}

impl TbOutcome {
    pub fn is_success(self) -> bool {
        self == TbOutcome::Success
    }

    /// Draw with the given failure probability.
    pub fn draw<R: Rng + ?Sized>(failure_probability: f64, rng: &mut R) -> Self {
        let u: f64 = rng.random();
        if u < failure_probability {
            TbOutcome::Failure
        } else {
            TbOutcome::Success
        }
    }
}

pub fn transport_block_outcome<R: Rng + ?Sized>(
    true_sinr_db: f64,
    mcs: &McsEntry,
    bler: &BlerModel,
    rng: &mut R,
) -> TbOutcome {
    TbOutcome::draw(bler.bler(true_sinr_db, mcs), rng)
}
