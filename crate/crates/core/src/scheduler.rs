//! M-LWDF resource allocation and RLC-style retransmission.

use std::cmp::Ordering;

use crate::phy::TbOutcome;
use crate::traffic::UeQueue;
use crate::UeId;

/// Floor on the average rate so the metric stays finite.
pub const RATE_FLOOR: f64 = 1.0;
/// EMA coefficient of the average rate.
pub const AVG_RATE_COEFFICIENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeRateStats {
    avg_rate: f64,
    zeta: f64,
}

impl UeRateStats {
    pub fn new(reliability_target: f64, delay_bound: u32, initial_rate: f64) -> Self {
        Self::with_zeta(zeta(reliability_target, delay_bound), initial_rate)
    }

    pub fn with_zeta(zeta: f64, avg_rate: f64) -> Self {
        Self { avg_rate: avg_rate.max(RATE_FLOOR), zeta }
    }

    pub fn avg_rate(&self) -> f64 {
        self.avg_rate
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

/// -ln(1 - delta) / tau.
pub fn zeta(reliability_target: f64, delay_bound: u32) -> f64 {
    -(1.0 - reliability_target).ln() / delay_bound as f64
}

pub fn mlwdf_metric(stats: &UeRateStats, hol: u64, rate_now: f64) -> f64 {
    stats.zeta * hol as f64 * rate_now / stats.avg_rate
}

pub fn update_avg_rate(stats: UeRateStats, granted_bits: u64) -> UeRateStats {
    let a = AVG_RATE_COEFFICIENT;
    let avg = (1.0 - a) * stats.avg_rate + a * granted_bits as f64;
    UeRateStats { avg_rate: avg.max(RATE_FLOOR), zeta: stats.zeta }
}

/// One UE competing for RBGs in the current TTI.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub ue: UeId,
    pub queued_bits: u64,
    pub hol: u64,
    /// Bits per RBG under the UE's latest CSI.
    pub rbg_rates: &'a [u64],
    pub stats: UeRateStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleDecision {
    /// Owner of each RBG as an index into the candidate slice.
    pub rbg_owner: Vec<Option<usize>>,
    /// Granted bits per candidate.
    pub granted_bits: Vec<u64>,
}

impl ScheduleDecision {
    pub fn assigned_ue(&self, rbg: usize, candidates: &[Candidate<'_>]) -> Option<UeId> {
        self.rbg_owner[rbg].map(|i| candidates[i].ue)
    }

    pub fn scheduled_rbgs(&self) -> usize {
        self.rbg_owner.iter().filter(|o| o.is_some()).count()
    }

    pub fn rbgs_of(&self, candidate: usize) -> impl Iterator<Item = usize> + '_ {
        self.rbg_owner.iter().enumerate().filter(move |(_, o)| **o == Some(candidate)).map(|(g, _)| g)
    }
}

/// Assign RBGs one at a time in index order. Each goes to the candidate with
/// the largest metric among those whose queue is not already covered by this
/// TTI's grants; ties go to the lowest UE id.
pub fn allocate_rbgs(candidates: &[Candidate<'_>], num_rbgs: usize) -> ScheduleDecision {
    let mut granted = vec![0u64; candidates.len()];
    let mut owner = vec![None; num_rbgs];
    for (rbg, slot) in owner.iter_mut().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if granted[i] >= c.queued_bits {
                continue;
            }
            let score = mlwdf_metric(&c.stats, c.hol, c.rbg_rates[rbg] as f64);
            let better = match best {
                None => true,
                Some((j, s)) => match score.partial_cmp(&s) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => c.ue < candidates[j].ue,
                    _ => false,
                },
            };
            if better {
                best = Some((i, score));
            }
        }
        if let Some((i, _)) = best {
            *slot = Some(i);
            granted[i] += candidates[i].rbg_rates[rbg];
        }
    }
    ScheduleDecision { rbg_owner: owner, granted_bits: granted }
}

/// Deliver granted bits for successful transport blocks; failed blocks leave
/// the queue untouched so the bits are rescheduled next TTI. `outcomes` and
/// `queues` are aligned with the decision's candidates. Returns completed
/// packet delays per candidate.
pub fn apply_retransmission(
    decision: &ScheduleDecision,
    outcomes: &[Option<TbOutcome>],
    queues: &mut [UeQueue],
    tti: u64,
) -> Vec<Vec<u32>> {
    decision
        .granted_bits
        .iter()
        .zip(outcomes)
        .zip(queues.iter_mut())
        .map(|((&bits, outcome), queue)| match outcome {
            Some(TbOutcome::Success) if bits > 0 => queue.serve_bits(bits, tti),
            _ => Vec::new(),
        })
        .collect()
}
