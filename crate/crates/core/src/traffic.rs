//! Poisson packet arrivals and per-UE PDCP queues.
//!
//! Delay is counted in whole TTIs from the arrival TTI to the TTI of the
//! successful transmission, inclusive: a packet delivered in the TTI it
//! arrived has delay 1.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::UeId;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("UE {ue}: packet size must be positive, got {value}")]
    PacketSize { ue: UeId, value: f64 },
    #[error("UE {ue}: arrival rate must be positive, got {value}")]
    ArrivalRate { ue: UeId, value: f64 },
    #[error("UE {ue}: delay bound must be at least one TTI")]
    DelayBound { ue: UeId },
    #[error("UE {ue}: reliability target must lie in (0, 1), got {value}")]
    ReliabilityTarget { ue: UeId, value: f64 },
}

/// Traffic, QoS and radio attributes of one UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub id: UeId,
    /// Packet size in the configured unit (bytes by default).
    pub packet_size: f64,
    /// Packet size rounded up to whole bits.
    pub packet_bits: u64,
    /// Mean packets per TTI.
    pub arrival_rate: f64,
    /// Delay bound in TTIs.
    pub delay_bound: u32,
    pub reliability_target: f64,
    /// Long-term average effective SINR estimated from CSI reports.
    pub avg_sinr_db: f64,
}

impl UeProfile {
    pub fn new(
        id: UeId,
        packet_size: f64,
        bits_per_unit: f64,
        arrival_rate: f64,
        delay_bound: u32,
        reliability_target: f64,
        avg_sinr_db: f64,
    ) -> Result<Self, TrafficError> {
        if !(packet_size > 0.0) || !(bits_per_unit > 0.0) {
            return Err(TrafficError::PacketSize { ue: id, value: packet_size });
        }
        if !(arrival_rate > 0.0) || !arrival_rate.is_finite() {
            return Err(TrafficError::ArrivalRate { ue: id, value: arrival_rate });
        }
        if delay_bound == 0 {
            return Err(TrafficError::DelayBound { ue: id });
        }
        if !(reliability_target > 0.0 && reliability_target < 1.0) {
            return Err(TrafficError::ReliabilityTarget { ue: id, value: reliability_target });
        }
        // Round to 1e-9 bits first so 0.25 * 8 does not become 3 through
        // representation error.
        let bits = ((packet_size * bits_per_unit * 1e9).round() / 1e9).ceil() as u64;
        Ok(Self {
            id,
            packet_size,
            packet_bits: bits.max(1),
            arrival_rate,
            delay_bound,
            reliability_target,
            avg_sinr_db,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub arrival_tti: u64,
    pub remaining_bits: u64,
    pub original_bits: u64,
}

/// Poisson packet counts per TTI.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    poisson: Option<Poisson<f64>>,
}

impl ArrivalProcess {
    /// A zero rate gives a process that never emits.
    pub fn new(rate: f64) -> Self {
        let poisson = if rate > 0.0 { Poisson::new(rate).ok() } else { None };
        Self { poisson }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.poisson.as_ref().map_or(0, |p| p.sample(rng) as u64)
    }
}

/// FIFO PDCP queue of one UE plus its delivery bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct UeQueue {
    delay_bound: u32,
    packets: VecDeque<Packet>,
    queued_bits: u64,
    completed_delays: Vec<u32>,
    dropped: u64,
    late: u64,
    enqueued_bits: u64,
    served_bits: u64,
    dropped_bits: u64,
}

impl UeQueue {
    pub fn new(delay_bound: u32) -> Self {
        Self {
            delay_bound,
            packets: VecDeque::new(),
            queued_bits: 0,
            completed_delays: Vec::new(),
            dropped: 0,
            late: 0,
            enqueued_bits: 0,
            served_bits: 0,
            dropped_bits: 0,
        }
    }

    pub fn delay_bound(&self) -> u32 {
        self.delay_bound
    }

    pub fn enqueue(&mut self, tti: u64, bits: u64) {
        if bits == 0 {
            return;
        }
        self.packets.push_back(Packet { arrival_tti: tti, remaining_bits: bits, original_bits: bits });
        self.queued_bits += bits;
        self.enqueued_bits += bits;
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    pub fn queued_bits(&self) -> u64 {
        self.queued_bits
    }

    pub fn completed_delays(&self) -> &[u32] {
        &self.completed_delays
    }

    /// Packets delivered within the delay bound.
    pub fn delivered(&self) -> u64 {
        self.completed_delays.len() as u64
    }

    /// Packets that missed the bound: deadline drops plus late completions.
    pub fn failed(&self) -> u64 {
        self.dropped + self.late
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn enqueued_bits(&self) -> u64 {
        self.enqueued_bits
    }

    pub fn served_bits(&self) -> u64 {
        self.served_bits
    }

    pub fn dropped_bits(&self) -> u64 {
        self.dropped_bits
    }

    /// Age of the oldest packet at `tti`; 0 when empty.
    pub fn hol_delay(&self, tti: u64) -> u64 {
        self.packets.front().map_or(0, |p| tti.saturating_sub(p.arrival_tti))
    }

    /// Remove every packet older than the delay bound at `tti`.
    pub fn drop_expired(&mut self, tti: u64) -> u64 {
        let bound = self.delay_bound as u64;
        let mut dropped = 0;
        // FIFO by arrival, so expired packets form a prefix.
        while let Some(p) = self.packets.front() {
            if tti.saturating_sub(p.arrival_tti) <= bound {
                break;
            }
            let p = self.packets.pop_front().unwrap();
            self.queued_bits -= p.remaining_bits;
            self.dropped_bits += p.remaining_bits;
            dropped += 1;
        }
        self.dropped += dropped;
        dropped
    }

    /// Consume successfully delivered bits FIFO. Returns the delays of the
    /// packets completed at `tti`; unused capacity is discarded.
    pub fn serve_bits(&mut self, mut bits: u64, tti: u64) -> Vec<u32> {
        let mut completed = Vec::new();
        while bits > 0 {
            let Some(head) = self.packets.front_mut() else { break };
            let take = bits.min(head.remaining_bits);
            head.remaining_bits -= take;
            bits -= take;
            self.queued_bits -= take;
            self.served_bits += take;
            if head.remaining_bits == 0 {
                let p = self.packets.pop_front().unwrap();
                let delay = (tti - p.arrival_tti + 1) as u32;
                if delay <= self.delay_bound {
                    self.completed_delays.push(delay);
                    completed.push(delay);
                } else {
                    self.late += 1;
                }
            }
        }
        completed
    }
}

/// Draw this TTI's arrivals and enqueue them. Returns the packet count.
pub fn generate_arrivals<R: Rng + ?Sized>(
    process: &ArrivalProcess,
    queue: &mut UeQueue,
    packet_bits: u64,
    tti: u64,
    rng: &mut R,
) -> u64 {
    let count = process.sample(rng);
    for _ in 0..count {
        queue.enqueue(tti, packet_bits);
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractional_bytes_round_to_bits() {
        let p = UeProfile::new(0, 0.25, 8.0, 0.5, 3, 0.99, 10.0).unwrap();
        assert_eq!(p.packet_bits, 2);
        let p = UeProfile::new(0, 5.0, 8.0, 0.5, 3, 0.99, 10.0).unwrap();
        assert_eq!(p.packet_bits, 40);
        let p = UeProfile::new(0, 0.3, 8.0, 0.5, 3, 0.99, 10.0).unwrap();
        assert_eq!(p.packet_bits, 3);
    }

    #[test]
    fn profile_invariants() {
        assert!(UeProfile::new(1, 0.0, 8.0, 0.5, 3, 0.99, 0.0).is_err());
        assert!(UeProfile::new(1, 1.0, 8.0, 0.0, 3, 0.99, 0.0).is_err());
        assert_eq!(UeProfile::new(1, 1.0, 8.0, 0.5, 0, 0.99, 0.0), Err(TrafficError::DelayBound { ue: 1 }));
        assert!(UeProfile::new(1, 1.0, 8.0, 0.5, 3, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_rate_never_arrives() {
        let process = ArrivalProcess::new(0.0);
        let mut q = UeQueue::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..10_000 {
            assert_eq!(generate_arrivals(&process, &mut q, 8, t, &mut rng), 0);
        }
        assert!(q.is_empty());
    }

    #[test]
    fn arrival_mean_at_half_rate() {
        let process = ArrivalProcess::new(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| process.sample(&mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn poisson_dispersion() {
        let process = ArrivalProcess::new(1.0 / 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| process.sample(&mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / mean - 1.0).abs() < 0.02, "var {var} mean {mean}");
    }

    #[test]
    fn windowed_arrivals_are_stationary() {
        let rate = 0.5;
        let window = 1000;
        let process = ArrivalProcess::new(rate);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sigma = (rate * window as f64).sqrt();
        for _ in 0..100 {
            let count: u64 = (0..window).map(|_| process.sample(&mut rng)).sum();
            assert!((count as f64 - rate * window as f64).abs() <= 3.0 * sigma + 1.0);
        }
    }

    #[test]
    fn hol_delay_cases() {
        let mut q = UeQueue::new(5);
        assert_eq!(q.hol_delay(7), 0);
        q.enqueue(10, 8);
        assert_eq!(q.hol_delay(13), 3);
        q.enqueue(12, 8);
        assert_eq!(q.hol_delay(13), 3);
    }

    #[test]
    fn drop_boundary_is_inclusive() {
        let mut q = UeQueue::new(3);
        q.enqueue(10, 8);
        assert_eq!(q.drop_expired(11), 0);
        assert_eq!(q.drop_expired(13), 0, "age equal to the bound is kept");
        assert_eq!(q.len(), 1);
        assert_eq!(q.drop_expired(14), 1);
        assert!(q.is_empty());
        assert_eq!(q.failed(), 1);
        assert_eq!(q.dropped_bits(), 8);
    }

    #[test]
    fn serve_cases() {
        let mut q = UeQueue::new(5);
        q.enqueue(0, 40);
        assert!(q.serve_bits(0, 0).is_empty());
        assert_eq!(q.serve_bits(480, 0), vec![1]);
        assert_eq!(q.served_bits(), 40);
        assert!(q.is_empty());
    }

    #[test]
    fn split_packet_counts_delay_to_final_tti() {
        let mut q = UeQueue::new(5);
        q.enqueue(4, 40);
        assert!(q.serve_bits(25, 4).is_empty());
        assert_eq!(q.queued_bits(), 15);
        assert_eq!(q.serve_bits(25, 5), vec![2]);
        assert_eq!(q.completed_delays(), &[2]);
    }

    proptest! {
        #[test]
        fn bits_are_conserved(
            ops in proptest::collection::vec((0u64..3, 0u64..200, any::<bool>()), 1..200),
            bound in 1u32..6,
        ) {
            let mut q = UeQueue::new(bound);
            for (tti, (arrivals, service, drop_first)) in ops.into_iter().enumerate() {
                let tti = tti as u64;
                for _ in 0..arrivals {
                    q.enqueue(tti, 17);
                }
                if drop_first {
                    q.drop_expired(tti + 1);
                }
                for d in q.serve_bits(service, tti) {
                    prop_assert!(d >= 1 && d <= bound);
                }
                prop_assert_eq!(
                    q.enqueued_bits(),
                    q.served_bits() + q.dropped_bits() + q.queued_bits()
                );
                prop_assert_eq!(q.queued_bits(), q.packets().map(|p| p.remaining_bits).sum::<u64>());
            }
        }
    }
}
