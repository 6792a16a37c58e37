//! Monte Carlo rollout of the cell for a fixed admission decision.

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::scenario::AdmissionEvent;
use super::HarnessError;
use crate::metrics::{cell_reliability, delivery_indicator, dropping_rate, RolloutReport, UeDelivery};
use crate::phy::{CsiFeedback, McsTable, TbOutcome};
use crate::scheduler::{allocate_rbgs, apply_retransmission, update_avg_rate, Candidate, UeRateStats};
use crate::seed::{stream, tag};
use crate::traffic::{generate_arrivals, ArrivalProcess, UeQueue};
use crate::UeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub report: RolloutReport,
    /// Reliability indicator per served UE, aligned with `report.ues`.
    pub indicators: Vec<bool>,
    pub cell_reliable: bool,
    pub utilization: f64,
}

impl RolloutOutcome {
    pub fn satisfied(&self) -> usize {
        self.indicators.iter().filter(|&&x| x).count()
    }

    pub fn served(&self) -> usize {
        self.indicators.len()
    }

    /// Share of served UEs missing their target; 0 for an empty cell.
    pub fn dropping_rate(&self) -> f64 {
        dropping_rate(&self.indicators).unwrap_or(0.0)
    }

    pub fn indicator(&self, ue: UeId) -> Option<bool> {
        self.report.ues.iter().position(|d| d.ue == ue).map(|i| self.indicators[i])
    }
}

/// Simulate `config.run.rollout_ttis` TTIs of the served set. Each UE owns
/// its channel, traffic and decoding streams, keyed by `seed` and its id.
pub fn run_rollout(
    config: &Config,
    mcs: &McsTable,
    event: &AdmissionEvent,
    decision: &[bool],
    seed: u64,
) -> Result<RolloutOutcome, HarnessError> {
    if decision.len() != event.applicants.len() {
        return Err(HarnessError::Config(format!(
            "decision covers {} applicants, event has {}",
            decision.len(),
            event.applicants.len()
        )));
    }
    let cell = &config.cell;
    let bler = cell.bler_model();
    let re = cell.resource_elements_per_rbg();
    let margin = cell.link_adaptation_margin_db;
    let num_rbgs = cell.num_rbgs;
    let served = event.served(decision);
    let n = served.len();
    let ids: Vec<usize> = served.iter().map(|u| u.id as usize).collect();
    let mut channel = event.channel.subset(&ids);
    let mut feedback = CsiFeedback::new(cell);

    let mut channel_rng: Vec<_> = served.iter().map(|u| stream(seed, &[tag::CHANNEL, u.id as u64])).collect();
    let mut traffic_rng: Vec<_> = served.iter().map(|u| stream(seed, &[tag::TRAFFIC, u.id as u64])).collect();
    let mut tb_rng: Vec<_> = served.iter().map(|u| stream(seed, &[tag::TB, u.id as u64])).collect();
    let arrivals: Vec<_> = served.iter().map(|u| ArrivalProcess::new(u.arrival_rate)).collect();
    let mut queues: Vec<_> = served.iter().map(|u| UeQueue::new(u.delay_bound)).collect();
    let mut rates = vec![vec![0u64; num_rbgs]; n];
    let mut mcs_index = vec![vec![0usize; num_rbgs]; n];
    let mut stats: Vec<Option<UeRateStats>> = vec![None; n];
    let mut scheduled_rbgs = 0u64;

    for tti in 0..config.run.rollout_ttis {
        if tti > 0 {
            for (i, rng) in channel_rng.iter_mut().enumerate() {
                channel.step_ue(i, rng);
            }
        }
        feedback.observe(tti, &channel);
        if let Some(reports) = feedback.reports(cell, tti) {
            for r in &reports {
                let i = r.ue;
                for g in 0..num_rbgs {
                    mcs_index[i][g] = mcs.select(r.rbg_sinr_db[g] - margin);
                    rates[i][g] = mcs.bits_per_rbg(mcs_index[i][g], re);
                }
                if stats[i].is_none() {
                    let wideband = mcs.bits_per_rbg(mcs.select(r.wideband_sinr_db - margin), re);
                    let u = served[i];
                    stats[i] = Some(UeRateStats::new(u.reliability_target, u.delay_bound, wideband as f64));
                }
            }
        }
        for i in 0..n {
            generate_arrivals(&arrivals[i], &mut queues[i], served[i].packet_bits, tti, &mut traffic_rng[i]);
            queues[i].drop_expired(tti + 1);
        }
        let candidates: Vec<Candidate<'_>> = (0..n)
            .map(|i| Candidate {
                ue: served[i].id,
                queued_bits: queues[i].queued_bits(),
                hol: queues[i].hol_delay(tti + 1),
                rbg_rates: &rates[i],
                stats: stats[i].expect("stats set by the TTI 0 report"),
            })
            .collect();
        let decision = allocate_rbgs(&candidates, num_rbgs);
        let outcomes: Vec<Option<TbOutcome>> = (0..n)
            .map(|i| {
                let mut rbgs = decision.rbgs_of(i).peekable();
                rbgs.peek()?;
                let success: f64 = rbgs
                    .map(|g| 1.0 - bler.bler(channel.rbg_sinr_db(cell, i, g), mcs.entry(mcs_index[i][g])))
                    .product();
                Some(TbOutcome::draw(1.0 - success, &mut tb_rng[i]))
            })
            .collect();
        drop(candidates);
        apply_retransmission(&decision, &outcomes, &mut queues, tti);
        for (s, &g) in stats.iter_mut().zip(&decision.granted_bits) {
            *s = s.map(|s| update_avg_rate(s, g));
        }
        scheduled_rbgs += decision.scheduled_rbgs() as u64;
    }

    let beta = config.run.beta;
    let ues: Vec<UeDelivery> = served
        .iter()
        .zip(&queues)
        .map(|(u, q)| UeDelivery { ue: u.id, delivered: q.delivered(), failed: q.failed() })
        .collect();
    let indicators: Vec<bool> =
        ues.iter().zip(&served).map(|(d, u)| delivery_indicator(d, beta, u.reliability_target)).collect();
    let report = RolloutReport { ues, scheduled_rbgs, total_rbgs: config.run.rollout_ttis * num_rbgs as u64 };
    Ok(RolloutOutcome {
        cell_reliable: cell_reliability(indicators.iter().copied()),
        utilization: crate::metrics::resource_utilization(&report),
        report,
        indicators,
    })
}
