//! Event pipeline: filtering, oracle, baselines, agent training and
//! evaluation.

use rand::Rng;
use rayon::prelude::*;

use super::config::Config;
use super::export::{EventRow, Policy};
use super::rollout::{run_rollout, RolloutOutcome};
use super::scenario::{event_seed, generate_scenario, AdmissionEvent};
use super::HarnessError;
use crate::agent::{build_arms, greedy_arm, Agent, Arm};
use crate::metrics::{qos_fulfillment_rate, reward};
use crate::phy::McsTable;
use crate::seed::{derive_seed, stream, tag};

/// Shared, immutable simulation context.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: Config,
    pub mcs: McsTable,
}

/// Realized outcome of every arm on one event.
#[derive(Debug, Clone)]
pub struct OracleTable {
    pub outcomes: Vec<RolloutOutcome>,
    pub rewards: Vec<f64>,
}

impl OracleTable {
    pub fn best_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(0.0, f64::max)
    }

    /// Best arm, ties toward fewer admissions.
    pub fn best_arm(&self) -> usize {
        greedy_arm(&self.rewards)
    }

    pub fn satisfied(&self) -> Vec<usize> {
        self.outcomes.iter().map(|o| o.satisfied()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub generated: u64,
    /// Discarded because the cell failed before any admission.
    pub filtered: u64,
    /// Discarded because no arm satisfies anyone (oracle only).
    pub excluded: u64,
    pub retained: u64,
}

/// A generated event that survived the overload filter.
#[derive(Debug, Clone)]
pub struct RetainedEvent {
    pub event: AdmissionEvent,
    pub arms: Vec<Arm>,
    /// Rollout of arm 0, which doubles as the filter run.
    pub baseline: RolloutOutcome,
}

impl RetainedEvent {
    pub fn k_prime(&self) -> usize {
        self.event.applicants.len()
    }
}

impl Simulator {
    pub fn new(config: Config) -> Result<Self, HarnessError> {
        config.validate()?;
        Ok(Self { config, mcs: McsTable::default() })
    }

    pub fn rollout_seed(event: &AdmissionEvent, arm: usize) -> u64 {
        derive_seed(event.seed, &[tag::ROLLOUT, arm as u64])
    }

    pub fn rollout_arm(&self, event: &AdmissionEvent, arm: &Arm) -> Result<RolloutOutcome, HarnessError> {
        run_rollout(&self.config, &self.mcs, event, &arm.decision, Self::rollout_seed(event, arm.index))
    }

    /// Keep the event iff every active UE meets its target with nobody
    /// admitted. Also returns that arm-0 rollout.
    pub fn filter_trivial_overload(
        &self,
        event: &AdmissionEvent,
        arms: &[Arm],
    ) -> Result<(bool, RolloutOutcome), HarnessError> {
        let out = self.rollout_arm(event, &arms[0])?;
        Ok((out.cell_reliable, out))
    }

    pub fn realized_reward(&self, outcome: &RolloutOutcome, arm: usize, k_prime: usize) -> f64 {
        reward(outcome.cell_reliable, arm, k_prime)
    }

    /// One rollout per arm, run in parallel; arm 0 reuses `baseline` when
    /// given.
    pub fn run_oracle(
        &self,
        event: &AdmissionEvent,
        arms: &[Arm],
        baseline: Option<&RolloutOutcome>,
    ) -> Result<OracleTable, HarnessError> {
        let outcomes = arms
            .par_iter()
            .map(|arm| match (arm.index, baseline) {
                (0, Some(b)) => Ok(b.clone()),
                _ => self.rollout_arm(event, arm),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let k_prime = event.applicants.len();
        let rewards = outcomes.iter().enumerate().map(|(j, o)| self.realized_reward(o, j, k_prime)).collect();
        Ok(OracleTable { outcomes, rewards })
    }

    /// Generate events of a phase until one passes the filter.
    fn next_retained(&self, phase: u64, counts: &mut EventCounts) -> Result<RetainedEvent, HarnessError> {
        let run = &self.config.run;
        loop {
            let id = counts.generated;
            counts.generated += 1;
            let event = generate_scenario(&self.config, id, event_seed(run.seed, phase, id))?;
            let arms = build_arms(&event.applicants, self.config.agent.max_applicants)?;
            let (keep, baseline) = self.filter_trivial_overload(&event, &arms)?;
            if keep {
                return Ok(RetainedEvent { event, arms, baseline });
            }
            counts.filtered += 1;
            if counts.generated >= 100 && counts.filtered as f64 > run.max_filtered_fraction * counts.generated as f64 {
                return Err(HarnessError::TooManyFiltered { generated: counts.generated, filtered: counts.filtered });
            }
        }
    }

    /// Uniform arm drawn from the event's own stream.
    pub fn random_arm(event: &AdmissionEvent) -> usize {
        stream(event.seed, &[tag::RANDOM_POLICY]).random_range(0..=event.applicants.len())
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        ev: &RetainedEvent,
        policy: Policy,
        chosen: usize,
        outcome: &RolloutOutcome,
        predicted: Vec<f64>,
        oracle: Option<&OracleTable>,
        epsilon: Option<f64>,
    ) -> EventRow {
        let k_prime = ev.k_prime();
        let realized = self.realized_reward(outcome, chosen, k_prime);
        EventRow {
            event_id: ev.event.id,
            policy,
            k_prime,
            k_active: ev.event.actives.len(),
            chosen_arm: chosen,
            predicted_rewards: predicted,
            cell_reliable: outcome.cell_reliable,
            reward: realized,
            dropping_rate: outcome.dropping_rate(),
            utilization: outcome.utilization,
            oracle_rewards: oracle.map(|o| o.rewards.clone()).unwrap_or_default(),
            qos_fulfillment: oracle.and_then(|o| qos_fulfillment_rate(&o.satisfied(), chosen).ok()),
            regret: oracle.map(|o| (o.best_reward() - realized).max(0.0)),
            epsilon,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agent: Agent,
    pub rows: Vec<EventRow>,
    pub counts: EventCounts,
}

/// Epsilon-greedy training over `events` retained events. With `oracle`,
/// every arm is rolled out so regret can be logged, together with a random
/// policy and the oracle itself on the same events.
pub fn train_agent(sim: &Simulator, events: usize, oracle: bool) -> Result<TrainOutput, HarnessError> {
    let config = &sim.config;
    let scaler = config.feature_scaler(&sim.mcs);
    let mut agent = Agent::new(config.agent.clone(), scaler, derive_seed(config.run.seed, &[tag::AGENT]));
    let mut counts = EventCounts::default();
    let mut rows = Vec::new();
    while (counts.retained as usize) < events {
        let ev = sim.next_retained(tag::TRAIN_EVENT, &mut counts)?;
        counts.retained += 1;
        let cell = scaler.cell_features(ev.baseline.utilization, &ev.event.actives);
        let contexts = agent.contexts(&ev.arms, &ev.event.applicants, &cell)?;
        let prediction = agent.predict_rewards(&ev.arms, &contexts)?;
        let epsilon = agent.epsilon();
        let chosen = agent.select(&prediction.rewards);

        let table = if oracle { Some(sim.run_oracle(&ev.event, &ev.arms, Some(&ev.baseline))?) } else { None };
        let outcome = match (&table, chosen) {
            (Some(t), j) => t.outcomes[j].clone(),
            (None, 0) => ev.baseline.clone(),
            (None, j) => sim.rollout_arm(&ev.event, &ev.arms[j])?,
        };
        if chosen > 0 {
            agent.record(&contexts[chosen - 1], outcome.cell_reliable);
        }
        agent.train_step()?;
        agent.decay_epsilon();

        rows.push(sim.row(&ev, Policy::Proposed, chosen, &outcome, prediction.rewards, table.as_ref(), Some(epsilon)));
        if let Some(t) = &table {
            let r = Simulator::random_arm(&ev.event);
            rows.push(sim.row(&ev, Policy::Random, r, &t.outcomes[r], Vec::new(), Some(t), None));
            let b = t.best_arm();
            rows.push(sim.row(&ev, Policy::Oracle, b, &t.outcomes[b], Vec::new(), Some(t), None));
        }
    }
    Ok(TrainOutput { agent, rows, counts })
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub rows: Vec<EventRow>,
    pub counts: EventCounts,
}

/// Compare `policies` on `events` fresh retained events. Every policy sees the
/// same events, and policies choosing the same arm share the same rollout.
/// The agent acts greedily and is not updated.
pub fn evaluate(
    sim: &Simulator,
    agent: Option<&Agent>,
    policies: &[Policy],
    events: usize,
    oracle: bool,
) -> Result<EvalOutput, HarnessError> {
    let config = &sim.config;
    let mut counts = EventCounts::default();
    let mut rows = Vec::new();
    while (counts.retained as usize) < events {
        let ev = sim.next_retained(tag::EVAL_EVENT, &mut counts)?;
        let table = if oracle { Some(sim.run_oracle(&ev.event, &ev.arms, Some(&ev.baseline))?) } else { None };
        if let Some(t) = &table {
            if t.satisfied().into_iter().max().unwrap_or(0) == 0 {
                counts.excluded += 1;
                continue;
            }
        }
        counts.retained += 1;

        let mut choices = Vec::with_capacity(policies.len());
        for &policy in policies {
            let (arm, predicted) = match policy {
                Policy::Proposed => {
                    let agent =
                        agent.ok_or_else(|| HarnessError::Config("evaluating the agent needs a checkpoint".into()))?;
                    let cell = agent.scaler().cell_features(ev.baseline.utilization, &ev.event.actives);
                    let contexts = agent.contexts(&ev.arms, &ev.event.applicants, &cell)?;
                    let prediction = agent.predict_rewards(&ev.arms, &contexts)?;
                    (greedy_arm(&prediction.rewards), prediction.rewards)
                }
                Policy::Random => (Simulator::random_arm(&ev.event), Vec::new()),
                Policy::NoAdmission => (ev.k_prime(), Vec::new()),
                Policy::Oracle => match &table {
                    Some(t) => (t.best_arm(), Vec::new()),
                    None => return Err(HarnessError::Config("the oracle policy needs oracle mode".into())),
                },
            };
            choices.push((policy, arm, predicted));
        }

        let outcomes: Vec<RolloutOutcome> = match &table {
            Some(t) => t.outcomes.clone(),
            None => {
                let mut needed: Vec<usize> = choices.iter().map(|c| c.1).collect();
                needed.sort_unstable();
                needed.dedup();
                let computed = needed
                    .par_iter()
                    .map(|&j| if j == 0 { Ok(ev.baseline.clone()) } else { sim.rollout_arm(&ev.event, &ev.arms[j]) })
                    .collect::<Result<Vec<_>, _>>()?;
                let mut all = vec![ev.baseline.clone(); ev.arms.len()];
                for (j, o) in needed.into_iter().zip(computed) {
                    all[j] = o;
                }
                all
            }
        };
        for (policy, arm, predicted) in choices {
            rows.push(sim.row(&ev, policy, arm, &outcomes[arm], predicted, table.as_ref(), None));
        }
    }
    let _ = config;
    Ok(EvalOutput { rows, counts })
}
