//! Neural contextual-bandit admission agent: one reward network per non-empty
//! arm, per-arm replay buffers and epsilon-greedy selection.

pub mod arms;
pub mod context;
pub mod replay;

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arms::{build_arms, sinr_order, Arm};
pub use context::{
    build_arm_context, build_network_context, context_kinds, ArmContext, FeatureScaler, NetworkContext, Range,
};
pub use replay::{ExperienceSample, ReplayBuffer};

use crate::nn::{round_prediction, Network, NetworkSpec, NnError};
use crate::seed::fnv1a;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("{count} applicants, agent supports 1..={max}")]
    ApplicantCount { count: usize, max: usize },
    #[error("arm 0 admits nobody and has no context")]
    NoContextForEmptyArm,
    #[error("decision covers {actual} applicants, expected {expected}")]
    DecisionShape { expected: usize, actual: usize },
    #[error("no model for arm {0}")]
    MissingModel(usize),
    #[error("context for arm {0} missing")]
    MissingContext(usize),
    #[error("agent checkpoint is invalid: {0}")]
    Checkpoint(String),
    #[error("agent checkpoint was written for a different configuration")]
    ConfigMismatch,
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Denominator of the predicted reward `K_a / n * round(g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardScale {
    /// The agent's maximum applicant count.
    MaxApplicants,
    /// The event's applicant count.
    Applicants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub max_applicants: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub reward_scale: RewardScale,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_applicants: 3,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_floor: 0.1,
            batch_size: 30,
            learning_rate: 0.01,
            buffer_capacity: 500,
            embedding_dim: 10,
            hidden: vec![16, 8],
            reward_scale: RewardScale::MaxApplicants,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_applicants == 0 {
            return Err("agent.max_applicants must be at least 1".into());
        }
        for (name, v) in [
            ("agent.epsilon_start", self.epsilon_start),
            ("agent.epsilon_decay", self.epsilon_decay),
            ("agent.epsilon_floor", self.epsilon_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.batch_size == 0 {
            return Err("agent.batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return Err("agent.learning_rate must be positive".into());
        }
        if self.embedding_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err("agent layer sizes must be positive".into());
        }
        Ok(())
    }

    pub fn network_spec(&self, arm: usize) -> NetworkSpec {
        NetworkSpec::new(context_kinds(arm), self.embedding_dim, self.hidden.clone())
    }
}

/// `max(decay * eps, floor)`.
pub fn decay_epsilon(epsilon: f64, decay: f64, floor: f64) -> f64 {
    (epsilon * decay).max(floor)
}

/// Greedy argmax with ties toward the fewest admissions, or with probability
/// `epsilon` a uniform arm.
pub fn select_arm<R: Rng + ?Sized>(rewards: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!rewards.is_empty());
    let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
    if explore {
        return rng.random_range(0..rewards.len());
    }
    greedy_arm(rewards)
}

pub fn greedy_arm(rewards: &[f64]) -> usize {
    let mut best = 0;
    for (j, &r) in rewards.iter().enumerate().skip(1) {
        if r > rewards[best] {
            best = j;
        }
    }
    best
}

/// Append an observation for arm `j >= 1`; arm 0 never records.
pub fn record_experience(buffers: &mut [ReplayBuffer], context: &ArmContext, cell_reliable: bool) {
    if context.arm == 0 {
        return;
    }
    if let Some(b) = buffers.get_mut(context.arm - 1) {
        b.push(ExperienceSample { context: context.clone(), label: if cell_reliable { 1.0 } else { 0.0 } });
    }
}

/// Network outputs and rewards for every arm of one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `g` per arm; arm 0 has none.
    pub probabilities: Vec<Option<f64>>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    scaler: FeatureScaler,
    models: Vec<Network>,
    buffers: Vec<ReplayBuffer>,
    epsilon: f64,
    rng: ChaCha8Rng,
}

const MAGIC: &[u8; 4] = b"URAG";
const VERSION: u32 = 1;

impl Agent {
    /// Fresh networks; `seed` drives initialization, exploration and batching.
    pub fn new(config: AgentConfig, scaler: FeatureScaler, seed: u64) -> Self {
        let models = (1..=config.max_applicants)
            .map(|j| Network::init(config.network_spec(j), crate::seed::derive_seed(seed, &[j as u64])))
            .collect();
        let buffers = (0..config.max_applicants).map(|_| ReplayBuffer::new(config.buffer_capacity)).collect();
        let epsilon = config.epsilon_start;
        Self { config, scaler, models, buffers, epsilon, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn models(&self) -> &[Network] {
        &self.models
    }

    pub fn buffers(&self) -> &[ReplayBuffer] {
        &self.buffers
    }

    pub fn model(&self, arm: usize) -> Result<&Network, AgentError> {
        arm.checked_sub(1).and_then(|i| self.models.get(i)).ok_or(AgentError::MissingModel(arm))
    }

    /// Contexts for arms `1..=K'`, indexed by `arm - 1`.
    pub fn contexts(
        &self,
        arms: &[Arm],
        applicants: &[crate::traffic::UeProfile],
        cell: &[f64; context::CELL_FEATURES],
    ) -> Result<Vec<ArmContext>, AgentError> {
        arms.iter().skip(1).map(|a| build_arm_context(&self.scaler, a, applicants, cell)).collect()
    }

    pub fn predict_rewards(&self, arms: &[Arm], contexts: &[ArmContext]) -> Result<Prediction, AgentError> {
        let applicants = arms.len().saturating_sub(1);
        let denom = match self.config.reward_scale {
            RewardScale::MaxApplicants => self.config.max_applicants,
            RewardScale::Applicants => applicants,
        } as f64;
        let mut probabilities = vec![None];
        let mut rewards = vec![0.0];
        for arm in arms.iter().skip(1) {
            let ctx = contexts.get(arm.index - 1).ok_or(AgentError::MissingContext(arm.index))?;
            let g = self.model(arm.index)?.forward(&ctx.features)?;
            probabilities.push(Some(g));
            let hit = if round_prediction(g) { 1.0 } else { 0.0 };
            rewards.push((arm.admitted() as f64 / denom).min(1.0) * hit);
        }
        Ok(Prediction { probabilities, rewards })
    }

    /// Epsilon-greedy choice using the agent's own stream.
    pub fn select(&mut self, rewards: &[f64]) -> usize {
        select_arm(rewards, self.epsilon, &mut self.rng)
    }

    /// Greedy decision with no state change.
    pub fn infer(&self, arms: &[Arm], contexts: &[ArmContext]) -> Result<usize, AgentError> {
        Ok(greedy_arm(&self.predict_rewards(arms, contexts)?.rewards))
    }

    pub fn record(&mut self, context: &ArmContext, cell_reliable: bool) {
        record_experience(&mut self.buffers, context, cell_reliable);
    }

    /// One SGD step per arm whose buffer holds at least a batch. Returns the
    /// batch loss per arm, `None` where skipped.
    pub fn train_step(&mut self) -> Result<Vec<Option<f64>>, AgentError> {
        let q = self.config.batch_size;
        let mut losses = Vec::with_capacity(self.models.len());
        for (model, buffer) in self.models.iter_mut().zip(&self.buffers) {
            let Some(batch) = buffer.sample(q, &mut self.rng) else {
                losses.push(None);
                continue;
            };
            let pairs: Vec<(&[f64], f64)> = batch.iter().map(|s| (s.context.features.as_slice(), s.label)).collect();
            let (loss, grad) = model.backward(&pairs)?;
            model.sgd_step(&grad, self.config.learning_rate)?;
            losses.push(Some(loss));
        }
        Ok(losses)
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = decay_epsilon(self.epsilon, self.config.epsilon_decay, self.config.epsilon_floor);
    }

    /// Hash of everything that fixes the meaning of the network inputs.
    pub fn config_hash(config: &AgentConfig, scaler: &FeatureScaler) -> u64 {
        let text = serde_json::to_string(&(config, scaler)).expect("config serializes");
        fnv1a(text.as_bytes())
    }

    /// Networks, epsilon and the config hash in one container.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), AgentError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&Self::config_hash(&self.config, &self.scaler).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        w.write_all(&(self.models.len() as u32).to_le_bytes())?;
        for m in &self.models {
            let bytes = m.to_bytes();
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    /// Restore networks and epsilon. Buffers start empty; `seed` reseeds the
    /// exploration stream.
    pub fn load<R: Read>(mut r: R, config: AgentConfig, scaler: FeatureScaler, seed: u64) -> Result<Self, AgentError> {
        let bad = |e: io::Error| AgentError::Checkpoint(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(AgentError::Checkpoint("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(bad)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(AgentError::Checkpoint(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8).map_err(bad)?;
        if u64::from_le_bytes(b8) != Self::config_hash(&config, &scaler) {
            return Err(AgentError::ConfigMismatch);
        }
        r.read_exact(&mut b8).map_err(bad)?;
        let epsilon = f64::from_le_bytes(b8);
        r.read_exact(&mut b4).map_err(bad)?;
        let count = u32::from_le_bytes(b4) as usize;
        if count != config.max_applicants {
            return Err(AgentError::ConfigMismatch);
        }
        let mut agent = Self::new(config, scaler, seed);
        for j in 0..count {
            r.read_exact(&mut b8).map_err(bad)?;
            let len = u64::from_le_bytes(b8) as usize;
            let mut bytes = Vec::new();
            (&mut r).take(len as u64).read_to_end(&mut bytes)?;
            if bytes.len() != len {
                return Err(AgentError::Checkpoint("truncated network block".into()));
            }
            let net = Network::load(bytes.as_slice())?;
            if net.spec() != agent.models[j].spec() {
                return Err(AgentError::ConfigMismatch);
            }
            agent.models[j] = net;
        }
        agent.epsilon = epsilon;
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::UeProfile;

    fn scaler() -> FeatureScaler {
        FeatureScaler {
            sinr_db: Range::new(-6.7, 22.7),
            packet_size: Range::new(0.25, 5.0),
            arrival_rate: Range::new(1.0 / 3.0, 1.0),
            delay_bound: Range::new(1.0, 5.0),
        }
    }

    fn applicants() -> Vec<UeProfile> {
        vec![
            UeProfile::new(0, 1.0, 8.0, 0.5, 3, 0.99, 12.0).unwrap(),
            UeProfile::new(1, 2.0, 8.0, 1.0, 2, 0.99, 4.0).unwrap(),
            UeProfile::new(2, 4.0, 8.0, 1.0 / 3.0, 5, 0.99, 8.0).unwrap(),
        ]
    }

    /// Force every network output to `g` through the output bias.
    fn pin_outputs(agent: &mut Agent, gs: &[f64]) {
        for (m, &g) in agent.models.iter_mut().zip(gs) {
            for p in m.params_mut() {
                *p = 0.0;
            }
            let last = m.num_params() - 1;
            m.params_mut()[last] = (g / (1.0 - g)).ln();
        }
    }

    #[test]
    fn predicted_rewards_arithmetic() {
        let mut agent = Agent::new(AgentConfig::default(), scaler(), 1);
        let apps = applicants();
        let arms = build_arms(&apps, 3).unwrap();
        let cell = scaler().cell_features(0.3, &[]);
        let ctx = agent.contexts(&arms, &apps, &cell).unwrap();
        pin_outputs(&mut agent, &[0.6, 0.7, 0.9]);
        let p = agent.predict_rewards(&arms, &ctx).unwrap();
        assert_eq!(p.rewards[0], 0.0);
        assert!((p.rewards[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.rewards[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.rewards[3] - 1.0).abs() < 1e-15);
        pin_outputs(&mut agent, &[0.4, 0.2, 0.49]);
        assert_eq!(agent.predict_rewards(&arms, &ctx).unwrap().rewards, vec![0.0; 4]);
        assert_eq!(agent.infer(&arms, &ctx).unwrap(), 0);
    }

    #[test]
    fn missing_model_is_an_error() {
        let config = AgentConfig { max_applicants: 1, ..AgentConfig::default() };
        let agent = Agent::new(config, scaler(), 1);
        let apps = applicants();
        let arms = build_arms(&apps, 3).unwrap();
        let ctx = agent.contexts(&arms, &apps, &scaler().cell_features(0.0, &[])).unwrap();
        assert!(matches!(agent.predict_rewards(&arms, &ctx), Err(AgentError::MissingModel(2))));
    }

    #[test]
    fn greedy_selection_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_arm(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 0.0, &mut rng), 3);
        assert_eq!(select_arm(&[0.0; 4], 0.0, &mut rng), 0);
        assert_eq!(select_arm(&[0.0, 0.5, 0.5], 0.0, &mut rng), 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_arm(&[0.0, 0.1, 0.9, 0.2], 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02, "{counts:?}");
        }
        // chi-square with 3 dof, 99.9% quantile 16.27
        let e = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(decay_epsilon(1.0, 0.99, 0.1), 0.99);
        assert_eq!(decay_epsilon(0.1, 0.99, 0.1), 0.1);
        let mut e = 1.0;
        for _ in 0..300 {
            e = decay_epsilon(e, 0.99, 0.1);
        }
        assert_eq!(e, 0.1);
    }

    #[test]
    fn arm_zero_records_nothing() {
        let mut agent = Agent::new(AgentConfig::default(), scaler(), 1);
        agent.record(&ArmContext { arm: 0, features: vec![] }, true);
        assert!(agent.buffers().iter().all(|b| b.is_empty()));
    }

    #[test]
    fn training_touches_only_eligible_arms() {
        let mut agent = Agent::new(AgentConfig::default(), scaler(), 5);
        let before = agent.models.clone();
        assert_eq!(agent.train_step().unwrap(), vec![None, None, None]);
        assert_eq!(agent.models, before);
        for i in 0..30 {
            let ctx = ArmContext { arm: 2, features: vec![i as f64 / 30.0; 13] };
            agent.record(&ctx, i % 2 == 0);
        }
        let losses = agent.train_step().unwrap();
        assert!(losses[0].is_none() && losses[1].is_some() && losses[2].is_none());
        assert_eq!(agent.models[0], before[0]);
        assert_ne!(agent.models[1], before[1]);
        assert_eq!(agent.models[2], before[2]);
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let mut agent = Agent::new(AgentConfig::default(), scaler(), 9);
        agent.decay_epsilon();
        let mut bytes = Vec::new();
        agent.save(&mut bytes).unwrap();
        let back = Agent::load(bytes.as_slice(), AgentConfig::default(), scaler(), 0).unwrap();
        assert_eq!(back.models, agent.models);
        assert_eq!(back.epsilon(), 0.99);
        let other = AgentConfig { learning_rate: 0.02, ..AgentConfig::default() };
        assert!(matches!(Agent::load(bytes.as_slice(), other, scaler(), 0), Err(AgentError::ConfigMismatch)));
        assert!(Agent::load(&bytes[..bytes.len() - 3], AgentConfig::default(), scaler(), 0).is_err());
    }
}
