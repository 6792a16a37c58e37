//! Desk-scale URLLC cell simulator with a neural contextual-bandit admission
//! controller.
//!
//! The crate is layered bottom-up:
//!
//! - [`phy`]: pathloss + correlated Rayleigh fading, delayed periodic CSI,
//!   MCS selection and a logistic BLER waterfall.
//! - [`traffic`]: Poisson arrivals into per-UE FIFO queues with deadline drops.
//! - [`scheduler`]: M-LWDF allocation of resource block groups and RLC-style
//!   retransmission of failed transport blocks.
//! - [`metrics`]: Monte Carlo reliability, Wilson score bounds, cell
//!   reliability, reward and the evaluation ratios.
//! - [`nn`]: a small embedding + MLP reward model with exact backprop.
//! - [`agent`]: SINR-hierarchical arms, arm contexts, per-arm replay buffers and
//!   epsilon-greedy training.
//! - [`harness`]: scenario generation, rollouts, baselines, oracle, regret and
//!   file export.

pub mod agent;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod phy;
pub mod scheduler;
pub mod seed;
pub mod traffic;

/// Identifier of a UE inside one admission event.
pub type UeId = u32;
