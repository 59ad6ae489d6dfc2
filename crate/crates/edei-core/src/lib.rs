//! Discrete-time multi-agent simulator for emergency decision-making under
//! spreading incidents (EDEI).
//!
//! A scenario places work nodes with assets on a grid. Agents complete
//! deadline-stamped assignments while incidents ignite, grow in severity, and
//! spread along a separate directed hazard graph. Three interchangeable
//! policies drive the agents: a greedy baseline, MADDPG, and P-MADDPG, which
//! augments MADDPG with a GRU-based predictor that broadcasts a set of
//! next-step ignition probabilities to every agent.
//!
//! Layout:
//! - [`graph`]: operation graph, spread graph, assets, node partition.
//! - [`spread`]: severity dynamics, spread matrix, probabilistic ignition.
//! - [`assign`]: assignment queue, deadlines, completion and failure rules.
//! - [`env`]: the partially observable Markov game (step transaction,
//!   perception/communication, rewards).
//! - [`nn`]: self-contained f64 neural kernel with reverse-mode gradients.
//! - [`predictor`]: feature extraction and the GRU + conv prediction head.
//! - [`marl`]: replay, actor/critic updates, training loops, baselines.
//! - [`metrics`]: the five evaluation metrics and CSV emission.
//! - [`scenario`]: scenario generators and the on-disk schema.
//! - [`checkpoint`]: binary parameter snapshot format.
//!
//! Everything is deterministic for a given seed: all randomness flows through
//! named ChaCha streams derived in [`seed`].

pub mod assign;
pub mod checkpoint;
pub mod env;
pub mod graph;
pub mod marl;
pub mod metrics;
pub mod nn;
pub mod predictor;
pub mod scenario;
pub mod seed;
pub mod spread;

pub use graph::NodeId;
