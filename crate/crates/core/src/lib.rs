//! Detection of coordinated accounts by mining closed contrast patterns
//! between a background and a target window of post activity.
//!
//! The pipeline is: [`ingest`] raw posts into two encoded
//! [`model::TransactionDataset`]s, [`miner::mine_closed_contrast`] the
//! patterns whose support grows from background to target, then
//! [`detect::suspicious_users`] collects the users those patterns name.
//! [`analysis`] holds evaluation, baselines, parameter sweeps, purity and
//! attribute ablation; [`synth`] generates labeled corpora with planted
//! coordinated behaviour.

pub mod analysis;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod miner;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use miner::{mine_closed_contrast, oracle_mine, MiningParams, ThresholdSide};
pub use model::{
    ContrastPattern, Fraction, Growth, ItemDictionary, ItemId, PatternStats, Schema, Transaction,
    TransactionDataset, Window,
};
