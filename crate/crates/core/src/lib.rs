//! Deterministic falsification engine for intraday OHLCV signals.

pub mod config;
pub mod execution;
pub mod features;
pub mod ledger;
pub mod market;
pub mod pipeline;
pub mod seed;
pub mod signals;
pub mod stats;
pub mod synth;
