//! Desk-scale, deterministic emulation of predictive closed-loop service
//! automation for sliced radio access networks.
//!
//! The crate wires together the full loop an O-RAN deployment would run:
//!
//! 1. [`traffic`] — synthetic per-(cell, QCI) KPI series standing in for a
//!    live network's O1 telemetry.
//! 2. [`pipeline`] — the SMO-side collector: VES ingest, per-bearer PRB
//!    attribution, and slice-level aggregation.
//! 3. [`forecast`] — the AI server: an LSTM trained from scratch plus
//!    seasonal-ARIMA and seasonal-naive baselines, with the tolerance-band
//!    accuracy metric.
//! 4. [`rapp`] — the Non-RT-RIC application turning forecasts into adaptive
//!    UE limits, PRB quotas, RAN slice descriptors, and cloud directives.
//! 5. [`control`] — A1/E2/O2 transport and enforcement semantics.
//! 6. [`nodesim`] — the E2-node simulator computing service metrics and
//!    feeding served KPIs back into the collector.
//! 7. [`scenario`] — the experiment harness behind the `pclsim` CLI.
//!
//! Everything is deterministic given a configuration and a seed: runs,
//! reports, persisted models and plots are byte-identical across executions.

pub mod control;
pub mod error;
pub mod forecast;
pub mod nodesim;
pub mod pipeline;
pub mod rapp;
pub mod scenario;
pub mod traffic;
pub mod types;
mod util;

pub use error::{Error, Result};
